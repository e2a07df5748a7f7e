//! Registered tasks: scene composition, sampling regions, goals, and the
//! natural-language descriptions used to prompt a planner.

use super::types::*;
use crate::arm::JointConfig;
use crate::error::SimError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::f64::consts::{FRAC_PI_2, PI};

/// Names of all registered tasks, in registry order.
pub const TASK_NAMES: [&str; 8] = [
    "Lift",
    "PickPlaceCan",
    "NutRound",
    "CanBread",
    "Push",
    "DialTurn",
    "DrawerOpen",
    "MS-3",
];

fn obj(
    label: &str,
    shape: ObjectShape,
    graspable: bool,
    movable: bool,
    region: SampleRegion,
) -> ObjectSpec {
    ObjectSpec {
        label: label.to_string(),
        shape,
        graspable,
        movable,
        articulation: None,
        region,
    }
}

fn tray() -> ObjectShape {
    ObjectShape::Tray { hx: 0.065, hy: 0.065, wall_h: 0.022, t: 0.006 }
}

fn can_shape() -> ObjectShape {
    ObjectShape::Cylinder { r: 0.028, h: 0.035 }
}

fn block_shape() -> ObjectShape {
    ObjectShape::Cuboid { hx: 0.03, hy: 0.03, hz: 0.02 }
}

fn dial_spec(x: f64, y: f64) -> ObjectSpec {
    ObjectSpec {
        label: "dial".to_string(),
        shape: ObjectShape::Cylinder { r: 0.045, h: 0.024 },
        graspable: false,
        movable: false,
        articulation: Some(Articulation::Hinge { lo: 0.0, hi: PI }),
        region: SampleRegion::jittered(x, y, 0.02),
    }
}

fn drawer_spec(x: f64, y: f64) -> ObjectSpec {
    ObjectSpec {
        label: "drawer".to_string(),
        shape: ObjectShape::Cuboid { hx: 0.055, hy: 0.045, hz: 0.016 },
        graspable: false,
        movable: false,
        // Opens toward the table edge the arm reaches over.
        articulation: Some(Articulation::Prismatic { axis_yaw: -FRAC_PI_2, lo: 0.0, hi: 0.12 }),
        region: SampleRegion::jittered(x, y, 0.015),
    }
}

fn goal_marker(x: f64, y: f64) -> ObjectSpec {
    obj(
        "goal",
        ObjectShape::Cylinder { r: 0.045, h: 0.004 },
        false,
        false,
        SampleRegion::fixed(x, y),
    )
}

/// Build the specification of a registered task.
pub fn task_spec(name: &str) -> Result<TaskSpec, SimError> {
    let movable_region = |x0, x1, y0, y1| SampleRegion {
        x: (x0, x1),
        y: (y0, y1),
        yaw: (-0.3, 0.3),
    };
    let spec = match name {
        "Lift" => TaskSpec {
            name: name.into(),
            description: "Lift the cube off the table.".into(),
            objects: vec![obj(
                "cube",
                ObjectShape::Cuboid { hx: 0.025, hy: 0.025, hz: 0.0125 },
                true,
                true,
                movable_region(0.38, 0.62, 0.30, 0.46),
            )],
            vocabulary: vec!["cube".into()],
            goals: vec![Goal::LiftTo { obj: 0, rise: 0.05 }],
            stage_count: 1,
            reward: RewardMode::Dense,
        },
        "PickPlaceCan" => TaskSpec {
            name: name.into(),
            description: "Put the can into bin 1.".into(),
            objects: vec![
                obj("can", can_shape(), true, true, movable_region(0.40, 0.60, 0.28, 0.42)),
                obj("bin 1", tray(), false, false, SampleRegion::jittered(0.63, 0.48, 0.01)),
            ],
            vocabulary: vec!["can".into(), "bin 1".into()],
            goals: vec![Goal::Place { obj: 0, dest: 1, tol: 0.03 }],
            stage_count: 2,
            reward: RewardMode::Dense,
        },
        "NutRound" => TaskSpec {
            name: name.into(),
            description: "The silver nut goes on the silver peg.".into(),
            objects: vec![
                obj(
                    "silver nut",
                    ObjectShape::Ring { r_in: 0.042, r_out: 0.058, h: 0.018 },
                    true,
                    true,
                    movable_region(0.36, 0.52, 0.28, 0.40),
                ),
                obj(
                    "silver peg",
                    ObjectShape::Cylinder { r: 0.026, h: 0.028 },
                    false,
                    false,
                    SampleRegion::jittered(0.62, 0.35, 0.01),
                ),
            ],
            vocabulary: vec!["silver nut".into(), "silver peg".into()],
            goals: vec![Goal::PlaceOn { obj: 0, dest: 1, tol: 0.015 }],
            stage_count: 2,
            reward: RewardMode::Dense,
        },
        "CanBread" => TaskSpec {
            name: name.into(),
            description: "Put the can into bin 1 and the bread slice into bin 4.".into(),
            objects: vec![
                obj("can", can_shape(), true, true, movable_region(0.42, 0.58, 0.28, 0.40)),
                obj("bin 1", tray(), false, false, SampleRegion::jittered(0.63, 0.48, 0.01)),
                obj(
                    "bread slice",
                    ObjectShape::Cuboid { hx: 0.032, hy: 0.032, hz: 0.008 },
                    true,
                    true,
                    movable_region(0.40, 0.56, 0.26, 0.38),
                ),
                obj("bin 4", tray(), false, false, SampleRegion::jittered(0.37, 0.48, 0.01)),
            ],
            vocabulary: vec!["can".into(), "bin 1".into(), "bread slice".into(), "bin 4".into()],
            goals: vec![
                Goal::Place { obj: 0, dest: 1, tol: 0.03 },
                Goal::Place { obj: 2, dest: 3, tol: 0.03 },
            ],
            stage_count: 4,
            reward: RewardMode::Dense,
        },
        "Push" => TaskSpec {
            name: name.into(),
            description: "Push the block toward the goal marker.".into(),
            objects: vec![
                obj("block", block_shape(), true, true, movable_region(0.42, 0.58, 0.30, 0.40)),
                goal_marker(0.50, 0.55),
            ],
            vocabulary: vec!["block".into(), "goal".into()],
            goals: vec![Goal::PushToward { obj: 0, goal: 1, dist: 0.10 }],
            stage_count: 1,
            reward: RewardMode::Dense,
        },
        "DialTurn" => TaskSpec {
            name: name.into(),
            description: "Turn the dial a quarter turn.".into(),
            objects: vec![dial_spec(0.56, 0.33)],
            vocabulary: vec!["dial".into()],
            goals: vec![Goal::HingeTo { obj: 0, angle: FRAC_PI_2 }],
            stage_count: 1,
            reward: RewardMode::Dense,
        },
        "DrawerOpen" => TaskSpec {
            name: name.into(),
            description: "Pull the drawer open.".into(),
            objects: vec![drawer_spec(0.44, 0.46)],
            vocabulary: vec!["drawer".into()],
            goals: vec![Goal::SlideTo { obj: 0, dist: 0.08 }],
            stage_count: 1,
            reward: RewardMode::Dense,
        },
        "MS-3" => TaskSpec {
            name: name.into(),
            description: "Turn the dial, push the block toward the goal marker, then pull the drawer open.".into(),
            objects: vec![
                dial_spec(0.60, 0.30),
                obj("block", block_shape(), true, true, movable_region(0.44, 0.56, 0.30, 0.38)),
                goal_marker(0.38, 0.52),
                drawer_spec(0.56, 0.50),
            ],
            vocabulary: vec!["dial".into(), "block".into(), "goal".into(), "drawer".into()],
            goals: vec![
                Goal::HingeTo { obj: 0, angle: FRAC_PI_2 },
                Goal::PushToward { obj: 1, goal: 2, dist: 0.10 },
                Goal::SlideTo { obj: 3, dist: 0.08 },
            ],
            stage_count: 3,
            reward: RewardMode::Dense,
        },
        _ => return Err(SimError::NotRegistered { task: name.to_string() }),
    };
    Ok(spec)
}

/// Sample the initial world state for a task under `seed`. Identical
/// (name, seed) pairs produce bit-identical states.
pub fn create_task(name: &str, seed: u64) -> Result<(TaskSpec, WorldState), SimError> {
    let spec = task_spec(name)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses: Vec<Pose> = Vec::with_capacity(spec.objects.len());

    for (i, o) in spec.objects.iter().enumerate() {
        let mut accepted = None;
        for _attempt in 0..40 {
            let x = sample_range(&mut rng, o.region.x);
            let y = sample_range(&mut rng, o.region.y);
            let yaw = sample_range(&mut rng, o.region.yaw);
            let pose = Pose::new(x, y, 0.0, yaw);
            if placement_clear(&spec, &poses, i, &pose) {
                accepted = Some(pose);
                break;
            }
            accepted = Some(pose);
        }
        poses.push(accepted.expect("at least one placement attempt"));
    }

    let articulations = vec![0.0; spec.objects.len()];
    let state = WorldState {
        robot: JointConfig::home(),
        init_poses: poses.clone(),
        poses,
        articulations,
        attachment: None,
        step_index: 0,
        seed,
    };
    Ok((spec, state))
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Reject placements whose footprints come within 12 mm of an
/// already-placed object.
fn placement_clear(spec: &TaskSpec, placed: &[Pose], idx: usize, pose: &Pose) -> bool {
    let prims_new = object_primitives(&spec.objects[idx], pose, 0.0);
    for (j, other) in placed.iter().enumerate() {
        for p in object_primitives(&spec.objects[j], other, 0.0) {
            for q in &prims_new {
                let gap = p.footprint_dist_xy(q.base) - footprint_radius(q);
                if gap < 0.012 {
                    return false;
                }
            }
        }
    }
    true
}

/// Coarse bounding radius of a primitive's footprint.
fn footprint_radius(p: &crate::geom::Placed) -> f64 {
    match p.solid {
        crate::geom::Solid::Cuboid { hx, hy, .. } => (hx * hx + hy * hy).sqrt(),
        crate::geom::Solid::Cylinder { r, .. } => r,
        crate::geom::Solid::Ring { r_out, .. } => r_out,
    }
}
