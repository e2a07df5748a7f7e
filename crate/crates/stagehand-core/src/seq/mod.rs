//! Vision-based sequencing: move the arm to a named region of the scene
//! without touching anything on the way.
//!
//! The pipeline is scan → estimate → plan → execute. The arm first parks
//! itself out of both camera frusta so the scan is unobstructed, the
//! target object's position is estimated from the rendered views, a goal
//! configuration hovering above the estimate is solved in closed form, and
//! a sampling-based planner threads the capsule body (plus any held
//! object) through the obstacle cloud.

pub mod cloud;
pub mod collide;
pub mod mask;
pub mod pose;
pub mod rrt;

pub use cloud::{
    parse_cloud, preprocess_cloud, project_point_cloud, remove_robot_points, write_cloud,
    PointCloud, SpatialHash, Workspace, ROBOT_POINT_GUARD, VOXEL_SIZE, WORKSPACE,
};
pub use collide::{
    interpolation_steps, lerp_config, AttachedShape, CollisionChecker, ANGLE_RESOLUTION,
    CLEARANCE, LIFT_RESOLUTION,
};
pub use mask::{label_mask, refine_mask};
pub use pose::{estimate_object_position, object_cloud, NoiseModel};
pub use rrt::{plan_motion, MotionPlanResult, PlannerConfig, GOAL_PROJECTION_RADIUS};

use rand::Rng;

use crate::arm::{inverse_kinematics, JointConfig, DZ_RANGE};
use crate::error::SeqError;
use crate::geom::{v3, Vec3};
use crate::sim::types::{object_id, DepthFrame, Observation, ID_ROBOT};
use crate::sim::Simulator;

/// Hover height of a sequencing goal above the estimated surface, meters.
pub const STANDOFF: f64 = 0.05;
/// Lift height used while repositioning for a scan: high enough that the
/// fingers (and anything held) clear every tabletop object.
pub const SCAN_LIFT: f64 = 0.25;

/// Closed-form inverse kinematics with sequencing error semantics.
pub fn solve_ik(target: Vec3, current: &JointConfig) -> Result<JointConfig, SeqError> {
    inverse_kinematics(target, current)
        .map_err(|_| SeqError::Unreachable { x: target.x, y: target.y, z: target.z })
}

/// Drive the arm through `waypoints`, sweeping each segment at the
/// collision-check resolution so an attached object moves continuously.
/// Returns the observation at the final configuration.
pub fn execute_waypoints(sim: &mut Simulator, waypoints: &[JointConfig]) -> Observation {
    if let [only] = waypoints {
        sim.set_config(*only);
    }
    for pair in waypoints.windows(2) {
        let n = interpolation_steps(&pair[0], &pair[1]);
        for i in 0..=n {
            sim.set_config(lerp_config(&pair[0], &pair[1], i as f64 / n as f64));
        }
    }
    sim.observe()
}

/// Move the arm out of both camera views so a scan sees only the scene.
///
/// The maneuver is collision-free by construction, with no planning
/// needed: the hand first rises straight up to its top travel — nothing in
/// any scene overhangs, so a vertical ascent cannot strike — and then
/// swings to the parked configuration with the fingers (and any held
/// object's underside) far above the tallest tabletop fixture, while the
/// links stay in their own horizontal plane above everything. The grip is
/// held so a carried object stays carried.
pub fn park_for_scan(sim: &mut Simulator) -> Observation {
    let here = sim.state.robot;
    let lifted = JointConfig { d_z: SCAN_LIFT, ..here };
    let parked = JointConfig { grip: here.grip, ..JointConfig::parked() };
    execute_waypoints(sim, &[here, lifted, parked])
}

/// The obstacle cloud for motion planning: both views back-projected,
/// cropped, denoised, and stripped of robot points and of any held object
/// (the planner sweeps the held object's own shape instead).
pub fn planning_cloud(sim: &Simulator, frames: &[DepthFrame]) -> Result<PointCloud, SeqError> {
    let raw = project_point_cloud(frames);
    let clean = preprocess_cloud(&raw, &WORKSPACE)?;
    let mut strip = vec![ID_ROBOT];
    if let Some(att) = sim.state.attachment {
        strip.push(object_id(att.obj));
    }
    Ok(remove_robot_points(&clean, &strip, &crate::arm::body_capsules(&sim.state.robot)))
}

/// Everything a completed sequencing move reports.
#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    /// The (noisy) position estimate the move aimed at.
    pub estimate: Vec3,
    pub plan: MotionPlanResult,
    /// Observation after executing the plan.
    pub obs: Observation,
}

/// Scan the scene and move the hand to a standoff above the object called
/// `label`. On success the arm rests at the planned goal; on failure the
/// arm is parked where the scan left it and the error says which pipeline
/// step gave out.
pub fn sequence_to_region(
    sim: &mut Simulator,
    label: &str,
    noise: &NoiseModel,
    planner: &PlannerConfig,
    rng: &mut impl Rng,
) -> Result<SequenceOutcome, SeqError> {
    crate::probe::bump_sequence();
    let scan = park_for_scan(sim);
    let estimate = estimate_object_position(&scan.frames, label, noise, rng)?;
    let cloud = planning_cloud(sim, &scan.frames)?;

    let start = sim.state.robot;
    let hover_z = (estimate.z + STANDOFF).clamp(DZ_RANGE.0, DZ_RANGE.1);
    let goal = solve_ik(v3(estimate.x, estimate.y, hover_z), &start)?;

    let mut checker = CollisionChecker::new(&cloud, CLEARANCE);
    if let Some(att) = sim.state.attachment {
        checker = checker.with_attachment(AttachedShape {
            spec: sim.spec.objects[att.obj].clone(),
            rel: att.rel,
            yaw: sim.state.poses[att.obj].yaw,
        });
    }

    let plan = plan_motion(&checker, &start, &goal, planner)?;
    let obs = execute_waypoints(sim, &plan.waypoints);
    Ok(SequenceOutcome { estimate, plan, obs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::forward_kinematics;
    use crate::sim::types::Attachment;
    use crate::sim::RenderConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clean_sim(task: &str, seed: u64) -> Simulator {
        let mut sim = Simulator::new(task, seed).unwrap();
        sim.render_cfg = RenderConfig::OFF;
        sim
    }

    #[test]
    fn ik_round_trips_through_forward_kinematics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let current = JointConfig::home();
        for _ in 0..200 {
            // Sample targets inside the annulus the arm can actually reach.
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let radius = rng.gen_range(0.05..0.69);
            let target = v3(
                0.5 + radius * angle.cos(),
                -0.1 + radius * angle.sin(),
                rng.gen_range(0.0..0.3),
            );
            let q = solve_ik(target, &current).unwrap();
            assert!(forward_kinematics(&q).dist(target) <= 1e-6);
        }
    }

    #[test]
    fn an_out_of_reach_target_reports_its_own_coordinates() {
        match solve_ik(v3(0.99, 0.99, 0.10), &JointConfig::home()) {
            Err(SeqError::Unreachable { x, y, z }) => {
                assert_eq!((x, y, z), (0.99, 0.99, 0.10));
            }
            other => panic!("expected Unreachable, got {other:?}"),
        }
    }

    #[test]
    fn parking_empties_both_camera_views_of_the_robot() {
        let mut sim = clean_sim("CanBread", 2);
        sim.set_config(JointConfig::new(1.2, 0.4, 0.05, 0.37));
        let obs = park_for_scan(&mut sim);
        for frame in &obs.frames {
            assert_eq!(frame.mask_pixel_count(ID_ROBOT), 0, "robot visible after parking");
        }
        let q = sim.state.robot;
        let parked = JointConfig::parked();
        assert_eq!((q.theta1, q.theta2, q.d_z), (parked.theta1, parked.theta2, parked.d_z));
        assert!((q.grip - 0.37).abs() < 1e-12, "grip must survive parking");
    }

    #[test]
    fn parking_with_a_held_object_hides_it_from_the_scan() {
        let mut sim = clean_sim("PickPlaceCan", 4);
        // Grasp the can in place, then attach it as a completed grasp would.
        let can = sim.centroid_of(0);
        let grasp = solve_ik(v3(can.x, can.y, 0.01), &sim.state.robot).unwrap();
        sim.set_config(JointConfig { grip: 0.3, ..grasp });
        let ee = sim.ee();
        let can = sim.state.poses[0].pos;
        sim.state.attachment = Some(Attachment { obj: 0, rel: can - ee, span: 0.056 });
        let obs = park_for_scan(&mut sim);
        let can_id = object_id(0);
        for frame in &obs.frames {
            assert_eq!(frame.mask_pixel_count(ID_ROBOT), 0);
            assert_eq!(frame.mask_pixel_count(can_id), 0, "held can visible after parking");
        }
        // The can must have traveled with the hand.
        let ee_now = sim.ee();
        assert!(sim.state.poses[0].pos.dist(ee_now + (can - ee)) < 1e-12);
    }

    #[test]
    fn the_planning_cloud_contains_objects_but_never_the_robot() {
        let sim = clean_sim("PickPlaceCan", 6);
        let frames = sim.observe().frames;
        let cloud = planning_cloud(&sim, &frames).unwrap();
        assert!(!cloud.is_empty());
        let can = sim.centroid_of(0);
        let near_can =
            cloud.points.iter().filter(|p| p.dist_xy(can) < 0.04 && p.z > 0.003).count();
        assert!(near_can > 0, "the can should contribute obstacle points");
        // No surviving point may lie on the robot body.
        for cap in crate::arm::body_capsules(&sim.state.robot) {
            for &p in &cloud.points {
                assert!(
                    crate::geom::capsule_dist(p, cap.a, cap.b, cap.r) > 0.0,
                    "robot point survived at {p:?}"
                );
            }
        }
    }

    #[test]
    fn sequencing_reaches_a_standoff_above_the_can() {
        let mut sim = clean_sim("PickPlaceCan", 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = sequence_to_region(
            &mut sim,
            "can",
            &NoiseModel::EXACT,
            &PlannerConfig::default(),
            &mut rng,
        )
        .unwrap();
        let truth = sim.centroid_of(0);
        let ee = sim.ee();
        assert!(ee.dist_xy(truth) <= 0.006, "hand xy {:.4} m off the can", ee.dist_xy(truth));
        assert!((ee.z - (out.estimate.z + STANDOFF)).abs() <= 1e-9);
        assert!(ee.z > truth.z, "hand must hover above the can, not inside it");
        let parked = JointConfig::parked();
        let first = out.plan.waypoints.first().unwrap();
        assert!((first.theta1 - parked.theta1).abs() < 1e-12, "plans start from the scan park");
        // The executed plan must satisfy the same checker it was planned
        // against (the scene is static, so a fresh scan rebuilds it).
        let frames = park_for_scan(&mut sim).frames;
        let cloud = planning_cloud(&sim, &frames).unwrap();
        let checker = CollisionChecker::new(&cloud, CLEARANCE);
        assert!(out
            .plan
            .waypoints
            .windows(2)
            .all(|w| checker.edge_is_free(&w[0], &w[1])));
    }

    #[test]
    fn sequencing_carries_a_held_object_to_the_next_region() {
        let mut sim = clean_sim("PickPlaceCan", 1);
        // Grasp the can in place: hand just above it, attachment frozen.
        let can = sim.centroid_of(0);
        let grasp = solve_ik(v3(can.x, can.y, 0.01), &sim.state.robot).unwrap();
        sim.set_config(JointConfig { grip: 0.3, ..grasp });
        let rel = sim.state.poses[0].pos - sim.ee();
        sim.state.attachment = Some(Attachment { obj: 0, rel, span: 0.056 });

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = sequence_to_region(
            &mut sim,
            "bin 1",
            &NoiseModel::EXACT,
            &PlannerConfig::default(),
            &mut rng,
        )
        .unwrap();
        let bin = sim.centroid_of(1);
        let ee = sim.ee();
        assert!(ee.dist_xy(bin) <= 0.006, "hand xy {:.4} m off the bin", ee.dist_xy(bin));
        // Attachment held, object still rigidly coupled, grip unchanged.
        assert!(sim.is_attached(0));
        assert!(sim.state.poses[0].pos.dist(ee + rel) < 1e-12);
        assert!((sim.state.robot.grip - 0.3).abs() < 1e-12);
        assert!(out.plan.waypoints.iter().all(|q| (q.grip - 0.3).abs() < 1e-12));
    }

    #[test]
    fn sequencing_an_unknown_region_is_mask_not_found() {
        let mut sim = clean_sim("Lift", 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        match sequence_to_region(
            &mut sim,
            "anvil",
            &NoiseModel::EXACT,
            &PlannerConfig::default(),
            &mut rng,
        ) {
            Err(SeqError::MaskNotFound { label }) => assert_eq!(label, "anvil"),
            other => panic!("expected MaskNotFound, got {other:?}"),
        }
        // The failure leaves the arm parked, ready for recovery.
        let parked = JointConfig::parked();
        assert!((sim.state.robot.theta1 - parked.theta1).abs() < 1e-12);
    }

    #[test]
    fn noisy_estimates_still_sequence_but_land_off_center() {
        let mut sim = clean_sim("Push", 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = NoiseModel { sigma: 0.02 };
        let out =
            sequence_to_region(&mut sim, "block", &noise, &PlannerConfig::default(), &mut rng)
                .unwrap();
        let truth = sim.centroid_of(0);
        let err = out.estimate.dist_xy(truth);
        assert!(err > 0.005, "sigma 0.02 should displace the estimate, got {err:.4}");
        assert!(sim.ee().dist_xy(out.estimate) <= 1e-6, "hand must land on the estimate");
    }
}
