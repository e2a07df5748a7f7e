//! Open-loop heuristic skills: the scripted baseline.
//!
//! Each plan stage maps to a hand-written primitive (pick, place, push,
//! turn, slide) that runs on top of the *same* sequencing stack as the
//! learned method: a motion-planned approach to the region, then a fixed
//! motion pattern anchored to the vision-estimated object position. No
//! feedback corrects a bad estimate mid-primitive, so position noise
//! degrades these skills directly — which is exactly what the noise
//! ablation measures.
//!
//! Skills may read *structural* facts about a fixture (its articulation
//! axis, body extents) from the task description, the way a task-specific
//! script would be written against a known fixture model. All *positions*
//! come from the vision estimate.
//!
//! The controller is open-loop across stages too: a failed stage is
//! recorded and the next one starts from wherever the arm ended up, so
//! early failures cascade.

use std::time::Instant;

use rand::Rng;

use crate::error::SeqError;
use crate::experiment::{EpisodeRecord, ExperimentConfig, StageRecord};
use crate::geom::{v3, Vec3};
use crate::plan::PlanStep;
use crate::seq::{estimate_object_position, park_for_scan, sequence_to_region, PlannerConfig};
use crate::sim::{Action, Articulation, ObjectSpec, Simulator, MAX_EE_STEP};
use crate::terminate::StageGate;

/// Iteration guard for servo loops whose target may be unreachable.
const SERVO_CAP: usize = 40;

/// Gripper steps to swing the aperture across its full range.
const GRIP_STEPS: usize = 4;

/// Label of the painted marker a push skill aims at.
const PUSH_GOAL_LABEL: &str = "goal";

/// Running tally of one scripted episode. Once the task reports done,
/// every further command is a no-op, so a success mid-primitive stops the
/// episode cleanly.
struct Roll {
    reward: f64,
    steps: usize,
    done: bool,
}

impl Roll {
    fn step(&mut self, sim: &mut Simulator, d_ee: Vec3, grip_cmd: f64) {
        if self.done {
            return;
        }
        let (r, done) = sim.step_lite(Action { d_ee, grip_cmd });
        self.reward += r;
        self.steps += 1;
        self.done = done;
    }
}

fn clamp_step(v: f64) -> f64 {
    v.clamp(-MAX_EE_STEP, MAX_EE_STEP)
}

/// Servo the fingertip to height `z`.
fn descend_to(sim: &mut Simulator, roll: &mut Roll, z: f64) {
    for _ in 0..SERVO_CAP {
        let dz = z - sim.ee().z;
        if dz.abs() <= 1e-9 || roll.done {
            break;
        }
        roll.step(sim, v3(0.0, 0.0, clamp_step(dz)), 0.0);
    }
}

/// Servo the fingertip to `(x, y)` at its current height.
fn move_xy_to(sim: &mut Simulator, roll: &mut Roll, x: f64, y: f64) {
    for _ in 0..SERVO_CAP {
        let ee = sim.ee();
        let (dx, dy) = (x - ee.x, y - ee.y);
        if dx.abs().max(dy.abs()) <= 1e-9 || roll.done {
            break;
        }
        roll.step(sim, v3(clamp_step(dx), clamp_step(dy), 0.0), 0.0);
    }
}

fn grip(sim: &mut Simulator, roll: &mut Roll, cmd: f64, n: usize) {
    for _ in 0..n {
        roll.step(sim, Vec3::ZERO, cmd);
    }
}

/// Pick at the estimated position: open wide, lower the fingertip to the
/// estimated centroid height, close, and lift clear.
fn pick(sim: &mut Simulator, roll: &mut Roll, est: Vec3) {
    grip(sim, roll, 1.0, GRIP_STEPS);
    descend_to(sim, roll, est.z);
    grip(sim, roll, -1.0, GRIP_STEPS);
    for _ in 0..3 {
        roll.step(sim, v3(0.0, 0.0, MAX_EE_STEP), 0.0);
    }
}

/// Place at the estimated position: lower the load, release, withdraw.
fn place(sim: &mut Simulator, roll: &mut Roll, est: Vec3) {
    descend_to(sim, roll, est.z + 0.01);
    grip(sim, roll, 1.0, 3);
    for _ in 0..2 {
        roll.step(sim, v3(0.0, 0.0, MAX_EE_STEP), 0.0);
    }
}

/// Push the object at `est` toward `goal`: close the fingers into a thin
/// probe, swing behind the object, drop to its mid-height, and drive
/// through until it has travelled `push_dist` (plus slack for the approach
/// gap and jam losses).
fn push_to_goal(sim: &mut Simulator, roll: &mut Roll, est: Vec3, goal: Vec3, push_dist: f64) {
    let to_goal = v3(goal.x - est.x, goal.y - est.y, 0.0);
    if to_goal.norm_xy() < 1e-9 {
        return; // already there; nothing to push toward
    }
    let dir = to_goal.normalized();
    grip(sim, roll, -1.0, GRIP_STEPS);
    let start = est - dir * 0.07;
    move_xy_to(sim, roll, start.x, start.y);
    descend_to(sim, roll, est.z);
    let travel = 0.07 + push_dist + 0.06;
    let n = (travel / MAX_EE_STEP).ceil() as usize;
    for _ in 0..n {
        roll.step(sim, dir * MAX_EE_STEP, 0.0);
    }
}

/// Turn a dial-like fixture: enter the rim annulus beside the estimated
/// axis, drop to rim height, and sweep an arc of `angle` plus slack in
/// chord steps small enough to stay engaged throughout.
fn turn_rim(sim: &mut Simulator, roll: &mut Roll, est: Vec3, height: f64, angle: f64) {
    const R_ORBIT: f64 = 0.03;
    const D_THETA: f64 = 0.5;
    move_xy_to(sim, roll, est.x + R_ORBIT, est.y);
    descend_to(sim, roll, est.z + height / 2.0 + 0.004);
    let arc = angle + 0.3;
    let n = (arc / D_THETA).ceil() as usize;
    for k in 1..=n {
        if roll.done {
            break;
        }
        let a = (k as f64 * D_THETA).min(arc);
        let target = v3(est.x + R_ORBIT * a.cos(), est.y + R_ORBIT * a.sin(), 0.0);
        let ee = sim.ee();
        roll.step(sim, v3(target.x - ee.x, target.y - ee.y, 0.0), 0.0);
    }
}

/// Drag a drawer-like fixture along its slide axis: move over the leading
/// face (the handle), drop to just above the body, and pull (`sign` +1 to
/// open) or push (−1 to close) along the axis by `travel` plus slack.
fn slide_axis(
    sim: &mut Simulator,
    roll: &mut Roll,
    est: Vec3,
    spec: &ObjectSpec,
    axis_yaw: f64,
    sign: f64,
    travel: f64,
) {
    let axis = v3(axis_yaw.cos(), axis_yaw.sin(), 0.0);
    // Handle offset along the axis; fixtures sit axis-aligned in these
    // scenes, so the extent is the box half-extent projected on the axis.
    let ext = match spec.shape {
        crate::sim::ObjectShape::Cuboid { hx, hy, .. } => {
            axis.x.abs() * hx + axis.y.abs() * hy
        }
        crate::sim::ObjectShape::Cylinder { r, .. }
        | crate::sim::ObjectShape::Ring { r_out: r, .. } => r,
        crate::sim::ObjectShape::Tray { hx, hy, .. } => hx.max(hy),
    };
    let handle = est + axis * ext;
    move_xy_to(sim, roll, handle.x, handle.y);
    descend_to(sim, roll, est.z + spec.shape.height() / 2.0 + 0.006);
    let n = ((travel + 0.04) / MAX_EE_STEP).ceil() as usize;
    for _ in 0..n {
        roll.step(sim, axis * (sign * MAX_EE_STEP), 0.0);
    }
}

/// The stage's sequencing: motion-plan to the region, record the outcome,
/// and hand back the position estimate the skill should anchor to.
fn approach(
    sim: &mut Simulator,
    label: &str,
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
    rec: &mut StageRecord,
) -> Option<Vec3> {
    let planner = PlannerConfig { seed: rng.gen(), ..cfg.planner };
    match sequence_to_region(sim, label, &cfg.noise(), &planner, rng) {
        Ok(out) => {
            rec.sequenced = true;
            rec.planning_time = out.plan.planning_time;
            rec.plan_samples = out.plan.n_samples;
            Some(out.estimate)
        }
        Err(e) => {
            rec.note_fault(e.to_string());
            None
        }
    }
}

/// Park the arm and estimate `label`'s position from a fresh scan, without
/// motion-planning anywhere.
fn scan_estimate(
    sim: &mut Simulator,
    label: &str,
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> Result<Vec3, SeqError> {
    let obs = park_for_scan(sim);
    estimate_object_position(&obs.frames, label, &cfg.noise(), rng)
}

/// The scene object a stage's region label names, for structural facts
/// (shape, articulation axis). Positions still come from vision.
fn scene_object<'a>(sim: &'a Simulator, label: &str) -> Option<&'a ObjectSpec> {
    sim.spec.objects.iter().find(|o| o.label == label)
}

/// Run one scripted episode over `plan`.
pub fn run_scripted_episode(
    sim: &mut Simulator,
    plan: &[PlanStep],
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> EpisodeRecord {
    let t0 = Instant::now();
    let th = &cfg.thresholds;
    let mut stages = Vec::with_capacity(plan.len());
    let mut roll = Roll { reward: 0.0, steps: 0, done: sim.is_success() };

    for step in plan {
        let mut rec = StageRecord::new(&step.region, &step.condition);
        if roll.done {
            stages.push(rec);
            break;
        }

        // A push needs the goal marker scanned before the arm commits to
        // the object's neighborhood.
        let goal_est = if step.condition == "push" {
            match scan_estimate(sim, PUSH_GOAL_LABEL, cfg, rng) {
                Ok(g) => Some(g),
                Err(e) => {
                    rec.note_fault(e.to_string());
                    stages.push(rec);
                    continue;
                }
            }
        } else {
            None
        };

        let Some(est) = approach(sim, &step.region, cfg, rng, &mut rec) else {
            stages.push(rec);
            continue;
        };

        let mut gate = match StageGate::begin(sim, &step.region, &step.condition, cfg.thresholds) {
            Ok(g) => Some(g),
            Err(e) => {
                rec.note_fault(e.to_string());
                None
            }
        };

        let before = roll.steps;
        match step.condition.as_str() {
            "grasp" => pick(sim, &mut roll, est),
            "place" => place(sim, &mut roll, est),
            "push" => {
                let goal = goal_est.expect("push stages scan the goal first");
                push_to_goal(sim, &mut roll, est, goal, th.push_dist);
            }
            "turn" => {
                let height = scene_object(sim, &step.region).map_or(0.02, |o| o.shape.height());
                turn_rim(sim, &mut roll, est, height, th.turn_angle);
            }
            "open" | "close" => {
                let sign = if step.condition == "open" { 1.0 } else { -1.0 };
                match scene_object(sim, &step.region)
                    .and_then(|o| o.articulation.map(|a| (o, a)))
                {
                    Some((o, Articulation::Prismatic { axis_yaw, .. })) => {
                        let o = o.clone();
                        slide_axis(sim, &mut roll, est, &o, axis_yaw, sign, th.slide_dist);
                    }
                    _ => rec.note_fault(format!(
                        "region `{}` has no slide axis to {}",
                        step.region, step.condition
                    )),
                }
            }
            other => rec.note_fault(format!("no scripted skill for condition `{other}`")),
        }
        rec.steps_used = roll.steps - before;
        rec.condition_met = gate.as_mut().is_some_and(|g| g.check(sim).unwrap_or(false));
        stages.push(rec);
        if roll.done {
            break;
        }
    }

    EpisodeRecord {
        stages,
        total_reward: roll.reward,
        env_steps: roll.steps,
        success: sim.is_success(),
        wall_time: t0.elapsed().as_secs_f64(),
    }
}
