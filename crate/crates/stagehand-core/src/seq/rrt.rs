//! Joint-space motion planning: bidirectional rapidly-exploring random
//! trees with greedy connection, goal projection out of shallow contact,
//! and randomized shortcut smoothing. Deterministic for a fixed seed; the
//! sample budget, not the wall clock, is the primary stopping rule.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arm::{JointConfig, DZ_RANGE};
use crate::error::SeqError;
use crate::seq::collide::CollisionChecker;

/// Joint-space radius searched when the requested goal is in collision.
pub const GOAL_PROJECTION_RADIUS: f64 = 0.05;
/// Perturbations tried inside that radius before giving up.
const GOAL_PROJECTION_TRIES: usize = 200;
/// Wall-clock budget is only consulted every this many samples.
const TIMEOUT_CHECK_STRIDE: usize = 1000;
/// Two configurations closer than this (joint metric) count as identical.
const IDENTICAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub seed: u64,
    /// Maximum joint-space length of one tree extension.
    pub step: f64,
    /// Emergency wall-clock limit, seconds.
    pub timeout: f64,
    /// Deterministic sample budget; the planner fails once it is spent.
    pub max_samples: usize,
    /// Randomized shortcut passes applied to a found path.
    pub shortcut_iters: usize,
}

impl Default for PlannerConfig {
    fn default() -> PlannerConfig {
        PlannerConfig {
            seed: 0,
            step: 0.05,
            timeout: 10.0,
            max_samples: 200_000,
            shortcut_iters: 100,
        }
    }
}

/// A collision-free joint-space path and how much work found it.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlanResult {
    /// First waypoint is the start configuration; the last is the goal
    /// (projected out of contact when necessary). Every straight segment
    /// between neighbors is collision-free at the check resolution, and
    /// the grip value is the start's throughout.
    pub waypoints: Vec<JointConfig>,
    pub planning_time: f64,
    pub n_samples: usize,
}

struct Tree {
    nodes: Vec<JointConfig>,
    parent: Vec<usize>,
}

impl Tree {
    fn rooted_at(q: JointConfig) -> Tree {
        Tree { nodes: vec![q], parent: vec![usize::MAX] }
    }

    fn nearest(&self, q: &JointConfig) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, node) in self.nodes.iter().enumerate() {
            let d = node.joint_dist(q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn add(&mut self, q: JointConfig, parent: usize) -> usize {
        self.nodes.push(q);
        self.parent.push(parent);
        self.nodes.len() - 1
    }

    /// Root-to-node branch, root first.
    fn branch(&self, mut i: usize) -> Vec<JointConfig> {
        let mut out = Vec::new();
        while i != usize::MAX {
            out.push(self.nodes[i]);
            i = self.parent[i];
        }
        out.reverse();
        out
    }
}

/// Walk from `from` toward `to`, at most `step` in the joint metric, grip
/// pinned to `from`.
fn steer(from: &JointConfig, to: &JointConfig, step: f64) -> JointConfig {
    let d = from.joint_dist(to);
    if d <= step {
        return JointConfig { grip: from.grip, ..*to };
    }
    let t = step / d;
    JointConfig {
        theta1: from.theta1 + (to.theta1 - from.theta1) * t,
        theta2: from.theta2 + (to.theta2 - from.theta2) * t,
        d_z: from.d_z + (to.d_z - from.d_z) * t,
        grip: from.grip,
    }
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend(tree: &mut Tree, target: &JointConfig, step: f64, checker: &CollisionChecker) -> Extend {
    let near = tree.nearest(target);
    let q_new = steer(&tree.nodes[near], target, step);
    if !checker.edge_is_free(&tree.nodes[near], &q_new) {
        return Extend::Trapped;
    }
    let idx = tree.add(q_new, near);
    if q_new.joint_dist(target) <= IDENTICAL_EPS {
        Extend::Reached(idx)
    } else {
        Extend::Advanced(idx)
    }
}

/// Greedily extend `tree` toward `target` until it arrives or is blocked.
fn connect(tree: &mut Tree, target: &JointConfig, step: f64, checker: &CollisionChecker) -> Option<usize> {
    loop {
        match extend(tree, target, step, checker) {
            Extend::Trapped => return None,
            Extend::Advanced(_) => {}
            Extend::Reached(i) => return Some(i),
        }
    }
}

fn sample_config(rng: &mut ChaCha8Rng, grip: f64) -> JointConfig {
    use std::f64::consts::PI;
    JointConfig {
        theta1: rng.gen_range(-PI..PI),
        theta2: rng.gen_range(-PI..PI),
        d_z: rng.gen_range(DZ_RANGE.0..DZ_RANGE.1),
        grip,
    }
}

/// Replace the requested goal with a nearby free configuration when it is
/// in (or within clearance of) contact.
fn project_goal(
    checker: &CollisionChecker,
    goal: &JointConfig,
    rng: &mut ChaCha8Rng,
) -> Result<JointConfig, SeqError> {
    if checker.is_free(goal) {
        return Ok(*goal);
    }
    for _ in 0..GOAL_PROJECTION_TRIES {
        let d = [
            rng.gen_range(-GOAL_PROJECTION_RADIUS..GOAL_PROJECTION_RADIUS),
            rng.gen_range(-GOAL_PROJECTION_RADIUS..GOAL_PROJECTION_RADIUS),
            rng.gen_range(-GOAL_PROJECTION_RADIUS..GOAL_PROJECTION_RADIUS),
        ];
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() > GOAL_PROJECTION_RADIUS {
            continue;
        }
        let cand = JointConfig {
            theta1: goal.theta1 + d[0],
            theta2: goal.theta2 + d[1],
            d_z: goal.d_z + d[2],
            grip: goal.grip,
        }
        .clamped();
        if checker.is_free(&cand) {
            return Ok(cand);
        }
    }
    Err(SeqError::GoalInCollision { radius: GOAL_PROJECTION_RADIUS })
}

/// Randomized shortcutting: repeatedly try to splice out everything between
/// two random waypoints.
fn shortcut(
    path: &mut Vec<JointConfig>,
    checker: &CollisionChecker,
    iters: usize,
    rng: &mut ChaCha8Rng,
) {
    for _ in 0..iters {
        if path.len() <= 2 {
            return;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if checker.edge_is_free(&path[i], &path[j]) {
            path.drain(i + 1..j);
        }
    }
}

/// Remove exact duplicates that arise where the two trees met.
fn dedup(path: &mut Vec<JointConfig>) {
    path.dedup_by(|a, b| a.joint_dist(b) <= IDENTICAL_EPS);
}

/// Plan a collision-free joint-space path from `start` to `goal`.
///
/// The returned path starts exactly at `start` and ends at the goal (or its
/// in-radius projection), holds the start's grip throughout, and every
/// segment between consecutive waypoints passes the checker's interpolated
/// edge test. Fails when the start itself is in collision, when no free
/// goal exists within the projection radius, or when the sample budget (or
/// emergency wall-clock limit) runs out.
pub fn plan_motion(
    checker: &CollisionChecker,
    start: &JointConfig,
    goal: &JointConfig,
    cfg: &PlannerConfig,
) -> Result<MotionPlanResult, SeqError> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = start.clamped();
    let requested = JointConfig { grip: start.grip, ..*goal }.clamped();

    if !checker.is_free(&start) {
        return Err(SeqError::PlanningFailed {
            msg: "start configuration is in collision".to_string(),
        });
    }
    let goal = project_goal(checker, &requested, &mut rng)?;

    let finish = |path: Vec<JointConfig>, n_samples: usize| MotionPlanResult {
        waypoints: path,
        planning_time: t0.elapsed().as_secs_f64(),
        n_samples,
    };

    if start.joint_dist(&goal) <= IDENTICAL_EPS {
        return Ok(finish(vec![start], 0));
    }
    if checker.edge_is_free(&start, &goal) {
        return Ok(finish(vec![start, goal], 0));
    }

    let mut tree_a = Tree::rooted_at(start);
    let mut tree_b = Tree::rooted_at(goal);
    let mut a_is_start = true;
    let mut samples = 0;
    while samples < cfg.max_samples {
        if samples % TIMEOUT_CHECK_STRIDE == 0
            && samples > 0
            && t0.elapsed().as_secs_f64() > cfg.timeout
        {
            return Err(SeqError::PlanningFailed {
                msg: format!("timed out after {samples} samples"),
            });
        }
        let q_rand = sample_config(&mut rng, start.grip);
        samples += 1;
        let extended = extend(&mut tree_a, &q_rand, cfg.step, checker);
        if let Extend::Advanced(i) | Extend::Reached(i) = extended {
            let q_new = tree_a.nodes[i];
            if let Some(j) = connect(&mut tree_b, &q_new, cfg.step, checker) {
                let (start_branch, goal_branch) = if a_is_start {
                    (tree_a.branch(i), tree_b.branch(j))
                } else {
                    (tree_b.branch(j), tree_a.branch(i))
                };
                let mut path = start_branch;
                path.extend(goal_branch.into_iter().rev());
                dedup(&mut path);
                shortcut(&mut path, checker, cfg.shortcut_iters, &mut rng);
                debug_assert!(path
                    .windows(2)
                    .all(|w| checker.edge_is_free(&w[0], &w[1])));
                return Ok(finish(path, samples));
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    Err(SeqError::PlanningFailed {
        msg: format!("sample budget of {} exhausted", cfg.max_samples),
    })
}
