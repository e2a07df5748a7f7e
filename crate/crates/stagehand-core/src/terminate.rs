//! Stage-termination checks: decide when the current plan stage is done.
//!
//! Each plan stage names a region and a termination condition ("grasp",
//! "place", ...). While the low-level policy acts, the orchestrator polls
//! [`evaluate_condition`] to learn whether the stage's sub-goal has been
//! achieved so control can hand off to the next stage. Every condition is
//! judged against an [`EntrySnapshot`] taken when the stage began — a grasp
//! must *raise* the object relative to where the stage found it, a turn must
//! *add* a quarter turn to the entry angle — so completed work is never
//! double-counted across stages.
//!
//! Conditions read privileged simulator state (object poses, articulation
//! values, the attachment) rather than rendered views: stage checks play the
//! role of an environment-provided success signal, not a perception problem.
//! The one geometric predicate, [`caging_check`], is shared with the
//! simulator's own grasp logic, which is what makes a true grasp condition
//! coincide with a real attachment.
//!
//! Stage completion is a latch: [`StageGate`] memoizes the first `true` and
//! never re-queries, so a can that wobbles back out of tolerance after the
//! check fired cannot un-finish its stage.

use crate::error::TermError;
use crate::geom::{v3, Vec3};
use crate::grip::GripperGeom;
use crate::sim::{Articulation, Goal, Pose, Simulator};

/// Per-condition scalar thresholds. All must be positive and finite; stages
/// are gated on *reaching* a threshold, so a larger value is always a
/// stricter check. The defaults mirror the task success constants, with the
/// grasp rise deliberately below the lift-success rise so a grasp stage
/// hands off to the next stage before the task itself would count as done.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Object rise since stage entry that completes a grasp (m).
    pub grasp_rise: f64,
    /// Max xy distance from the region centroid that counts as placed (m).
    pub place_radius: f64,
    /// Displacement toward the goal since stage entry that completes a
    /// push (m).
    pub push_dist: f64,
    /// Hinge rotation since stage entry that completes a turn (rad).
    pub turn_angle: f64,
    /// Prismatic travel since stage entry that completes an open or a
    /// close (m).
    pub slide_dist: f64,
    /// Hinge travel since stage entry that completes an open or a close on
    /// a hinged part (rad).
    pub hinge_angle: f64,
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            grasp_rise: 0.03,
            place_radius: 0.03,
            push_dist: 0.10,
            turn_angle: std::f64::consts::FRAC_PI_2,
            slide_dist: 0.08,
            hinge_angle: std::f64::consts::FRAC_PI_4,
        }
    }
}

impl Thresholds {
    /// Reject zero, negative, or non-finite entries.
    pub fn validate(&self) -> Result<(), TermError> {
        let fields = [
            ("grasp_rise", self.grasp_rise),
            ("place_radius", self.place_radius),
            ("push_dist", self.push_dist),
            ("turn_angle", self.turn_angle),
            ("slide_dist", self.slide_dist),
            ("hinge_angle", self.hinge_angle),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(TermError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

/// The tracked object's state at the moment the stage began.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntrySnapshot {
    /// Index of the tracked object in the task's object list.
    pub obj: usize,
    pub pose: Pose,
    pub articulation: f64,
}

/// Everything needed to evaluate one stage's termination condition.
///
/// Built by [`begin_stage`] at stage entry. `snapshot` tracks the object
/// the condition watches: the region object itself for most conditions, or
/// the object held at entry for `place` (the region there names the
/// *destination*). A place stage entered with an empty hand has no snapshot
/// and can only time out.
#[derive(Debug, Clone, PartialEq)]
pub struct StageContext {
    /// Condition name; must be in the termination vocabulary.
    pub condition: String,
    /// Region label from the plan step.
    pub region: String,
    /// Index of the region label in the task's object list.
    pub region_idx: usize,
    /// Entry state of the tracked object, if any object is tracked.
    pub snapshot: Option<EntrySnapshot>,
    pub thresholds: Thresholds,
}

/// Capture a stage's entry context from the live simulator.
pub fn begin_stage(
    sim: &Simulator,
    region: &str,
    condition: &str,
    thresholds: Thresholds,
) -> Result<StageContext, TermError> {
    crate::probe::bump_terminate();
    let cond = Condition::parse(condition)?;
    thresholds.validate()?;
    let region_idx = sim
        .spec
        .object_index(region)
        .ok_or_else(|| TermError::UnknownRegion { label: region.to_string() })?;
    let tracked = match cond {
        Condition::Place => sim.state.attachment.map(|a| a.obj),
        _ => Some(region_idx),
    };
    let snapshot = tracked.map(|obj| EntrySnapshot {
        obj,
        pose: sim.state.poses[obj],
        articulation: sim.state.articulations[obj],
    });
    Ok(StageContext {
        condition: condition.to_string(),
        region: region.to_string(),
        region_idx,
        snapshot,
        thresholds,
    })
}

/// Whether the stage's termination condition holds in the current state.
///
/// - `grasp`: tracked object has risen at least `grasp_rise` since entry
///   *and* the fingers cage it (a toss does not count).
/// - `place`: tracked object's centroid is within `place_radius` (xy) of
///   the region centroid and the hand has let it go.
/// - `push`: tracked object has moved at least `push_dist` from its entry
///   position, projected on the entry-to-goal direction (plain displacement
///   when the task defines no push goal for it).
/// - `turn`: articulation value has increased by at least `turn_angle`.
/// - `open` / `close`: articulation value has increased / decreased by at
///   least `slide_dist` (prismatic) or `hinge_angle` (hinge); always false
///   for rigid objects.
pub fn evaluate_condition(ctx: &StageContext, sim: &Simulator) -> Result<bool, TermError> {
    crate::probe::bump_terminate();
    let cond = Condition::parse(&ctx.condition)?;
    let th = &ctx.thresholds;
    let Some(snap) = ctx.snapshot else {
        return Ok(false);
    };
    let pose = sim.state.poses[snap.obj];
    let articulation = sim.state.articulations[snap.obj];
    Ok(match cond {
        Condition::Grasp => {
            pose.pos.z - snap.pose.pos.z >= th.grasp_rise
                && caging_check(
                    &GripperGeom::from_config(&sim.state.robot),
                    &sim.object_points(snap.obj),
                )
        }
        Condition::Place => {
            sim.centroid_of(snap.obj).dist_xy(sim.centroid_of(ctx.region_idx))
                <= th.place_radius
                && !sim.is_attached(snap.obj)
        }
        Condition::Push => push_displacement(sim, &snap) >= th.push_dist,
        Condition::Turn => articulation - snap.articulation >= th.turn_angle,
        Condition::Open | Condition::Close => {
            let Some(kind) = sim.spec.objects[snap.obj].articulation else {
                return Ok(false);
            };
            let need = match kind {
                Articulation::Prismatic { .. } => th.slide_dist,
                Articulation::Hinge { .. } => th.hinge_angle,
            };
            let delta = articulation - snap.articulation;
            match cond {
                Condition::Open => delta >= need,
                _ => -delta >= need,
            }
        }
    })
}

/// The caging predicate used by grasp checks: the fingers enclose captured
/// material that presses against both plates, with an aperture no wider
/// than the material plus a small margin. Merely hovering around an object,
/// or touching it with one plate, is not a cage. Empty clouds are never
/// caged.
pub fn caging_check(gripper: &GripperGeom, cloud: &[Vec3]) -> bool {
    gripper.caged(cloud)
}

/// A stage's condition plus the completion latch.
///
/// `check` evaluates the condition until it first returns true, then
/// reports true forever without re-querying. This makes stage gating
/// monotone: transient regressions after the hand-off moment (the object
/// settling, the dial relaxing) cannot un-finish a stage.
#[derive(Debug, Clone)]
pub struct StageGate {
    ctx: StageContext,
    fired: bool,
}

impl StageGate {
    pub fn new(ctx: StageContext) -> StageGate {
        StageGate { ctx, fired: false }
    }

    /// Capture the stage entry context and wrap it in a fresh gate.
    pub fn begin(
        sim: &Simulator,
        region: &str,
        condition: &str,
        thresholds: Thresholds,
    ) -> Result<StageGate, TermError> {
        Ok(StageGate::new(begin_stage(sim, region, condition, thresholds)?))
    }

    /// Latched condition value: evaluates only while unfired.
    pub fn check(&mut self, sim: &Simulator) -> Result<bool, TermError> {
        if !self.fired {
            self.fired = evaluate_condition(&self.ctx, sim)?;
        }
        Ok(self.fired)
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    pub fn context(&self) -> &StageContext {
        &self.ctx
    }
}

/// Displacement of the tracked object since stage entry, projected on the
/// entry-to-goal direction when the task defines a push goal for it, else
/// the plain xy displacement.
fn push_displacement(sim: &Simulator, snap: &EntrySnapshot) -> f64 {
    let d = sim.state.poses[snap.obj].pos - snap.pose.pos;
    let goal = sim.spec.goals.iter().find_map(|g| match *g {
        Goal::PushToward { obj, goal, .. } if obj == snap.obj => Some(goal),
        _ => None,
    });
    match goal {
        Some(goal) => {
            let to_goal = sim.centroid_of(goal) - snap.pose.pos;
            if to_goal.norm_xy() < 1e-9 {
                d.norm_xy()
            } else {
                d.dot(v3(to_goal.x, to_goal.y, 0.0).normalized())
            }
        }
        None => d.norm_xy(),
    }
}

/// The termination conditions a plan step may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Condition {
    Grasp,
    Place,
    Push,
    Open,
    Close,
    Turn,
}

impl Condition {
    fn parse(word: &str) -> Result<Condition, TermError> {
        Ok(match word {
            "grasp" => Condition::Grasp,
            "place" => Condition::Place,
            "push" => Condition::Push,
            "open" => Condition::Open,
            "close" => Condition::Close,
            "turn" => Condition::Turn,
            _ => return Err(TermError::VocabularyError { word: word.to_string() }),
        })
    }
}
