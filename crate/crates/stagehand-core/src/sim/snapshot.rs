//! Plain-text scene snapshots.
//!
//! A snapshot is a line-oriented, versioned dump of one world state.
//! Numbers are written with Rust's shortest-roundtrip float formatting, so
//! a parse of a write reproduces the state bit-for-bit.  Object labels may
//! contain spaces and therefore come last on their lines.
//!
//! ```text
//! scene v1
//! task PickPlaceCan
//! seed 7
//! step 42
//! robot <theta1> <theta2> <d_z> <grip>
//! object <x> <y> <z> <yaw> <joint> <label>     (one per object)
//! init <x> <y> <z> <yaw>                       (one per object)
//! attach <index> <rel_x> <rel_y> <rel_z> <span> (only while grasping)
//! ```

use super::types::{Attachment, Pose, TaskSpec, WorldState};
use super::{task_spec, Simulator};
use crate::arm::JointConfig;
use crate::error::SimError;
use crate::geom::v3;

/// A parsed snapshot: the task name, per-object labels as written, and the
/// reconstructed state.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub task: String,
    pub labels: Vec<String>,
    pub state: WorldState,
}

/// Serialize a world state against its task specification.
pub fn write_snapshot(spec: &TaskSpec, state: &WorldState) -> String {
    let mut out = String::new();
    out.push_str("scene v1\n");
    out.push_str(&format!("task {}\n", spec.name));
    out.push_str(&format!("seed {}\n", state.seed));
    out.push_str(&format!("step {}\n", state.step_index));
    let q = &state.robot;
    out.push_str(&format!(
        "robot {:?} {:?} {:?} {:?}\n",
        q.theta1, q.theta2, q.d_z, q.grip
    ));
    for (i, pose) in state.poses.iter().enumerate() {
        out.push_str(&format!(
            "object {:?} {:?} {:?} {:?} {:?} {}\n",
            pose.pos.x,
            pose.pos.y,
            pose.pos.z,
            pose.yaw,
            state.articulations[i],
            spec.objects[i].label
        ));
    }
    for pose in &state.init_poses {
        out.push_str(&format!(
            "init {:?} {:?} {:?} {:?}\n",
            pose.pos.x, pose.pos.y, pose.pos.z, pose.yaw
        ));
    }
    if let Some(a) = state.attachment {
        out.push_str(&format!(
            "attach {} {:?} {:?} {:?} {:?}\n",
            a.obj, a.rel.x, a.rel.y, a.rel.z, a.span
        ));
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> SimError {
    SimError::SnapshotParse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, SimError> {
    tok.parse::<f64>().map_err(|_| err(line, format!("bad number {tok:?}")))
}

/// Parse a snapshot without reference to a task registry.
pub fn parse_snapshot(text: &str) -> Result<SceneFile, SimError> {
    let mut task: Option<String> = None;
    let mut seed: Option<u64> = None;
    let mut step: Option<u64> = None;
    let mut robot: Option<JointConfig> = None;
    let mut labels = Vec::new();
    let mut poses = Vec::new();
    let mut joints = Vec::new();
    let mut inits = Vec::new();
    let mut attachment = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 {
            if trimmed != "scene v1" {
                return Err(err(line, format!("expected 'scene v1', got {trimmed:?}")));
            }
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match toks[0] {
            "task" => {
                task = Some(toks[1..].join(" "));
            }
            "seed" => {
                seed = Some(
                    toks.get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line, "bad seed"))?,
                );
            }
            "step" => {
                step = Some(
                    toks.get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line, "bad step"))?,
                );
            }
            "robot" => {
                if toks.len() != 5 {
                    return Err(err(line, "robot line needs 4 numbers"));
                }
                robot = Some(JointConfig::new(
                    parse_f64(toks[1], line)?,
                    parse_f64(toks[2], line)?,
                    parse_f64(toks[3], line)?,
                    parse_f64(toks[4], line)?,
                ));
            }
            "object" => {
                if toks.len() < 7 {
                    return Err(err(line, "object line needs 5 numbers and a label"));
                }
                poses.push(Pose {
                    pos: v3(
                        parse_f64(toks[1], line)?,
                        parse_f64(toks[2], line)?,
                        parse_f64(toks[3], line)?,
                    ),
                    yaw: parse_f64(toks[4], line)?,
                });
                joints.push(parse_f64(toks[5], line)?);
                labels.push(toks[6..].join(" "));
            }
            "init" => {
                if toks.len() != 5 {
                    return Err(err(line, "init line needs 4 numbers"));
                }
                inits.push(Pose {
                    pos: v3(
                        parse_f64(toks[1], line)?,
                        parse_f64(toks[2], line)?,
                        parse_f64(toks[3], line)?,
                    ),
                    yaw: parse_f64(toks[4], line)?,
                });
            }
            "attach" => {
                if toks.len() != 6 {
                    return Err(err(line, "attach line needs an index and 4 numbers"));
                }
                attachment = Some(Attachment {
                    obj: toks[1].parse().map_err(|_| err(line, "bad attach index"))?,
                    rel: v3(
                        parse_f64(toks[2], line)?,
                        parse_f64(toks[3], line)?,
                        parse_f64(toks[4], line)?,
                    ),
                    span: parse_f64(toks[5], line)?,
                });
            }
            other => return Err(err(line, format!("unknown record {other:?}"))),
        }
    }

    let task = task.ok_or_else(|| err(0, "missing task line"))?;
    if poses.len() != inits.len() {
        return Err(err(0, "object and init line counts differ"));
    }
    if let Some(a) = &attachment {
        if a.obj >= poses.len() {
            return Err(err(0, "attach index out of range"));
        }
    }
    Ok(SceneFile {
        task,
        labels,
        state: WorldState {
            robot: robot.ok_or_else(|| err(0, "missing robot line"))?,
            poses,
            init_poses: inits,
            articulations: joints,
            attachment,
            step_index: step.ok_or_else(|| err(0, "missing step line"))?,
            seed: seed.ok_or_else(|| err(0, "missing seed line"))?,
        },
    })
}

/// Rebuild a full simulator from a snapshot, validating the labels against
/// the registered task.
pub fn load_simulator(text: &str) -> Result<Simulator, SimError> {
    let scene = parse_snapshot(text)?;
    let spec = task_spec(&scene.task)?;
    if scene.labels.len() != spec.objects.len() {
        return Err(err(
            0,
            format!(
                "task {} has {} objects, snapshot has {}",
                scene.task,
                spec.objects.len(),
                scene.labels.len()
            ),
        ));
    }
    for (i, (got, want)) in scene
        .labels
        .iter()
        .zip(spec.objects.iter().map(|o| &o.label))
        .enumerate()
    {
        if got != want {
            return Err(err(
                0,
                format!("object {i} label {got:?} does not match registered {want:?}"),
            ));
        }
    }
    Ok(Simulator::from_parts(spec, scene.state))
}
