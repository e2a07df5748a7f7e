//! Staged tabletop manipulation in a self-contained kinematic world.
//!
//! The crate is organized around one pipeline: a *plan* (ordered
//! region/termination-condition stages) is produced by a text backend,
//! *sequencing* moves the arm to each stage's region with point-cloud
//! motion planning, a *stage check* decides when a stage's termination
//! condition holds, and a *learner* (deterministic actor, twin critics)
//! controls the contact-rich portion in between. The `experiment` module
//! ties those pieces into episodes, training runs, baselines, and
//! ablations.

pub mod arm;
pub mod error;
pub mod experiment;
pub mod geom;
pub mod grip;
pub mod learn;
pub mod plan;
pub mod probe;
pub mod seq;
pub mod sim;
pub mod terminate;

pub use arm::JointConfig;
pub use geom::Vec3;
pub use sim::{Action, Observation, Simulator, StepOutcome, TaskSpec, WorldState};
