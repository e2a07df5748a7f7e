//! Error types for each pipeline area.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("task `{task}` is not registered")]
    NotRegistered { task: String },
    #[error("malformed scene snapshot at line {line}: {msg}")]
    SnapshotParse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid prompt field: {msg}")]
    Validation { msg: String },
    #[error("no parsable plan list in backend reply: {msg}")]
    ParseError { msg: String },
    #[error("every plan step was filtered out (unknown regions or conditions)")]
    EmptyPlanError,
    #[error("backend unreachable after {attempts} attempts: {msg}")]
    BackendUnavailable { attempts: u32, msg: String },
    #[error("backend rejected credentials: {msg}")]
    AuthError { msg: String },
    #[error("backend reply was not a chat completion: {msg}")]
    MalformedReply { msg: String },
    #[error("no plan fixture registered for task `{task}`")]
    NoFixture { task: String },
}

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("no pixels labeled `{label}` in any view")]
    MaskNotFound { label: String },
    #[error("point cloud empty after preprocessing")]
    EmptyCloudError,
    #[error("target ({x:.4}, {y:.4}, {z:.4}) outside the reachable set")]
    Unreachable { x: f64, y: f64, z: f64 },
    #[error("goal configuration in collision and no free configuration within {radius} joint-space distance")]
    GoalInCollision { radius: f64 },
    #[error("motion planning failed: {msg}")]
    PlanningFailed { msg: String },
    #[error("malformed cloud file at line {line}: {msg}")]
    CloudParse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum TermError {
    #[error("`{word}` is not a termination condition")]
    VocabularyError { word: String },
    #[error("region `{label}` names no object in this scene")]
    UnknownRegion { label: String },
    #[error("threshold `{name}` must be a positive number (got {value})")]
    InvalidThreshold { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("replay buffer holds {have} transitions, need {need} to sample")]
    NotReady { have: usize, need: usize },
    #[error("observation has {got} features, the policy expects {want}")]
    ShapeError { got: usize, want: usize },
    #[error("learner config `{name}` is out of range (got {value})")]
    InvalidConfig { name: &'static str, value: f64 },
    #[error("malformed checkpoint at line {line}: {msg}")]
    CheckpointParse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("results io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {msg}")]
    Config { msg: String },
}
