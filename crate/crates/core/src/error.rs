use thiserror::Error;

use crate::question::QuestionId;
use crate::scene::Cell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid pose at {0}: not a free in-bounds cell")]
    InvalidPose(Cell),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("noise rate {0} outside [0, 1)")]
    InvalidNoiseRate(f64),
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
    #[error("query must name an attribute")]
    MissingAttribute,
    #[error("query for `{category}` does not reference a unique object ({found} matches)")]
    AmbiguousQuery { category: String, found: usize },
    #[error("question {question}: no option carries the value `{value}`")]
    DatasetInconsistency { question: QuestionId, value: String },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("question {0} must have exactly four options")]
    OptionCount(QuestionId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("unsatisfiable generator parameters: {0}")]
    Unsatisfiable(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("urgency estimate {0} outside [0, 1)")]
    UrgencyDomain(f64),
    #[error("question {0} is already in the pool")]
    Duplicate(QuestionId),
    #[error("edge {from} -> {to} would close a dependency cycle")]
    Cycle { from: QuestionId, to: QuestionId },
    #[error("question {0} is not in the pool")]
    Unknown(QuestionId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric undefined over an empty record set")]
    Undefined,
    #[error("question {0} has max_steps = 0")]
    ZeroBudget(QuestionId),
    #[error("trace corruption: explored question {0} has no start time")]
    MissingStart(QuestionId),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario rejected: {0}")]
    InvalidScenario(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("replay diverged: question {0} was not selectable")]
    ReplayDiverged(QuestionId),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
