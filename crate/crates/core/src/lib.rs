//! Urgency-aware scheduling of embodied questions over a symbolic grid world.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`]: grid scenes, visibility and the ground-truth oracle.
//! * [`question`]: questions, scenarios, the rule parser and validation.
//! * [`generator`]: seeded procedural scenarios.
//! * [`pool`]: the question pool, its dependency DAG and priority updater.
//! * [`memory`]: the group memory shared by every question in a scenario.
//! * [`explorer`]: frontier-based targeted exploration.
//! * [`orchestrator`]: the message-driven pipeline and suite runner.
//! * [`metrics`]: accuracy, direct-answer rate, normalized steps and NUWL.

pub mod error;
pub mod explorer;
pub mod generator;
pub mod memory;
pub mod metrics;
pub mod orchestrator;
pub mod pool;
pub mod question;
pub mod scene;

pub use error::*;
pub use explorer::{ExplorerConfig, StepBudget};
pub use generator::{generate_scenario, generate_suite, GeneratorParams};
pub use memory::{GroupMemory, MemoryRecord, SceneMeta};
pub use metrics::{evaluate, Aggregate, LatencyRule, MetricsResult};
pub use orchestrator::{
    replay_decisions, run_scenario, run_suite, verify_trace, Ablation, AnswerRecord, BenchReport,
    EpisodeTrace, Mode, RunConfig,
};
pub use pool::{PoolConfig, PriorityWeights, QuestionPool};
pub use question::{
    parse_question, validate_scenario, Label, ParsedQuestion, ParserRules, Query, QueryKind,
    Question, QuestionId, Scenario, ScopeType,
};
pub use scene::{Cell, GridScene, Heading, Observation, Pose};
