//! Library surface of the `mtrl` binary: experiment configuration and
//! the command implementations, exposed so tests can drive full runs
//! in-process.

pub mod commands;
pub mod config;

pub use commands::{
    build_dataset, build_semantic_scorer, run_eval, run_generate, run_score, run_train, Dataset,
    GeneratedFiles, Split, TrainOutcome,
};
pub use config::{parse_override, ConfigError, ExperimentConfig, ScorerKind};
