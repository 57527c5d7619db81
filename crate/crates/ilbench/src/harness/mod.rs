//! Experimental apparatus: run configuration, the per-algorithm training
//! loops, deterministic evaluation, expert generation, fixed-budget
//! hyperparameter search, profiling, and artifact emission. Everything a run
//! produces is a pure function of (config, seed).

pub mod config;
pub mod profile;
pub mod report;
pub mod search;
pub mod training;

pub use config::RunConfig;
pub use report::RunSeries;
pub use search::{hyperparameter_search, SearchOutcome, TrialRecord};
pub use training::{
    evaluate, generate_expert, ratio_score, run_training, EvalPoint, EvalStats, ExpertOutcome,
    TrainOutcome,
};
