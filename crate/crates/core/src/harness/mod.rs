//! Regret experiments: episodes, slope fits, sweeps and verification suites.

pub mod episode;
pub mod experiment;
pub mod slope;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

use crate::environments::EnvError;
use crate::learners::LearnerError;
use crate::policy_eval::EvalError;
use crate::thresholds::ThresholdError;

pub use episode::{optimal_thresholds, run_episode, OraclePolicy, RegretTrace, RoundRecord, ThetaCheckpoint};
pub use experiment::{run_experiment, ExperimentSpec, ExperimentSummary, SweepAxis};
pub use slope::{dyadic_checkpoints, fit_slope, fmt_sig6};
pub use verify::{verify, Suite, VerifyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("unknown suite `{0}` (expected cdf, dominance, optimality, oracle, lipschitz, coverage or all)")]
    UnknownSuite(String),
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}
