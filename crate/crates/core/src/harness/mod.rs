//! Experiment harness: configs, trials, metrics, sweeps and result files.

mod config;
mod prove;
mod records;
mod sweep;
mod synthetic;
mod trials;

use thiserror::Error;

use crate::agents::AgentError;
use crate::envs::EnvError;

pub use config::{log_grid, GridSpec, MarketConfig, RunConfig, SweepConfig};
pub use prove::{prove_means, PropertyCheck};
pub use records::{
    derive_seed, downsample, emit_results, mean_std, read_results_csv, success_rate, win_ratio,
    AggregateResult, Experiment, OutputFormat, RunRecord, CSV_COLUMNS,
};
pub use sweep::{
    aggregate_market, aggregate_two_state, prepare_segments, run_market_sweep, run_two_state_sweep,
    success_curve, write_outputs, Manifest, SuccessPoint, SweepOutput,
};
pub use synthetic::{synthetic_bars, SyntheticMarket};
pub use trials::{run_market_trial, run_two_state_trial, MarketTrial, TwoStateTrial};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid grid range [{lo}, {hi}] with {n} points")]
    InvalidRange { lo: f64, hi: f64, n: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("compared groups cover different segments")]
    SegmentMismatch,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}
