//! Average-reward reinforcement learning for semi-Markov decision processes.
//!
//! - [`means`]: batch harmonic and mixed-sign harmonic means, the
//!   ratio-versus-harmonic rate diagnostic and a sign/time dependence search.
//! - [`rate_estimators`]: streaming estimators of the reward rate ρ.
//! - [`agents`]: tabular R-Learning, SMART, Relaxed-SMART and Harmonic
//!   R-Learning agents.
//! - [`envs`]: the two-state SMDP and the minute-bar market backtest.
//! - [`harness`]: sweeps, trials, metrics and result files.

pub mod agents;
pub mod envs;
pub mod harness;
pub mod means;
pub mod rate_estimators;
