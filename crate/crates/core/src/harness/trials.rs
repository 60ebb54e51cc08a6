//! Single trials: one agent, one environment, one seed.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::records::{derive_seed, downsample, Experiment, RunRecord};
use super::{MarketConfig, SweepConfig};
use crate::agents::{Agent, AgentConfig, AgentError, Variant};
use crate::envs::{DurationMode, MarketEnv, MarketSegment, SmdpEnvironment, TwoStateEnv};
use crate::rate_estimators::EmaConvention;

/// One point of the two-state grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateTrial {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub log_scale: f64,
    pub seed: u64,
}

impl TwoStateTrial {
    /// Seed key shared by every variant and β at this (α, log_scale), so
    /// that variants are compared on common random numbers.
    pub fn seed_key(&self) -> String {
        format!("two_state|a={:e}|v={:e}", self.alpha, self.log_scale)
    }
}

/// One (segment, window, duration mode, β, variant, seed) backtest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketTrial {
    pub variant: Variant,
    pub beta: f64,
    pub segment: usize,
    pub window_size: usize,
    pub duration_mode: DurationMode,
    pub seed: u64,
}

impl MarketTrial {
    pub fn seed_key(&self) -> String {
        format!(
            "market|seg={}|k={}|mode={:?}",
            self.segment, self.window_size, self.duration_mode
        )
    }
}

fn agent_config(
    variant: Variant,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    decay: f64,
    relaxed: EmaConvention,
) -> AgentConfig {
    let mut cfg = AgentConfig::new(variant, alpha, beta, epsilon);
    cfg.epsilon_decay = decay;
    cfg.ema_convention = relaxed;
    cfg
}

struct Progress {
    accumulated: f64,
    onpolicy_steps: u64,
    trace: Vec<f64>,
}

impl Progress {
    fn new() -> Self {
        Self {
            accumulated: 0.0,
            onpolicy_steps: 0,
            trace: Vec::new(),
        }
    }

    fn step<E: SmdpEnvironment, R: rand::Rng>(
        &mut self,
        agent: &mut Agent,
        env: &mut E,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        let t = agent.step(env, rng)?;
        if !t.exploratory {
            self.accumulated += t.reward;
            self.onpolicy_steps += 1;
        }
        self.trace.push(self.accumulated);
        Ok(())
    }
}

fn blank_record(
    experiment: Experiment,
    variant: Variant,
    alpha: f64,
    beta: f64,
    seed: u64,
    derived: u64,
) -> RunRecord {
    RunRecord {
        experiment,
        variant,
        alpha,
        beta,
        log_scale: None,
        segment: None,
        window_size: None,
        duration_mode: None,
        seed,
        derived_seed: derived,
        redundant: false,
        failed: false,
        error: None,
        success: None,
        final_greedy_policy: Vec::new(),
        final_rho: f64::NAN,
        final_accumulated_reward: f64::NAN,
        steps: 0,
        onpolicy_steps: 0,
        rho_updates: 0,
        accumulated_onpolicy_reward_trace: Vec::new(),
        wall_time_secs: 0.0,
    }
}

fn finish(
    rec: &mut RunRecord,
    agent: &Agent,
    progress: Progress,
    trace_points: usize,
    outcome: Result<(), AgentError>,
) {
    rec.final_greedy_policy = agent.greedy_policy();
    rec.final_rho = agent.rho();
    rec.final_accumulated_reward = progress.accumulated;
    rec.steps = agent.steps();
    rec.onpolicy_steps = progress.onpolicy_steps;
    rec.rho_updates = agent.rho_updates();
    rec.accumulated_onpolicy_reward_trace = downsample(&progress.trace, trace_points);
    if let Err(e) = outcome {
        rec.failed = true;
        rec.error = Some(e.to_string());
    }
}

/// Runs `episodes × steps_per_episode` decisions at `s₁` in the two-state
/// SMDP. The environment is reset between episodes; Q and ρ carry over.
/// A failed trial is recorded, not propagated, and counts as unsuccessful.
pub fn run_two_state_trial(cfg: &SweepConfig, trial: TwoStateTrial) -> RunRecord {
    let start = Instant::now();
    let derived = derive_seed(cfg.master_seed, &trial.seed_key(), trial.seed);
    let mut rec = blank_record(
        Experiment::TwoState,
        trial.variant,
        trial.alpha,
        trial.beta,
        trial.seed,
        derived,
    );
    rec.log_scale = Some(trial.log_scale);

    let acfg = agent_config(
        trial.variant,
        trial.alpha,
        trial.beta,
        cfg.epsilon,
        cfg.epsilon_decay,
        cfg.relaxed_convention,
    );
    let mut agent = match Agent::new(acfg, 2, 2) {
        Ok(a) => a,
        Err(e) => {
            rec.failed = true;
            rec.error = Some(e.to_string());
            rec.success = Some(false);
            return rec;
        }
    };
    let mut env = match TwoStateEnv::new(cfg.env_config(trial.log_scale)) {
        Ok(env) => env,
        Err(e) => {
            rec.failed = true;
            rec.error = Some(e.to_string());
            rec.success = Some(false);
            return rec;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derived);
    let mut progress = Progress::new();

    let outcome = (|| {
        for _ in 0..cfg.episodes {
            env.reset_episode();
            let mut decisions = 0;
            while decisions < cfg.steps_per_episode {
                if env.current_state() == TwoStateEnv::S1 {
                    decisions += 1;
                }
                progress.step(&mut agent, &mut env, &mut rng)?;
            }
            // Complete the return to `s₁` so every episode is whole cycles.
            if env.current_state() == TwoStateEnv::S2 {
                progress.step(&mut agent, &mut env, &mut rng)?;
            }
        }
        Ok(())
    })();
    let failed = outcome.is_err();
    finish(&mut rec, &agent, progress, cfg.trace_points, outcome);
    rec.success =
        Some(!failed && rec.final_greedy_policy[TwoStateEnv::S1] == TwoStateEnv::ACTION_B);
    rec.wall_time_secs = start.elapsed().as_secs_f64();
    rec
}

/// One pass over a market segment, learning online from every bar.
pub fn run_market_trial(
    cfg: &MarketConfig,
    segment: &MarketSegment,
    trial: MarketTrial,
) -> RunRecord {
    let start = Instant::now();
    let derived = derive_seed(cfg.master_seed, &trial.seed_key(), trial.seed);
    let mut rec = blank_record(
        Experiment::Market,
        trial.variant,
        cfg.alpha,
        trial.beta,
        trial.seed,
        derived,
    );
    rec.segment = Some(trial.segment);
    rec.window_size = Some(trial.window_size);
    rec.duration_mode = Some(trial.duration_mode);

    let btc = cfg.btc_config(trial.window_size, trial.duration_mode);
    let setup = (|| {
        let agent = Agent::new(
            agent_config(
                trial.variant,
                cfg.alpha,
                trial.beta,
                cfg.epsilon,
                cfg.epsilon_decay,
                cfg.relaxed_convention,
            ),
            btc.num_states(),
            2,
        )?;
        // The environment stream drives durations only; the agent's stream
        // is separate so both are shared across variants.
        let env = MarketEnv::new(segment, btc, derive_seed(derived, "env", 0))
            .map_err(AgentError::from)?;
        Ok::<_, AgentError>((agent, env))
    })();
    let (mut agent, mut env) = match setup {
        Ok(pair) => pair,
        Err(e) => {
            rec.failed = true;
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derived);
    let mut progress = Progress::new();
    let outcome = (|| {
        while !env.is_done() {
            progress.step(&mut agent, &mut env, &mut rng)?;
        }
        Ok(())
    })();
    finish(&mut rec, &agent, progress, cfg.trace_points, outcome);
    rec.wall_time_secs = start.elapsed().as_secs_f64();
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Bar;

    fn small_sweep() -> SweepConfig {
        SweepConfig {
            episodes: 2,
            steps_per_episode: 50,
            trace_points: 10,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn two_state_trial_counts_decisions() {
        let cfg = small_sweep();
        let trial = TwoStateTrial {
            variant: Variant::Harmonic,
            alpha: 0.01,
            beta: 0.01,
            log_scale: 1e-3,
            seed: 0,
        };
        let rec = run_two_state_trial(&cfg, trial);
        assert!(!rec.failed, "{:?}", rec.error);
        assert_eq!(rec.steps, 2 * 2 * 50);
        assert!(rec.success.is_some());
        assert!(rec.accumulated_onpolicy_reward_trace.len() <= 10);
        assert_eq!(rec.final_greedy_policy.len(), 2);
        let again = run_two_state_trial(&cfg, trial);
        assert_eq!(rec.without_timing(), again.without_timing());
    }

    #[test]
    fn two_state_failure_is_recorded() {
        let mut cfg = small_sweep();
        cfg.steps_per_episode = 5000;
        cfg.episodes = 1;
        let rec = run_two_state_trial(
            &cfg,
            TwoStateTrial {
                variant: Variant::Smart,
                alpha: 0.1,
                beta: 0.1,
                log_scale: 1.0,
                seed: 0,
            },
        );
        assert!(rec.failed);
        assert_eq!(rec.success, Some(false));
        assert!(rec.error.is_some());
    }

    #[test]
    fn market_trial_single_pass() {
        let bars: Vec<Bar> = (0..200)
            .map(|i| Bar {
                timestamp: 60 * i,
                open: 100.0,
                close: 100.0 + if i % 3 == 0 { 1.0 } else { -0.5 },
            })
            .collect();
        let seg = MarketSegment::new(bars);
        let cfg = MarketConfig {
            trace_points: 20,
            ..MarketConfig::default()
        };
        let trial = MarketTrial {
            variant: Variant::RelaxedSmart,
            beta: 0.05,
            segment: 0,
            window_size: 3,
            duration_mode: DurationMode::Scaled,
            seed: 1,
        };
        let rec = run_market_trial(&cfg, &seg, trial);
        assert!(!rec.failed, "{:?}", rec.error);
        assert_eq!(rec.steps, 197);
        assert!(rec.onpolicy_steps <= rec.steps);
        assert_eq!(rec.final_greedy_policy.len(), 8);
        assert!(rec.accumulated_onpolicy_reward_trace.len() <= 20);
        assert_eq!(
            *rec.accumulated_onpolicy_reward_trace.last().unwrap(),
            rec.final_accumulated_reward
        );
    }
}
