//! Tabular ε-greedy average-reward agents.
//!
//! The four variants share the Q table and action selection and differ only
//! in how ρ is estimated and whether the sojourn scales ρ in the Q update.
//! ρ is only updated after greedy (non-exploratory) actions.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{EnvError, SmdpEnvironment};
use crate::rate_estimators::{
    ArithmeticEmaState, EmaConvention, EstimatorError, EstimatorState, HarmonicEmaState,
    RateSample, RatioEmaState, SampleAverageState,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("state {state} out of range for a {num_states}-state table")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("non-finite value after step {step}: {what}")]
    NonFiniteValue { step: u64, what: &'static str },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    RLearning,
    Smart,
    RelaxedSmart,
    Harmonic,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::RLearning,
        Variant::Smart,
        Variant::RelaxedSmart,
        Variant::Harmonic,
    ];
    /// The variants that account for sojourn times.
    pub const SMDP: [Variant; 3] = [Variant::Smart, Variant::RelaxedSmart, Variant::Harmonic];

    pub fn name(self) -> &'static str {
        match self {
            Variant::RLearning => "r_learning",
            Variant::Smart => "smart",
            Variant::RelaxedSmart => "relaxed_smart",
            Variant::Harmonic => "harmonic",
        }
    }

    pub fn uses_beta(self) -> bool {
        !matches!(self, Variant::Smart)
    }

    fn initial_estimator(self) -> EstimatorState {
        match self {
            Variant::RLearning => EstimatorState::Arithmetic(ArithmeticEmaState::default()),
            Variant::Smart => EstimatorState::SampleAverage(SampleAverageState::default()),
            Variant::RelaxedSmart => EstimatorState::RatioEma(RatioEmaState::default()),
            Variant::Harmonic => EstimatorState::HarmonicEma(HarmonicEmaState::default()),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "r_learning" | "rlearning" => Ok(Variant::RLearning),
            "smart" => Ok(Variant::Smart),
            "relaxed_smart" | "relaxedsmart" => Ok(Variant::RelaxedSmart),
            "harmonic" => Ok(Variant::Harmonic),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: Variant,
    /// Q step size, in (0, 1].
    pub alpha: f64,
    /// ρ step size, in (0, 1). Ignored by SMART.
    pub beta: f64,
    pub epsilon: f64,
    /// Multiplies ε after every step, in (0, 1].
    pub epsilon_decay: f64,
    /// Averaging form used by Relaxed-SMART.
    #[serde(default)]
    pub ema_convention: EmaConvention,
}

impl AgentConfig {
    pub fn new(variant: Variant, alpha: f64, beta: f64, epsilon: f64) -> Self {
        Self {
            variant,
            alpha,
            beta,
            epsilon,
            epsilon_decay: 1.0,
            ema_convention: EmaConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |msg: String| Err(AgentError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} not in (0, 1]", self.alpha));
        }
        if self.variant.uses_beta() && !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta {} not in (0, 1)", self.beta));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} not in [0, 1]", self.epsilon));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad(format!(
                "epsilon_decay {} not in (0, 1]",
                self.epsilon_decay
            ));
        }
        Ok(())
    }
}

/// Dense action values, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        assert!(num_states > 0 && num_actions > 0, "empty Q table");
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Highest-valued action, lowest id on ties.
    pub fn argmax(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-state greedy action.
pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    (0..q.num_states()).map(|s| q.argmax(s)).collect()
}

/// ε-greedy choice. Returns the action and whether it was exploratory.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> (usize, bool) {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        (rng.gen_range(0..q.num_actions()), true)
    } else {
        (q.argmax(state), false)
    }
}

/// One observed decision step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub sojourn: f64,
    pub next_state: usize,
    pub exploratory: bool,
}

/// `Q(s,a) += α·(r − ρ·τ + max Q(s',·) − Q(s,a))`.
pub fn smdp_q_update(q: &mut QTable, t: &Transition, rho: f64, alpha: f64) {
    let old = q.get(t.state, t.action);
    let target = t.reward - rho * t.sojourn + q.max(t.next_state);
    q.set(t.state, t.action, old + alpha * (target - old));
}

/// `Q(s,a) += α·(r − ρ + max Q(s',·) − Q(s,a))`, ignoring the sojourn.
pub fn rlearning_q_update(q: &mut QTable, t: &Transition, rho: f64, alpha: f64) {
    let old = q.get(t.state, t.action);
    let target = t.reward - rho + q.max(t.next_state);
    q.set(t.state, t.action, old + alpha * (target - old));
}

/// `ρ + β·(r + max Q_before(s',·) − max Q_after(s,·) − ρ)`.
pub fn rlearning_rho_update(
    rho: f64,
    q_before: &QTable,
    q_after: &QTable,
    t: &Transition,
    beta: f64,
) -> f64 {
    rlearning_rho_from_maxes(
        rho,
        q_before.max(t.next_state),
        q_after.max(t.state),
        t.reward,
        beta,
    )
}

fn rlearning_rho_from_maxes(
    rho: f64,
    next_before: f64,
    state_after: f64,
    reward: f64,
    beta: f64,
) -> f64 {
    rho + beta * rlearning_delta(rho, next_before, state_after, reward)
}

fn rlearning_delta(rho: f64, next_before: f64, state_after: f64, reward: f64) -> f64 {
    reward + next_before - state_after - rho
}

/// Flat snapshot of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub variant: Variant,
    pub epsilon: f64,
    pub rho: f64,
    pub num_states: usize,
    pub num_actions: usize,
    pub q: Vec<f64>,
    pub estimator: EstimatorState,
}

/// A learning agent: Q table, ρ estimator and exploration schedule.
#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    q: QTable,
    estimator: EstimatorState,
    epsilon: f64,
    steps: u64,
    rho_updates: u64,
}

impl Agent {
    pub fn new(
        cfg: AgentConfig,
        num_states: usize,
        num_actions: usize,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            q: QTable::new(num_states, num_actions),
            estimator: cfg.variant.initial_estimator(),
            epsilon: cfg.epsilon,
            steps: 0,
            rho_updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QTable {
        &mut self.q
    }

    pub fn rho(&self) -> f64 {
        self.estimator.rho()
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rho_updates(&self) -> u64 {
        self.rho_updates
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        greedy_policy(&self.q)
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            variant: self.cfg.variant,
            epsilon: self.epsilon,
            rho: self.rho(),
            num_states: self.q.num_states(),
            num_actions: self.q.num_actions(),
            q: self.q.values().to_vec(),
            estimator: self.estimator,
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> (usize, bool) {
        select_action(&self.q, state, self.epsilon, rng)
    }

    /// Learns from a transition the agent chose itself.
    pub fn learn(&mut self, t: &Transition) -> Result<(), AgentError> {
        for s in [t.state, t.next_state] {
            if s >= self.q.num_states() {
                return Err(AgentError::StateOutOfRange {
                    state: s,
                    num_states: self.q.num_states(),
                });
            }
        }
        let rho = self.rho();
        let alpha = self.cfg.alpha;
        let beta = self.cfg.beta;
        match self.cfg.variant {
            Variant::RLearning => {
                let next_before = self.q.max(t.next_state);
                rlearning_q_update(&mut self.q, t, rho, alpha);
                if !t.exploratory {
                    let delta = rlearning_delta(rho, next_before, self.q.max(t.state), t.reward);
                    if let EstimatorState::Arithmetic(st) = &mut self.estimator {
                        st.update(delta, beta)?;
                    }
                }
            }
            variant => {
                smdp_q_update(&mut self.q, t, rho, alpha);
                if !t.exploratory {
                    let sample = RateSample::new(t.reward, t.sojourn)?;
                    match (&mut self.estimator, variant) {
                        (EstimatorState::SampleAverage(st), Variant::Smart) => {
                            st.update(sample);
                        }
                        (EstimatorState::RatioEma(st), Variant::RelaxedSmart) => {
                            st.update(sample, beta, self.cfg.ema_convention)?;
                        }
                        (EstimatorState::HarmonicEma(st), Variant::Harmonic) => {
                            st.update(sample, beta)?;
                        }
                        _ => unreachable!("estimator matches variant"),
                    }
                }
            }
        }
        if !t.exploratory {
            self.rho_updates += 1;
        }
        self.steps += 1;
        self.epsilon *= self.cfg.epsilon_decay;
        if !self.q.get(t.state, t.action).is_finite() {
            return Err(AgentError::NonFiniteValue {
                step: self.steps,
                what: "q",
            });
        }
        if !self.rho().is_finite() {
            return Err(AgentError::NonFiniteValue {
                step: self.steps,
                what: "rho",
            });
        }
        Ok(())
    }

    /// Selects an action, steps the environment and learns from the result.
    pub fn step<E, R>(&mut self, env: &mut E, rng: &mut R) -> Result<Transition, AgentError>
    where
        E: SmdpEnvironment + ?Sized,
        R: Rng + ?Sized,
    {
        let state = env.current_state();
        let (action, exploratory) = self.select(state, rng);
        let obs = env.step(action)?;
        let t = Transition {
            state,
            action,
            reward: obs.reward,
            sojourn: obs.sojourn,
            next_state: obs.next_state,
            exploratory,
        };
        self.learn(&t)?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{TwoStateConfig, TwoStateEnv};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[&[f64]]) -> QTable {
        let mut q = QTable::new(rows.len(), rows[0].len());
        for (s, row) in rows.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                q.set(s, a, v);
            }
        }
        q
    }

    fn tr(reward: f64, sojourn: f64) -> Transition {
        Transition {
            state: 0,
            action: 0,
            reward,
            sojourn,
            next_state: 1,
            exploratory: false,
        }
    }

    #[test]
    fn greedy_selection_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            select_action(&table(&[&[1.0, 3.0]]), 0, 0.0, &mut rng),
            (1, false)
        );
        assert_eq!(
            select_action(&table(&[&[2.0, 2.0]]), 0, 0.0, &mut rng),
            (0, false)
        );
        for _ in 0..50 {
            assert!(select_action(&table(&[&[2.0, 2.0]]), 0, 1.0, &mut rng).1);
        }
    }

    #[test]
    fn exploration_rate_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = QTable::new(1, 4);
        let n = 20_000;
        let explored = (0..n)
            .filter(|_| select_action(&q, 0, 0.2, &mut rng).1)
            .count();
        let frac = explored as f64 / n as f64;
        assert!((frac - 0.2).abs() < 0.015, "{frac}");
    }

    #[test]
    fn greedy_policy_examples() {
        assert_eq!(greedy_policy(&QTable::new(3, 2)), vec![0, 0, 0]);
        assert_eq!(
            greedy_policy(&table(&[&[0.0, 0.0], &[0.0, 5.0]])),
            vec![0, 1]
        );
        assert_eq!(greedy_policy(&table(&[&[5.0, 5.0 - 1e-15]])), vec![0]);
    }

    #[test]
    fn smdp_q_update_examples() {
        let mut q = QTable::new(2, 2);
        smdp_q_update(&mut q, &tr(1.0, 1.0), 0.0, 1.0);
        assert_eq!(q.get(0, 0), 1.0);
        assert_eq!(q.values().iter().filter(|&&v| v != 0.0).count(), 1);

        let mut q = QTable::new(2, 2);
        smdp_q_update(&mut q, &tr(2.0, 2.0), 1.0, 0.37);
        assert_eq!(q, QTable::new(2, 2));
    }

    #[test]
    fn rlearning_rho_examples() {
        let z = QTable::new(2, 2);
        assert!((rlearning_rho_update(0.0, &z, &z, &tr(1.0, 1.0), 0.1) - 0.1).abs() < 1e-15);
        assert_eq!(rlearning_rho_update(0.7, &z, &z, &tr(0.7, 1.0), 0.1), 0.7);
        let before = table(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let after = table(&[&[3.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(
            rlearning_rho_update(0.0, &before, &after, &tr(2.0, 1.0), 0.5),
            0.0
        );
    }

    #[test]
    fn exploratory_steps_leave_rho() {
        for variant in Variant::ALL {
            let mut agent = Agent::new(AgentConfig::new(variant, 0.1, 0.1, 0.0), 2, 2).unwrap();
            agent.learn(&tr(3.0, 2.0)).unwrap();
            let rho = agent.rho();
            let mut t = tr(50.0, 0.5);
            t.exploratory = true;
            agent.learn(&t).unwrap();
            assert_eq!(agent.rho(), rho, "{variant}");
            assert_eq!(agent.rho_updates(), 1);
            assert_eq!(agent.steps(), 2);
        }
    }

    #[test]
    fn s2_greedy_step_feeds_zero_reward_unit_sojourn() {
        let mut env = TwoStateEnv::new(TwoStateConfig::standard(0.001)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = Agent::new(AgentConfig::new(Variant::Smart, 0.1, 0.1, 0.0), 2, 2).unwrap();
        agent.step(&mut env, &mut rng).unwrap();
        let before = *agent.estimator();
        let t = agent.step(&mut env, &mut rng).unwrap();
        assert_eq!(
            (t.state, t.reward, t.sojourn, t.exploratory),
            (1, 0.0, 1.0, false)
        );
        let (EstimatorState::SampleAverage(b), EstimatorState::SampleAverage(a)) =
            (before, *agent.estimator())
        else {
            panic!("wrong estimator");
        };
        assert_eq!(a.total_reward, b.total_reward);
        assert_eq!(a.total_time, b.total_time + 1.0);
    }

    #[test]
    fn epsilon_decays_per_step() {
        let mut cfg = AgentConfig::new(Variant::Harmonic, 0.1, 0.1, 0.2);
        cfg.epsilon_decay = 0.5;
        let mut agent = Agent::new(cfg, 2, 2).unwrap();
        agent.learn(&tr(1.0, 1.0)).unwrap();
        agent.learn(&tr(1.0, 1.0)).unwrap();
        assert_eq!(agent.epsilon(), 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::new(Variant::Smart, 0.0, 0.1, 0.2)
            .validate()
            .is_err());
        assert!(AgentConfig::new(Variant::Harmonic, 0.1, 1.0, 0.2)
            .validate()
            .is_err());
        assert!(AgentConfig::new(Variant::Smart, 0.1, 1.0, 0.2)
            .validate()
            .is_ok());
        assert!(AgentConfig::new(Variant::Smart, 0.1, 0.1, 1.5)
            .validate()
            .is_err());
        assert_eq!(
            "relaxed-smart".parse::<Variant>().unwrap(),
            Variant::RelaxedSmart
        );
    }

    #[test]
    fn rejects_out_of_range_state() {
        let mut agent = Agent::new(AgentConfig::new(Variant::Smart, 0.1, 0.1, 0.0), 2, 2).unwrap();
        let mut t = tr(1.0, 1.0);
        t.next_state = 5;
        assert!(matches!(
            agent.learn(&t),
            Err(AgentError::StateOutOfRange { .. })
        ));
    }
}
