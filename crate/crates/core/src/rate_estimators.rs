//! Streaming estimators of the average reward rate ρ.
//!
//! Each estimator consumes one [`RateSample`] per on-policy step and reports
//! the new ρ. All of them report 0 before the first sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("sojourn must be strictly positive and finite, got {0}")]
    InvalidSojourn(f64),
    #[error("smoothing factor must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("averaged sojourn is not positive ({0})")]
    DegenerateDenominator(f64),
}

/// One decision step's lump-sum reward and holding time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub reward: f64,
    pub sojourn: f64,
}

impl RateSample {
    pub fn new(reward: f64, sojourn: f64) -> Result<Self, EstimatorError> {
        if !(sojourn > 0.0) || !sojourn.is_finite() {
            return Err(EstimatorError::InvalidSojourn(sojourn));
        }
        Ok(Self { reward, sojourn })
    }

    /// Reciprocal rate `τ/r`, defined as 0 for an exact zero reward.
    pub fn reciprocal_rate(&self) -> f64 {
        if self.reward == 0.0 {
            0.0
        } else {
            self.sojourn / self.reward
        }
    }
}

fn check_beta(beta: f64) -> Result<(), EstimatorError> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::InvalidBeta(beta))
    }
}

/// Cumulative reward over cumulative time (SMART).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleAverageState {
    pub total_reward: f64,
    pub total_time: f64,
}

impl SampleAverageState {
    pub fn update(&mut self, sample: RateSample) -> f64 {
        self.total_reward += sample.reward;
        self.total_time += sample.sojourn;
        self.rho()
    }

    pub fn rho(&self) -> f64 {
        if self.total_time > 0.0 {
            self.total_reward / self.total_time
        } else {
            0.0
        }
    }
}

/// How a twin-EMA update weights the newest sample.
///
/// `Innovation` matches the step-size role β plays in every other ρ
/// estimator; `HistoryWeight` is the classical smoothing form, under which
/// β values near 0 make the estimate track only the latest sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmaConvention {
    /// `x ← x + β·(new − x)`: β is the step size on the innovation.
    #[default]
    Innovation,
    /// `x ← β·x + (1 − β)·new`: β is the weight on history.
    HistoryWeight,
}

impl EmaConvention {
    fn blend(self, old: f64, new: f64, beta: f64) -> f64 {
        match self {
            EmaConvention::HistoryWeight => beta * old + (1.0 - beta) * new,
            EmaConvention::Innovation => old + beta * (new - old),
        }
    }
}

/// Ratio of exponential moving averages (Relaxed-SMART).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioEmaState {
    pub ema_reward: f64,
    pub ema_sojourn: f64,
    pub initialized: bool,
}

impl RatioEmaState {
    /// The first sample seeds both averages.
    pub fn update(
        &mut self,
        sample: RateSample,
        beta: f64,
        convention: EmaConvention,
    ) -> Result<f64, EstimatorError> {
        check_beta(beta)?;
        if self.initialized {
            self.ema_reward = convention.blend(self.ema_reward, sample.reward, beta);
            self.ema_sojourn = convention.blend(self.ema_sojourn, sample.sojourn, beta);
        } else {
            self.ema_reward = sample.reward;
            self.ema_sojourn = sample.sojourn;
            self.initialized = true;
        }
        if !(self.ema_sojourn > 0.0) {
            return Err(EstimatorError::DegenerateDenominator(self.ema_sojourn));
        }
        Ok(self.rho())
    }

    pub fn rho(&self) -> f64 {
        if self.initialized && self.ema_sojourn > 0.0 {
            self.ema_reward / self.ema_sojourn
        } else {
            0.0
        }
    }
}

/// Exponentially moving mixed-sign harmonic mean of per-step rates.
///
/// `p` and `n` average the reciprocal rates `τ/r` of the positive and
/// negative steps (with zeros for the other steps), and `w_p`, `w_n`, `w_z`
/// average the sign indicators. Inverting `p/w_p` gives the moving harmonic
/// mean of the positive rates, likewise for the negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEmaState {
    pub p: f64,
    pub n: f64,
    pub w_p: f64,
    pub w_n: f64,
    pub w_z: f64,
}

impl HarmonicEmaState {
    pub fn update(&mut self, sample: RateSample, beta: f64) -> Result<f64, EstimatorError> {
        check_beta(beta)?;
        let r = sample.reciprocal_rate();
        let (pos, neg, zero) = (r > 0.0, r < 0.0, r == 0.0);
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        self.p += beta * (ind(pos) * r - self.p);
        self.n += beta * (ind(neg) * r - self.n);
        self.w_p += beta * (ind(pos) - self.w_p);
        self.w_n += beta * (ind(neg) - self.w_n);
        self.w_z += beta * (ind(zero) - self.w_z);
        Ok(self.rho())
    }

    /// Moving harmonic mean of the positive rates.
    pub fn positive_mean(&self) -> f64 {
        if self.p == 0.0 {
            0.0
        } else {
            self.w_p / self.p
        }
    }

    /// Moving harmonic mean of the negative rates.
    pub fn negative_mean(&self) -> f64 {
        if self.n == 0.0 {
            0.0
        } else {
            self.w_n / self.n
        }
    }

    pub fn rho(&self) -> f64 {
        let total = self.w_p + self.w_n + self.w_z;
        if total == 0.0 {
            return 0.0;
        }
        (self.w_p * self.positive_mean() + self.w_n * self.negative_mean()) / total
    }
}

/// Scalar ρ driven by an externally computed correction (R-Learning).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArithmeticEmaState {
    pub rho: f64,
}

impl ArithmeticEmaState {
    pub fn update(&mut self, delta: f64, beta: f64) -> Result<f64, EstimatorError> {
        check_beta(beta)?;
        self.rho += beta * delta;
        Ok(self.rho)
    }
}

/// Variant-tagged estimator state, one per agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorState {
    Arithmetic(ArithmeticEmaState),
    SampleAverage(SampleAverageState),
    RatioEma(RatioEmaState),
    HarmonicEma(HarmonicEmaState),
}

impl EstimatorState {
    pub fn rho(&self) -> f64 {
        match self {
            EstimatorState::Arithmetic(s) => s.rho,
            EstimatorState::SampleAverage(s) => s.rho(),
            EstimatorState::RatioEma(s) => s.rho(),
            EstimatorState::HarmonicEma(s) => s.rho(),
        }
    }
}
