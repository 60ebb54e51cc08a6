//! Run configuration files.
//!
//! Configs are TOML with optional `[two_state]` and `[market]` tables.
//! Every field has a default, so an empty file is a valid config.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::Variant;
use crate::envs::{ArmConfig, BtcConfig, DurationMode, TwoStateConfig};
use crate::rate_estimators::EmaConvention;

/// `n` geometrically spaced points from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, HarnessError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(HarnessError::InvalidRange { lo, hi, n });
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / last).exp())
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    Ok(grid)
}

/// A log-spaced grid given by its range, or an explicit list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range { lo: f64, hi: f64, n: usize },
    Values(Vec<f64>),
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Vec<f64>, HarnessError> {
        let values = match self {
            GridSpec::Range { lo, hi, n } => log_grid(*lo, *hi, *n)?,
            GridSpec::Values(v) => v.clone(),
        };
        if values.is_empty() {
            return Err(HarnessError::Config("grid is empty".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HarnessError::Config(format!(
                "grid must be strictly increasing: {values:?}"
            )));
        }
        Ok(values)
    }
}

fn default_alpha_grid() -> GridSpec {
    GridSpec::Range {
        lo: 1e-4,
        hi: 0.1,
        n: 20,
    }
}

fn default_beta_grid() -> GridSpec {
    GridSpec::Range {
        lo: 1e-4,
        hi: 0.1,
        n: 20,
    }
}

fn default_log_scale_grid() -> GridSpec {
    GridSpec::Range {
        lo: 1e-5,
        hi: 0.1,
        n: 30,
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_smdp_variants() -> Vec<Variant> {
    Variant::SMDP.to_vec()
}

/// Two-state sweep over (α, β, log_scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub master_seed: u64,
    pub alpha_grid: GridSpec,
    pub beta_grid: GridSpec,
    pub log_scale_grid: GridSpec,
    pub episodes: usize,
    /// Decisions at `s₁` per episode; each is followed by the return step.
    pub steps_per_episode: usize,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub relaxed_convention: EmaConvention,
    pub slope: f64,
    pub mu: f64,
    pub sigma: f64,
    pub floor: f64,
    pub offset: f64,
    pub generator_seed: u64,
    /// Replaces arm A entirely; the log_scale grid then only labels runs.
    pub arm_a: Option<ArmConfig>,
    /// Replaces arm B entirely.
    pub arm_b: Option<ArmConfig>,
    pub trace_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            alpha_grid: default_alpha_grid(),
            beta_grid: default_beta_grid(),
            log_scale_grid: default_log_scale_grid(),
            episodes: 4,
            steps_per_episode: 1000,
            epsilon: 0.2,
            epsilon_decay: 1.0,
            seeds: default_seeds(),
            variants: default_smdp_variants(),
            relaxed_convention: EmaConvention::Innovation,
            slope: TwoStateConfig::SLOPE,
            mu: 1.0,
            sigma: 0.1,
            floor: 0.001,
            offset: TwoStateConfig::OFFSET,
            generator_seed: 0,
            arm_a: None,
            arm_b: None,
            trace_points: 1000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let alphas = self.alpha_grid.resolve()?;
        let betas = self.beta_grid.resolve()?;
        let scales = self.log_scale_grid.resolve()?;
        if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(HarnessError::Config("alpha grid must lie in (0, 1]".into()));
        }
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(HarnessError::Config("beta grid must lie in (0, 1)".into()));
        }
        if scales.iter().any(|&v| !(v > 0.0)) {
            return Err(HarnessError::Config(
                "log_scale grid must be positive".into(),
            ));
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(HarnessError::Config(
                "episodes and steps must be positive".into(),
            ));
        }
        if self.seeds.is_empty() || self.variants.is_empty() {
            return Err(HarnessError::Config(
                "seeds and variants must be nonempty".into(),
            ));
        }
        if self.trace_points < 2 {
            return Err(HarnessError::Config(
                "trace_points must be at least 2".into(),
            ));
        }
        for arm in self.arm_a.iter().chain(&self.arm_b) {
            arm.validate()?;
        }
        Ok(())
    }

    pub fn env_config(&self, log_scale: f64) -> TwoStateConfig {
        let mut cfg = TwoStateConfig::with_params(
            self.slope,
            self.mu,
            self.sigma,
            self.floor,
            self.offset,
            log_scale,
        );
        cfg.generator_seed = self.generator_seed;
        if let Some(arm) = self.arm_a {
            cfg.arm_a = arm;
        }
        if let Some(arm) = self.arm_b {
            cfg.arm_b = arm;
        }
        cfg
    }
}

/// Market backtest over segments, window sizes, β values and duration modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub master_seed: u64,
    pub window_sizes: Vec<usize>,
    pub betas: Vec<f64>,
    pub duration_modes: Vec<DurationMode>,
    pub duration_bounds: (f64, f64),
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub alpha: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub relaxed_convention: EmaConvention,
    /// Bars per segment when splitting the input file.
    pub segment_len: usize,
    /// Use at most this many segments (0 means all).
    pub max_segments: usize,
    /// Truncate every segment to this many bars (0 means no truncation).
    pub truncate: usize,
    pub trace_points: usize,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            window_sizes: vec![3, 6, 9, 12],
            betas: vec![0.01, 0.05, 0.1],
            duration_modes: vec![DurationMode::Random, DurationMode::Scaled],
            duration_bounds: (5.0, 45.0),
            seeds: (0..30).collect(),
            variants: default_smdp_variants(),
            alpha: 0.001,
            epsilon: 0.2,
            epsilon_decay: 0.999,
            relaxed_convention: EmaConvention::Innovation,
            segment_len: crate::envs::MarketSegment::MAX_LEN,
            max_segments: 0,
            truncate: 0,
            trace_points: 10_000,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.window_sizes.is_empty()
            || self.betas.is_empty()
            || self.duration_modes.is_empty()
            || self.seeds.is_empty()
            || self.variants.is_empty()
        {
            return Err(HarnessError::Config("market grids must be nonempty".into()));
        }
        for &k in &self.window_sizes {
            self.btc_config(k, DurationMode::Random).validate()?;
        }
        if self.betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(HarnessError::Config("betas must lie in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(HarnessError::Config("alpha must lie in (0, 1]".into()));
        }
        if self.segment_len == 0 {
            return Err(HarnessError::Config("segment_len must be positive".into()));
        }
        if self.trace_points < 2 {
            return Err(HarnessError::Config(
                "trace_points must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn btc_config(&self, window_size: usize, duration_mode: DurationMode) -> BtcConfig {
        BtcConfig {
            window_size,
            duration_mode,
            duration_bounds: self.duration_bounds,
        }
    }
}

/// Top-level config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub two_state: Option<SweepConfig>,
    pub market: Option<MarketConfig>,
    /// Bar file for `sweep`; `backtest` takes it on the command line.
    pub data: Option<std::path::PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(s) = &cfg.two_state {
            s.validate()?;
        }
        if let Some(m) = &cfg.market {
            m.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<(Self, String), HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::parse(&text)?, text))
    }
}
