//! SMDP environments behind one step interface: the two-state synthetic
//! benchmark and a minute-bar market backtest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("non-finite {what} at generator step {t}")]
    NonFiniteValue { what: &'static str, t: u64 },
    #[error("non-positive sojourn {value} at generator step {t}")]
    InvalidSojourn { value: f64, t: u64 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("action {action} out of range for {num_actions} actions")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("segment exhausted at bar {0}")]
    EndOfSegment(usize),
    #[error("need {needed} completed bars for the state window, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("row {row}: timestamp {timestamp} does not follow {previous} by 60 s")]
    NonMonotonicTimestamps {
        row: usize,
        previous: i64,
        timestamp: i64,
    },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One transition: where the process went, what it paid, how long it took.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdpObservation {
    pub next_state: usize,
    pub reward: f64,
    pub sojourn: f64,
}

pub trait SmdpEnvironment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn current_state(&self) -> usize;
    /// Applies `action` in the current state and advances.
    fn step(&mut self, action: usize) -> Result<SmdpObservation, EnvError>;
    /// Whether the environment can take another step.
    fn is_done(&self) -> bool {
        false
    }
}

/// `(sin t + offset) · 10^(t · log_scale)`.
pub fn sin_log_d(t: f64, offset: f64, log_scale: f64) -> f64 {
    (t.sin() + offset) * 10f64.powf(t * log_scale)
}

/// `(cos t + offset) · 10^(t · log_scale)`.
pub fn cos_log_d(t: f64, offset: f64, log_scale: f64) -> f64 {
    (t.cos() + offset) * 10f64.powf(t * log_scale)
}

/// A reward or duration generator indexed by the per-episode step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Constant { value: f64 },
    Linear { slope: f64 },
    NormalDuration { mu: f64, sigma: f64, floor: f64 },
    SinLogD { offset: f64, log_scale: f64 },
    CosLogD { offset: f64, log_scale: f64 },
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        match *self {
            GeneratorConfig::NormalDuration { sigma, floor, .. } => {
                if !(floor > 0.0) {
                    return Err(EnvError::InvalidConfig(format!(
                        "floor {floor} must be > 0"
                    )));
                }
                if !(sigma >= 0.0) {
                    return Err(EnvError::InvalidConfig(format!(
                        "sigma {sigma} must be >= 0"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, t: u64, rng: &mut R) -> f64 {
        let tf = t as f64;
        match *self {
            GeneratorConfig::Constant { value } => value,
            GeneratorConfig::Linear { slope } => slope * tf,
            GeneratorConfig::NormalDuration { mu, sigma, floor } => {
                let draw = if sigma == 0.0 {
                    mu
                } else {
                    Normal::new(mu, sigma).expect("validated sigma").sample(rng)
                };
                draw.max(floor)
            }
            GeneratorConfig::SinLogD { offset, log_scale } => sin_log_d(tf, offset, log_scale),
            GeneratorConfig::CosLogD { offset, log_scale } => cos_log_d(tf, offset, log_scale),
        }
    }
}

/// Reward and sojourn generators for one action out of `s₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub reward: GeneratorConfig,
    pub sojourn: GeneratorConfig,
}

impl ArmConfig {
    /// Also rejects sojourn generators that are nonpositive at `t = 0`.
    pub fn validate(&self) -> Result<(), EnvError> {
        self.reward.validate()?;
        self.sojourn.validate()?;
        match self.sojourn {
            GeneratorConfig::Constant { value } if !(value > 0.0) => Err(EnvError::InvalidConfig(
                format!("constant sojourn {value} must be > 0"),
            )),
            GeneratorConfig::Linear { .. } => Err(EnvError::InvalidConfig(
                "a linear sojourn is zero at t = 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateConfig {
    pub arm_a: ArmConfig,
    pub arm_b: ArmConfig,
    /// Seed for the stochastic generators; reused at every episode start.
    pub generator_seed: u64,
}

impl TwoStateConfig {
    pub const SLOPE: f64 = 0.05;
    pub const OFFSET: f64 = 10.0;

    /// Linear/Normal arm A against SinLogD/CosLogD arm B with baseline `v`.
    pub fn standard(log_scale: f64) -> Self {
        Self::with_params(Self::SLOPE, 1.0, 0.1, 0.001, Self::OFFSET, log_scale)
    }

    pub fn with_params(slope: f64, mu: f64, sigma: f64, floor: f64, offset: f64, v: f64) -> Self {
        Self {
            arm_a: ArmConfig {
                reward: GeneratorConfig::Linear { slope },
                sojourn: GeneratorConfig::NormalDuration { mu, sigma, floor },
            },
            arm_b: ArmConfig {
                reward: GeneratorConfig::SinLogD {
                    offset,
                    log_scale: v,
                },
                sojourn: GeneratorConfig::CosLogD {
                    offset,
                    log_scale: v / 2.0,
                },
            },
            generator_seed: 0,
        }
    }
}

/// The continuing two-state SMDP.
///
/// From `s₁` (state 0) both actions lead to `s₂` (state 1) with the arm's
/// generated reward and sojourn; from `s₂` the process returns to `s₁` with
/// reward 0 and sojourn 1 whatever the action. `t` counts `s₁` decisions in
/// the current episode.
#[derive(Debug, Clone)]
pub struct TwoStateEnv {
    cfg: TwoStateConfig,
    current: usize,
    t: u64,
    rng: ChaCha8Rng,
}

impl TwoStateEnv {
    pub const S1: usize = 0;
    pub const S2: usize = 1;
    pub const ACTION_A: usize = 0;
    pub const ACTION_B: usize = 1;

    pub fn new(cfg: TwoStateConfig) -> Result<Self, EnvError> {
        cfg.arm_a.validate()?;
        cfg.arm_b.validate()?;
        Ok(Self {
            cfg,
            current: Self::S1,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.generator_seed),
        })
    }

    /// Back to `s₁` with `t = 0` and the generators reseeded.
    pub fn reset_episode(&mut self) {
        self.current = Self::S1;
        self.t = 0;
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.generator_seed);
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &TwoStateConfig {
        &self.cfg
    }
}

impl SmdpEnvironment for TwoStateEnv {
    fn num_states(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn current_state(&self) -> usize {
        self.current
    }

    fn step(&mut self, action: usize) -> Result<SmdpObservation, EnvError> {
        if action >= 2 {
            return Err(EnvError::InvalidAction {
                action,
                num_actions: 2,
            });
        }
        if self.current == Self::S2 {
            self.current = Self::S1;
            return Ok(SmdpObservation {
                next_state: Self::S1,
                reward: 0.0,
                sojourn: 1.0,
            });
        }
        let arm = if action == Self::ACTION_A {
            self.cfg.arm_a
        } else {
            self.cfg.arm_b
        };
        let t = self.t;
        let reward = arm.reward.sample(t, &mut self.rng);
        let sojourn = arm.sojourn.sample(t, &mut self.rng);
        if !reward.is_finite() {
            return Err(EnvError::NonFiniteValue { what: "reward", t });
        }
        if !sojourn.is_finite() {
            return Err(EnvError::NonFiniteValue { what: "sojourn", t });
        }
        if !(sojourn > 0.0) {
            return Err(EnvError::InvalidSojourn { value: sojourn, t });
        }
        self.t += 1;
        self.current = Self::S2;
        Ok(SmdpObservation {
            next_state: Self::S2,
            reward,
            sojourn,
        })
    }
}

/// One minute bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub timestamp: i64,
    pub open: f64,
    pub close: f64,
}

impl Bar {
    pub fn movement(&self) -> f64 {
        self.close - self.open
    }
}

/// A gapless run of consecutive minute bars.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSegment {
    bars: Vec<Bar>,
    min_move: f64,
    max_move: f64,
}

impl MarketSegment {
    pub const MAX_LEN: usize = 350_000;
    pub const GAP_TOLERANCE: f64 = 1e-9;

    /// Builds a segment from bars already known to be gapless.
    pub fn new(bars: Vec<Bar>) -> Self {
        let (min_move, max_move) = bars.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), b| {
            let m = b.movement().abs();
            (lo.min(m), hi.max(m))
        });
        let min_move = if bars.is_empty() { 0.0 } else { min_move };
        Self {
            bars,
            min_move,
            max_move,
        }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Segment-wide extremes of `|close − open|`.
    pub fn move_range(&self) -> (f64, f64) {
        (self.min_move, self.max_move)
    }

    /// Min-max normalised `|close − open|` of one bar, 0 on a flat segment.
    pub fn normalized_move(&self, index: usize) -> f64 {
        let span = self.max_move - self.min_move;
        if span > 0.0 {
            (self.bars[index].movement().abs() - self.min_move) / span
        } else {
            0.0
        }
    }

    /// Mirror image around `pivot`: every price `p` becomes `2·pivot − p`.
    pub fn mirrored(&self, pivot: f64) -> Self {
        Self::new(
            self.bars
                .iter()
                .map(|b| Bar {
                    timestamp: b.timestamp,
                    open: 2.0 * pivot - b.open,
                    close: 2.0 * pivot - b.close,
                })
                .collect(),
        )
    }
}

/// Result of reading a bar file.
#[derive(Debug, Clone)]
pub struct LoadedSegments {
    pub segments: Vec<MarketSegment>,
    /// Opens overwritten to restore gaplessness.
    pub repairs: usize,
}

/// Overwrites each open that differs from the previous close by more than
/// the tolerance. Returns the number of repairs.
pub fn repair_gaps(bars: &mut [Bar]) -> usize {
    let mut repairs = 0;
    for i in 1..bars.len() {
        let prev_close = bars[i - 1].close;
        if (bars[i].open - prev_close).abs() > MarketSegment::GAP_TOLERANCE {
            bars[i].open = prev_close;
            repairs += 1;
        }
    }
    repairs
}

/// Splits repaired bars into consecutive chunks of at most `chunk` bars.
pub fn split_segments(bars: Vec<Bar>, chunk: usize) -> Vec<MarketSegment> {
    bars.chunks(chunk.max(1))
        .map(|c| MarketSegment::new(c.to_vec()))
        .collect()
}

/// Parses bars from CSV with a header naming at least `timestamp`, `open`
/// and `close`. Timestamps must advance by exactly 60 s.
pub fn read_bars<R: std::io::Read>(reader: R) -> Result<Vec<Bar>, EnvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(EnvError::MissingColumn(name))
    };
    let (ts_col, open_col, close_col) = (col("timestamp")?, col("open")?, col("close")?);

    let mut bars = Vec::new();
    let mut previous: Option<i64> = None;
    for (i, record) in rdr.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record?;
        let field = |idx: usize, name: &str| -> Result<&str, EnvError> {
            record.get(idx).ok_or_else(|| EnvError::MalformedRow {
                row,
                msg: format!("missing {name}"),
            })
        };
        let ts_raw = field(ts_col, "timestamp")?;
        let timestamp: i64 = ts_raw
            .parse()
            .or_else(|_| ts_raw.parse::<f64>().map(|f| f as i64))
            .map_err(|_| EnvError::MalformedRow {
                row,
                msg: format!("bad timestamp `{ts_raw}`"),
            })?;
        let price = |idx: usize, name: &str| -> Result<f64, EnvError> {
            let raw = field(idx, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(EnvError::MalformedRow {
                    row,
                    msg: format!("bad {name} `{raw}`"),
                }),
            }
        };
        let open = price(open_col, "open")?;
        let close = price(close_col, "close")?;
        if let Some(prev) = previous {
            if timestamp != prev + 60 {
                return Err(EnvError::NonMonotonicTimestamps {
                    row,
                    previous: prev,
                    timestamp,
                });
            }
        }
        previous = Some(timestamp);
        bars.push(Bar {
            timestamp,
            open,
            close,
        });
    }
    Ok(bars)
}

/// Reads a bar file, repairs gaps and splits it into segments of
/// [`MarketSegment::MAX_LEN`] bars.
pub fn load_segments(path: impl AsRef<Path>) -> Result<LoadedSegments, EnvError> {
    let file = std::fs::File::open(path)?;
    let mut bars = read_bars(std::io::BufReader::new(file))?;
    let repairs = repair_gaps(&mut bars);
    Ok(LoadedSegments {
        segments: split_segments(bars, MarketSegment::MAX_LEN),
        repairs,
    })
}

/// Up/down pattern of the `k` bars completed before `index`, most recent bar
/// in the lowest bit. Flat bars count as down.
pub fn btc_state(segment: &MarketSegment, index: usize, k: usize) -> Result<usize, EnvError> {
    if index < k {
        return Err(EnvError::InsufficientHistory {
            needed: k,
            have: index,
        });
    }
    if index > segment.len() {
        return Err(EnvError::EndOfSegment(index));
    }
    let bars = segment.bars();
    Ok((0..k).fold(0usize, |state, lag| {
        let up = bars[index - 1 - lag].movement() > 0.0;
        state | (usize::from(up) << lag)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    /// Uniform on the duration bounds, independent of the bar.
    Random,
    /// Min-max scaled by the bar's move magnitude.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtcConfig {
    pub window_size: usize,
    pub duration_mode: DurationMode,
    /// Sojourn bounds in seconds.
    pub duration_bounds: (f64, f64),
}

impl Default for BtcConfig {
    fn default() -> Self {
        Self {
            window_size: 3,
            duration_mode: DurationMode::Random,
            duration_bounds: (5.0, 45.0),
        }
    }
}

impl BtcConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let (lo, hi) = self.duration_bounds;
        if self.window_size == 0 || self.window_size > 24 {
            return Err(EnvError::InvalidConfig(format!(
                "window_size {} must be in 1..=24",
                self.window_size
            )));
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(EnvError::InvalidConfig(format!(
                "duration bounds ({lo}, {hi}) must be positive and ordered"
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        1 << self.window_size
    }
}

/// Price reached `sojourn` seconds into a bar, interpolating open to close.
pub fn executed_price(bar: &Bar, sojourn: f64) -> f64 {
    bar.open + (sojourn / 60.0) * bar.movement()
}

/// Reward for trading `bar` with the given action after `sojourn` seconds.
pub fn trade_reward(bar: &Bar, action: usize, sojourn: f64) -> f64 {
    let gain = bar.close - executed_price(bar, sojourn);
    if action == MarketEnv::BUY {
        gain
    } else {
        -gain
    }
}

/// Sojourn for one bar under `cfg`.
pub fn bar_sojourn<R: Rng>(
    segment: &MarketSegment,
    index: usize,
    cfg: &BtcConfig,
    rng: &mut R,
) -> f64 {
    let (lo, hi) = cfg.duration_bounds;
    match cfg.duration_mode {
        DurationMode::Random => rng.gen_range(lo..=hi),
        DurationMode::Scaled => lo + (hi - lo) * segment.normalized_move(index),
    }
}

/// One buy-or-sell decision per bar over a single pass of a segment.
#[derive(Debug, Clone)]
pub struct MarketEnv<'a> {
    segment: &'a MarketSegment,
    cfg: BtcConfig,
    index: usize,
    rng: ChaCha8Rng,
}

impl<'a> MarketEnv<'a> {
    pub const BUY: usize = 0;
    pub const SELL: usize = 1;

    /// Starts at the first bar with a full state window behind it.
    pub fn new(segment: &'a MarketSegment, cfg: BtcConfig, seed: u64) -> Result<Self, EnvError> {
        cfg.validate()?;
        if segment.len() <= cfg.window_size {
            return Err(EnvError::InsufficientHistory {
                needed: cfg.window_size + 1,
                have: segment.len(),
            });
        }
        Ok(Self {
            segment,
            cfg,
            index: cfg.window_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn segment(&self) -> &MarketSegment {
        self.segment
    }
}

impl SmdpEnvironment for MarketEnv<'_> {
    fn num_states(&self) -> usize {
        self.cfg.num_states()
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn current_state(&self) -> usize {
        btc_state(self.segment, self.index, self.cfg.window_size)
            .expect("index kept within the window")
    }

    fn step(&mut self, action: usize) -> Result<SmdpObservation, EnvError> {
        if action >= 2 {
            return Err(EnvError::InvalidAction {
                action,
                num_actions: 2,
            });
        }
        if self.index >= self.segment.len() {
            return Err(EnvError::EndOfSegment(self.index));
        }
        let bar = self.segment.bars()[self.index];
        let sojourn = bar_sojourn(self.segment, self.index, &self.cfg, &mut self.rng);
        let reward = trade_reward(&bar, action, sojourn);
        self.index += 1;
        let next_state = btc_state(self.segment, self.index, self.cfg.window_size)?;
        Ok(SmdpObservation {
            next_state,
            reward,
            sojourn,
        })
    }

    fn is_done(&self) -> bool {
        self.index >= self.segment.len()
    }
}
