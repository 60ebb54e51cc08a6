//! Batch means over reward rates.
//!
//! [`harmonic_mean`] is the classical harmonic mean and is only defined on
//! same-sign data. [`mixed_sign_harmonic_mean`] splits the input by sign and
//! combines the harmonic means of the positive and negative parts, with
//! zeros contributing null mass, so it is defined on any nonempty input.
//!
//! Within each sign partition the reciprocals are summed after sorting by
//! magnitude, which makes every function here invariant to input order down
//! to the last bit.

use thiserror::Error;

/// Default absolute tolerance for the equivalence flags.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest number of time events the witness search will enumerate.
pub const MAX_TIME_EVENTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeansError {
    #[error("input is empty")]
    EmptyInput,
    #[error("harmonic mean needs strictly same-sign nonzero values (offending value {0})")]
    SignViolation(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("value outside the domain at index {index}: {reason}")]
    DomainViolation { index: usize, reason: &'static str },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("{0} time events exceeds the search limit of {MAX_TIME_EVENTS}")]
    TooManyEvents(usize),
}

pub type Result<T> = std::result::Result<T, MeansError>;

/// Sign class of a datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignClass {
    Positive,
    Negative,
    Zero,
}

impl SignClass {
    /// Search order used by the witness search.
    pub const ALL: [SignClass; 3] = [SignClass::Positive, SignClass::Negative, SignClass::Zero];

    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            SignClass::Positive
        } else if x < 0.0 {
            SignClass::Negative
        } else {
            SignClass::Zero
        }
    }

    fn index(self) -> usize {
        match self {
            SignClass::Positive => 0,
            SignClass::Negative => 1,
            SignClass::Zero => 2,
        }
    }
}

/// Sizes of the sign partitions of a multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartitionCounts {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl PartitionCounts {
    pub fn of(values: &[f64]) -> Self {
        let mut counts = PartitionCounts::default();
        for &x in values {
            match SignClass::of(x) {
                SignClass::Positive => counts.positive += 1,
                SignClass::Negative => counts.negative += 1,
                SignClass::Zero => counts.zero += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative + self.zero
    }
}

/// Harmonic mean of a nonempty same-sign partition, summing reciprocals in
/// ascending magnitude order.
fn partition_harmonic(mut part: Vec<f64>) -> f64 {
    debug_assert!(!part.is_empty());
    part.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let first = part[0];
    if part.iter().all(|&x| x == first) {
        return first;
    }
    let reciprocal_sum: f64 = part.iter().map(|&x| 1.0 / x).sum();
    part.len() as f64 / reciprocal_sum
}

/// Classical harmonic mean `n / Σ 1/x`.
///
/// All values must be nonzero and share one sign. Mixed-sign data is
/// rejected even though the formula would evaluate: it is not a mean there
/// (for `(-20, 40)` it gives `-80`).
pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    let first = *values.first().ok_or(MeansError::EmptyInput)?;
    let class = SignClass::of(first);
    if class == SignClass::Zero {
        return Err(MeansError::SignViolation(first));
    }
    if let Some(&bad) = values.iter().find(|&&x| SignClass::of(x) != class) {
        return Err(MeansError::SignViolation(bad));
    }
    Ok(partition_harmonic(values.to_vec()))
}

/// Mixed-sign harmonic mean.
///
/// `(|X⁺|·H(X⁺) + |X⁻|·H(X⁻)) / |X|` where empty partitions contribute zero
/// and zeros only add to the denominator.
pub fn mixed_sign_harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(MeansError::EmptyInput);
    }
    let (positive, rest): (Vec<f64>, Vec<f64>) = values.iter().partition(|&&x| x > 0.0);
    let negative: Vec<f64> = rest.into_iter().filter(|&x| x < 0.0).collect();
    let n = values.len();

    let weighted = |part: Vec<f64>| -> (usize, f64) {
        let len = part.len();
        if len == 0 {
            (0, 0.0)
        } else {
            (len, partition_harmonic(part))
        }
    };
    let (n_pos, h_pos) = weighted(positive);
    let (n_neg, h_neg) = weighted(negative);

    // Single-sign input reduces to the classical mean exactly.
    if n_pos == n {
        return Ok(h_pos);
    }
    if n_neg == n {
        return Ok(h_neg);
    }
    Ok((n_pos as f64 * h_pos + n_neg as f64 * h_neg) / n as f64)
}

fn arithmetic_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean-based covariance `A(xy) − A(x)·A(y)`, without Bessel correction.
pub fn covariance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MeansError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(MeansError::EmptyInput);
    }
    let products: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    Ok(arithmetic_mean(&products) - arithmetic_mean(x) * arithmetic_mean(y))
}

/// Positionally coupled rewards and sojourn times.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    rewards: Vec<f64>,
    sojourns: Vec<f64>,
}

impl PairedSeries {
    pub fn new(rewards: Vec<f64>, sojourns: Vec<f64>) -> Result<Self> {
        if rewards.len() != sojourns.len() {
            return Err(MeansError::LengthMismatch {
                left: rewards.len(),
                right: sojourns.len(),
            });
        }
        if rewards.is_empty() {
            return Err(MeansError::EmptyInput);
        }
        if let Some(index) = sojourns.iter().position(|&t| !(t > 0.0)) {
            return Err(MeansError::DomainViolation {
                index,
                reason: "sojourn must be strictly positive",
            });
        }
        Ok(Self { rewards, sojourns })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn sojourns(&self) -> &[f64] {
        &self.sojourns
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Ratio-of-averages versus harmonic rate on one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEquivalence {
    /// `A(r) / A(τ)`.
    pub ratio_of_means: f64,
    /// `1 / A(τ/r)`.
    pub harmonic_rate: f64,
    /// `Cov(r, τ/r)`.
    pub covariance: f64,
    /// `|Q − H| ≤ tol`.
    pub equal: bool,
    /// `|cov| ≤ tol`; agrees with `equal` whenever the identity holds.
    pub uncorrelated: bool,
}

impl RateEquivalence {
    /// `A(r) / (A(τ) − Cov(r, τ/r))`, the algebraic route to the harmonic rate.
    pub fn identity_rate(series: &PairedSeries) -> Result<f64> {
        let reciprocal: Vec<f64> = series
            .rewards
            .iter()
            .zip(&series.sojourns)
            .map(|(r, t)| t / r)
            .collect();
        let cov = covariance(&series.rewards, &reciprocal)?;
        Ok(arithmetic_mean(&series.rewards) / (arithmetic_mean(&series.sojourns) - cov))
    }
}

/// Compares the ratio of average reward to average sojourn against the
/// harmonic mean of per-step rates. The two agree exactly when the rewards
/// are uncorrelated with the reciprocal rates `τ/r`.
pub fn rate_equivalence_report(series: &PairedSeries, tol: f64) -> Result<RateEquivalence> {
    if let Some(index) = series.rewards.iter().position(|&r| !(r > 0.0)) {
        return Err(MeansError::DomainViolation {
            index,
            reason: "reward must be strictly positive",
        });
    }
    let reciprocal: Vec<f64> = series
        .rewards
        .iter()
        .zip(&series.sojourns)
        .map(|(r, t)| t / r)
        .collect();
    let ratio_of_means = arithmetic_mean(&series.rewards) / arithmetic_mean(&series.sojourns);
    let harmonic_rate = 1.0 / arithmetic_mean(&reciprocal);
    let cov = covariance(&series.rewards, &reciprocal)?;
    Ok(RateEquivalence {
        ratio_of_means,
        harmonic_rate,
        covariance: cov,
        equal: (ratio_of_means - harmonic_rate).abs() <= tol,
        uncorrelated: cov.abs() <= tol,
    })
}

/// Joint law of the reward sign class and a finite time variable.
///
/// Row `κ` holds `P(Z = κ, T = b)` for each time event `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    rows: [Vec<f64>; 3],
}

impl DiscreteJoint {
    /// Rows are ordered positive, negative, zero.
    pub fn new(positive: Vec<f64>, negative: Vec<f64>, zero: Vec<f64>) -> Result<Self> {
        let m = positive.len();
        if negative.len() != m || zero.len() != m {
            return Err(MeansError::InvalidDistribution(
                "rows must have equal length".into(),
            ));
        }
        if m == 0 {
            return Err(MeansError::InvalidDistribution("no time events".into()));
        }
        let rows = [positive, negative, zero];
        let mut total = 0.0;
        for p in rows.iter().flatten() {
            if !(0.0..=1.0).contains(p) {
                return Err(MeansError::InvalidDistribution(format!(
                    "entry {p} outside [0, 1]"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeansError::InvalidDistribution(format!(
                "total mass {total} != 1"
            )));
        }
        Ok(Self { rows })
    }

    pub fn num_events(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, class: SignClass, event: usize) -> f64 {
        self.rows[class.index()][event]
    }

    pub fn class_marginal(&self, class: SignClass) -> f64 {
        self.rows[class.index()].iter().sum()
    }

    pub fn event_marginal(&self, event: usize) -> f64 {
        self.rows.iter().map(|row| row[event]).sum()
    }
}

/// An event pair `(Z = κ, T ∈ B)` whose probabilities do not factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceWitness {
    pub class: SignClass,
    /// Time events in `B`, ascending.
    pub events: Vec<usize>,
    /// `P(A_κ ∩ B) − P(A_κ)·P(B)`.
    pub gap: f64,
}

/// Exhaustive search for a sign class and time-event subset that are
/// dependent under `joint`.
///
/// Classes are tried in the order positive, negative, zero and subsets in
/// ascending bitmask order; the first pair whose gap exceeds `tol` wins.
/// Returns `None` exactly when the sign class is independent of time.
pub fn partition_dependence_witness(
    joint: &DiscreteJoint,
    tol: f64,
) -> Result<Option<DependenceWitness>> {
    let m = joint.num_events();
    if m > MAX_TIME_EVENTS {
        return Err(MeansError::TooManyEvents(m));
    }
    let event_marginals: Vec<f64> = (0..m).map(|b| joint.event_marginal(b)).collect();
    for class in SignClass::ALL {
        let p_class = joint.class_marginal(class);
        for mask in 1u32..(1u32 << m) {
            let mut p_joint = 0.0;
            let mut p_events = 0.0;
            for (b, p_event) in event_marginals.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    p_joint += joint.get(class, b);
                    p_events += p_event;
                }
            }
            let gap = p_joint - p_class * p_events;
            if gap.abs() > tol {
                let events = (0..m).filter(|b| mask & (1 << b) != 0).collect();
                return Ok(Some(DependenceWitness { class, events, gap }));
            }
        }
    }
    Ok(None)
}
