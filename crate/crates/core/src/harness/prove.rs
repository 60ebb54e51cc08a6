//! Randomized property suite for the mixed-sign harmonic mean.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::means::{harmonic_mean, mixed_sign_harmonic_mean};

/// Outcome of one property over many random cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest violation seen, 0 when none.
    pub worst: f64,
    /// The worst failing input, if any.
    pub counterexample: Option<String>,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            violations: 0,
            worst: 0.0,
            counterexample: None,
        }
    }

    fn record(&mut self, excess: f64, input: impl FnOnce() -> String) {
        self.cases += 1;
        if excess > 0.0 || excess.is_nan() {
            self.violations += 1;
            if self.counterexample.is_none() || excess > self.worst {
                self.counterexample = Some(input());
            }
            self.worst = self.worst.max(excess);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Tolerance used by every check.
pub const PROPERTY_TOLERANCE: f64 = 1e-12;

/// Sizes 1 to 20, entries uniform in [-100, 100] with exact zeros at 10%.
pub fn random_multiset<R: Rng>(rng: &mut R) -> Vec<f64> {
    let n = rng.gen_range(1..=20);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(-100.0..=100.0)
            }
        })
        .collect()
}

fn h(x: &[f64]) -> f64 {
    mixed_sign_harmonic_mean(x).expect("nonempty finite input")
}

/// Internality, idempotence, symmetry and monotonicity on `cases` random
/// multisets each, plus two informational checks: monotonicity restricted
/// to increments that keep the sign of the entry, and agreement with the
/// classical harmonic mean on single-sign inputs.
pub fn prove_means(seed: u64, cases: usize) -> Vec<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = PROPERTY_TOLERANCE;
    let mut internality = PropertyCheck::new("internality");
    let mut idempotence = PropertyCheck::new("idempotence");
    let mut symmetry = PropertyCheck::new("symmetry");
    let mut monotonicity = PropertyCheck::new("monotonicity");
    let mut sign_monotonicity = PropertyCheck::new("monotonicity (sign-preserving increments)");
    let mut generalization = PropertyCheck::new("generalization (single-sign inputs)");

    for _ in 0..cases {
        let x = random_multiset(&mut rng);
        let hx = h(&x);

        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        internality.record(((lo - tol) - hx).max(hx - (hi + tol)), || format!("{x:?}"));

        let c = x[rng.gen_range(0..x.len())];
        let reps = vec![c; rng.gen_range(1..=10)];
        let hc = h(&reps);
        idempotence.record(
            if hc == c {
                0.0
            } else {
                (hc - c).abs().max(f64::MIN_POSITIVE)
            },
            || format!("{reps:?}"),
        );

        let mut shuffled = x.clone();
        shuffled.shuffle(&mut rng);
        let hs = h(&shuffled);
        symmetry.record(
            if hs.to_bits() == hx.to_bits() {
                0.0
            } else {
                (hs - hx).abs().max(f64::MIN_POSITIVE)
            },
            || format!("{x:?} vs {shuffled:?}"),
        );

        let i = rng.gen_range(0..x.len());
        let k = rng.gen_range(f64::EPSILON..=100.0);
        let mut bumped = x.clone();
        bumped[i] += k;
        let hb = h(&bumped);
        let drop = (hx - tol) - hb;
        monotonicity.record(drop, || format!("{x:?} -> {bumped:?}: {hx} -> {hb}"));
        if x[i] != 0.0 && (x[i] > 0.0) == (bumped[i] > 0.0) {
            sign_monotonicity.record(drop, || format!("{x:?} -> {bumped:?}"));
        }

        let single: Vec<f64> = x.iter().map(|v| v.abs().max(1e-3)).collect();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let single: Vec<f64> = single.iter().map(|v| sign * v).collect();
        let classical = harmonic_mean(&single).expect("single-sign input");
        generalization.record((h(&single) - classical).abs() - tol, || {
            format!("{single:?}")
        });
    }
    vec![
        internality,
        idempotence,
        symmetry,
        monotonicity,
        sign_monotonicity,
        generalization,
    ]
}
