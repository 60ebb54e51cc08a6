//! Seeded synthetic minute bars for tests and offline runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::envs::Bar;

/// Heavy-tailed random walk with volatility regimes. Returns are a
/// martingale by default; `momentum` adds lag-one autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMarket {
    pub start_price: f64,
    pub start_timestamp: i64,
    /// Per-bar relative volatility in the calm regime.
    pub volatility: f64,
    /// Volatility multiplier in the turbulent regime.
    pub turbulence: f64,
    /// Per-bar probability of switching regime.
    pub switch_prob: f64,
    /// Lag-one autocorrelation of returns.
    pub momentum: f64,
    /// Student-t degrees of freedom of the innovations.
    pub tail_dof: f64,
}

impl Default for SyntheticMarket {
    fn default() -> Self {
        Self {
            start_price: 30_000.0,
            start_timestamp: 1_600_000_020,
            volatility: 5e-4,
            turbulence: 3.0,
            switch_prob: 1e-3,
            momentum: 0.0,
            tail_dof: 3.0,
        }
    }
}

impl SyntheticMarket {
    /// `n` consecutive one-minute bars; each opens at the previous close.
    pub fn generate(&self, n: usize, seed: u64) -> Vec<Bar> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = StudentT::new(self.tail_dof).expect("positive degrees of freedom");
        let scale = if self.tail_dof > 2.0 {
            ((self.tail_dof - 2.0) / self.tail_dof).sqrt()
        } else {
            1.0
        };
        let mut price = self.start_price;
        let mut turbulent = false;
        let mut last = 0.0;
        let mut bars = Vec::with_capacity(n);
        for i in 0..n {
            if rng.gen::<f64>() < self.switch_prob {
                turbulent = !turbulent;
            }
            let vol = self.volatility * if turbulent { self.turbulence } else { 1.0 };
            let shock = (t.sample(&mut rng) * scale).clamp(-20.0, 20.0) * vol;
            let ret = self.momentum * last + shock;
            last = ret;
            let open = price;
            let close = (open * ret.exp()).max(f64::MIN_POSITIVE);
            bars.push(Bar {
                timestamp: self.start_timestamp + 60 * i as i64,
                open,
                close,
            });
            price = close;
        }
        bars
    }
}

/// Shorthand for [`SyntheticMarket::generate`] with default parameters.
pub fn synthetic_bars(n: usize, seed: u64) -> Vec<Bar> {
    SyntheticMarket::default().generate(n, seed)
}
