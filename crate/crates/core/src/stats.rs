//! Binomial estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub k: u64,
}

impl Estimate {
    /// `k` successes in `n` trials. With `n = 0` the rate is 0 and the interval is [0, 1].
    pub fn wilson(k: u64, n: u64) -> Self {
        if n == 0 {
            return Estimate { rate: 0.0, ci_low: 0.0, ci_high: 1.0, n, k };
        }
        let nf = n as f64;
        let p = k as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Estimate { rate: p, ci_low: (centre - half).max(0.0).min(p), ci_high: (centre + half).min(1.0).max(p), n, k }
    }

    /// Binomial standard error of the rate.
    pub fn sigma(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.rate * (1.0 - self.rate) / self.n as f64).sqrt()
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_interval() {
        // 10 of 100: Wilson interval [0.0552, 0.1744].
        let e = Estimate::wilson(10, 100);
        assert!((e.ci_low - 0.05522).abs() < 1e-4);
        assert!((e.ci_high - 0.17437).abs() < 1e-4);
    }

    #[test]
    fn edges() {
        let e = Estimate::wilson(0, 50);
        assert_eq!(e.ci_low, 0.0);
        assert!(e.ci_high > 0.0);
        let e = Estimate::wilson(50, 50);
        assert_eq!(e.ci_high, 1.0);
        assert!(e.ci_low < 1.0);
    }
}
