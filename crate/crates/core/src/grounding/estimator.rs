//! Online estimates of the ground-truth prior from completed levels, for
//! settings where the prior is not given. Disabled by default.

use serde::Serialize;

use crate::env::icy_track::IceRate;

use super::belief::FruitPrior;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FruitFrequency {
    pub apples: u64,
    pub total: u64,
}

impl FruitFrequency {
    pub fn observe(&mut self, apple: bool) {
        self.apples += apple as u64;
        self.total += 1;
    }

    /// Laplace-smoothed apple frequency.
    pub fn estimate(&self) -> FruitPrior {
        FruitPrior {
            apple_prob: (self.apples as f64 + 1.0) / (self.total as f64 + 2.0),
        }
    }
}

/// Method-of-moments Beta fit to per-level ice fractions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IceRateMoments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl IceRateMoments {
    pub fn observe(&mut self, fraction: f64) {
        self.n += 1;
        self.sum += fraction;
        self.sum_sq += fraction * fraction;
    }

    /// `None` until the sample variance is positive and below `m(1−m)`.
    pub fn estimate(&self) -> Option<IceRate> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        let var = (self.sum_sq - n * m * m) / (n - 1.0);
        if !(var > 0.0 && var < m * (1.0 - m)) {
            return None;
        }
        let k = m * (1.0 - m) / var - 1.0;
        Some(IceRate::Beta {
            alpha: m * k,
            beta: (1.0 - m) * k,
        })
    }
}
