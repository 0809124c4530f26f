//! Sample statistics and the one-sided Welch test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator), `0` for `n < 2`.
    pub sd: f64,
    /// `sd / sqrt(n)`.
    pub stderr: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary::default();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        sd,
        stderr: sd / (n as f64).sqrt(),
    }
}

pub fn variance(xs: &[f64]) -> f64 {
    let s = summarize(xs);
    s.sd * s.sd
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// `P(T ≥ t)` under the null of equal means.
    pub p_value: f64,
}

/// One-sided Welch test of `mean(a) > mean(b)`.
pub fn welch_greater(a: &[f64], b: &[f64]) -> WelchResult {
    let (sa, sb) = (summarize(a), summarize(b));
    let va = sa.sd.powi(2) / sa.n as f64;
    let vb = sb.sd.powi(2) / sb.n as f64;
    let diff = sa.mean - sb.mean;
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if diff > 0.0 { 0.0 } else { 1.0 };
        return WelchResult {
            t: if diff > 0.0 { f64::INFINITY } else if diff < 0.0 { f64::NEG_INFINITY } else { 0.0 },
            df: (sa.n + sb.n).saturating_sub(2) as f64,
            p_value: p,
        };
    }
    let t = diff / se2.sqrt();
    let df = se2.powi(2)
        / (va.powi(2) / (sa.n as f64 - 1.0).max(1.0) + vb.powi(2) / (sb.n as f64 - 1.0).max(1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    WelchResult {
        t,
        df,
        p_value: 1.0 - dist.cdf(t),
    }
}
