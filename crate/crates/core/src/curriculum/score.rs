//! Regret proxies computed from a trajectory's TD errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{gae, TrajectoryBatch};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    /// `(1/T) Σ_t max(Σ_{k≥t} (γλ)^{k−t} δ_k, 0)`
    #[default]
    PositiveValueLoss,
    /// `(1/T) Σ_t |δ_t|`
    MeanAbsTd,
}

pub fn score_deltas<T: Scalar>(
    deltas: &[T],
    dones: &[bool],
    gamma: T,
    lambda: T,
    scorer: Scorer,
) -> Result<T> {
    if deltas.is_empty() {
        return Err(Error::contract("cannot score an empty trajectory"));
    }
    let n = T::from_usize_lossy(deltas.len());
    let s = match scorer {
        Scorer::PositiveValueLoss => {
            let adv = gae(deltas, gamma, lambda, dones)?;
            adv.iter().map(|&a| a.max(T::zero())).sum::<T>() / n
        }
        Scorer::MeanAbsTd => {
            if let Some(i) = deltas.iter().position(|d| !d.is_finite()) {
                return Err(Error::Numeric {
                    what: "td error",
                    index: i,
                });
            }
            deltas.iter().map(|d| d.abs()).sum::<T>() / n
        }
    };
    Ok(s)
}

/// Scores a batch whose `deltas` are already filled.
pub fn score_trajectory<T: Scalar>(
    batch: &TrajectoryBatch<T>,
    gamma: T,
    lambda: T,
    scorer: Scorer,
) -> Result<T> {
    if batch.deltas.len() != batch.len() {
        return Err(Error::contract("batch has no TD errors; compute advantages first"));
    }
    score_deltas(&batch.deltas, &batch.dones, gamma, lambda, scorer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_errors_score_zero() {
        let s = score_deltas(&[0.0f64; 5], &[false, false, false, false, true], 0.9, 0.9, Scorer::default());
        assert_eq!(s.unwrap(), 0.0);
    }

    #[test]
    fn single_step() {
        let s = score_deltas(&[2.0f64], &[true], 0.99, 0.95, Scorer::default()).unwrap();
        assert_eq!(s, 2.0);
    }

    #[test]
    fn negative_tail_is_clipped() {
        let s = score_deltas(&[1.0f64, -1.0], &[false, true], 1.0, 1.0, Scorer::default()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn empty_is_a_contract_violation() {
        let e = score_deltas::<f64>(&[], &[], 0.9, 0.9, Scorer::default());
        assert!(matches!(e, Err(Error::Contract(_))));
    }

    #[test]
    fn mean_abs_alternative() {
        let s = score_deltas(&[1.0f32, -3.0], &[false, true], 0.9, 0.9, Scorer::MeanAbsTd).unwrap();
        assert_eq!(s, 2.0);
    }
}
