//! One-step TD errors and generalized advantage estimation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `δ_t = r_t + γ·V(s_{t+1})·(1−done_t) − V(s_t)`.
///
/// `next_values[t]` is the bootstrap value of the successor state, which for
/// fictitious transitions is the value of the fictitious successor rather
/// than of the next real state.
pub fn td_errors<T: Scalar>(
    rewards: &[T],
    values: &[T],
    next_values: &[T],
    dones: &[bool],
    gamma: T,
) -> Result<Vec<T>> {
    let n = rewards.len();
    if values.len() != n || next_values.len() != n || dones.len() != n {
        return Err(Error::contract(format!(
            "td_errors: misaligned arrays (rewards {n}, values {}, next {}, dones {})",
            values.len(),
            next_values.len(),
            dones.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (r, v, nv) = (rewards[t], values[t], next_values[t]);
        if r.is_nan() {
            return Err(Error::Numeric {
                what: "reward",
                index: t,
            });
        }
        if v.is_nan() {
            return Err(Error::Numeric {
                what: "value",
                index: t,
            });
        }
        if !dones[t] && nv.is_nan() {
            return Err(Error::Numeric {
                what: "next value",
                index: t,
            });
        }
        let boot = if dones[t] { T::zero() } else { gamma * nv };
        out.push(r + boot - v);
    }
    Ok(out)
}

/// `A_t = Σ_{k≥t} (γλ)^{k−t} δ_k`, truncated after the first `done` at or
/// after `t`, by backward recursion.
pub fn gae<T: Scalar>(deltas: &[T], gamma: T, lambda: T, dones: &[bool]) -> Result<Vec<T>> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(gamma) {
        return Err(Error::config(format!("gamma {gamma} outside [0, 1]")));
    }
    if !unit(lambda) {
        return Err(Error::config(format!("lambda {lambda} outside [0, 1]")));
    }
    if dones.len() != deltas.len() {
        return Err(Error::contract("gae: deltas and dones differ in length"));
    }
    if let Some(i) = deltas.iter().position(|d| !d.is_finite()) {
        return Err(Error::Numeric {
            what: "td error",
            index: i,
        });
    }
    let decay = gamma * lambda;
    let mut adv = vec![T::zero(); deltas.len()];
    let mut running = T::zero();
    for t in (0..deltas.len()).rev() {
        if dones[t] {
            running = T::zero();
        }
        running = deltas[t] + decay * running;
        adv[t] = running;
    }
    Ok(adv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_value_has_zero_error() {
        let d = td_errors(&[0.0f64], &[3.0], &[3.0], &[false], 1.0).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn terminal_step_ignores_bootstrap() {
        let d = td_errors(&[1.0f64], &[0.0], &[f64::NAN], &[true], 0.99).unwrap();
        assert_eq!(d, vec![1.0]);
    }

    #[test]
    fn nan_is_reported_with_index() {
        let err = td_errors(&[0.0f64, f64::NAN], &[0.0, 0.0], &[0.0, 0.0], &[false, true], 0.9)
            .unwrap_err();
        assert!(matches!(err, Error::Numeric { index: 1, .. }));
    }

    #[test]
    fn lambda_zero_is_one_step() {
        let d = [0.3f64, -1.0, 2.0];
        let a = gae(&d, 0.9, 0.0, &[false, false, true]).unwrap();
        assert_eq!(a, d.to_vec());
    }

    #[test]
    fn monte_carlo_limit() {
        let d = [1.0f64, 2.0, 3.0];
        let a = gae(&d, 1.0, 1.0, &[false, false, true]).unwrap();
        assert_eq!(a, vec![6.0, 5.0, 3.0]);
    }

    #[test]
    fn rates_outside_unit_interval_are_config_errors() {
        assert!(matches!(gae(&[1.0f64], 1.1, 0.5, &[true]), Err(Error::Config(_))));
        assert!(matches!(gae(&[1.0f64], 0.9, -0.1, &[true]), Err(Error::Config(_))));
    }

    #[test]
    fn episode_boundary_stops_accumulation() {
        let a = gae(&[1.0f64, 1.0], 1.0, 1.0, &[true, true]).unwrap();
        assert_eq!(a, vec![1.0, 1.0]);
    }
}
