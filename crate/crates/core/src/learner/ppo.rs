//! Clipped-surrogate policy optimization.
//!
//! Per minibatch of size `n`, with normalized advantages `Â`, probability
//! ratio `ρ = exp(log π(a|s) − log π_old(a|s))` and return target `R`:
//!
//! ```text
//! L_pg  = −mean(min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â))
//! L_v   = mean(½·((V(s) − R) / value_scale)²)
//! H     = mean(entropy of π(·|s))
//! L     = L_pg + c_v·L_v − c_H·H
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::adam::Adam;
use super::batch::TrajectoryBatch;
use super::network::{sample_categorical, ActorCritic, Shape};

pub const DIVERGENCE_LOSS: f64 = 1e6;
const ADV_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub adam_eps: f64,
    pub max_grad_norm: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: usize,
    pub value_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.995,
            lambda: 0.95,
            clip: 0.2,
            epochs: 5,
            minibatches: 1,
            lr: 1e-4,
            adam_eps: 1e-5,
            max_grad_norm: 0.5,
            value_coef: 0.5,
            entropy_coef: 0.0,
            hidden: 64,
            value_scale: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::config("gamma and lambda must lie in [0, 1]"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("clip must lie in (0, 1)"));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.hidden == 0 {
            return Err(Error::config("epochs, minibatches and hidden must be positive"));
        }
        if !(self.lr > 0.0 && self.adam_eps > 0.0 && self.max_grad_norm > 0.0 && self.value_scale > 0.0) {
            return Err(Error::config("lr, adam_eps, max_grad_norm and value_scale must be positive"));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::config("loss coefficients must be non-negative"));
        }
        Ok(())
    }
}

/// Network weights plus optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T> {
    pub net: ActorCritic<T>,
    pub adam: Adam<T>,
}

#[derive(Clone, Debug)]
pub struct ActOutput<T> {
    pub action: usize,
    pub log_prob: T,
    pub value: T,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn new<R: Rng + ?Sized>(shape: Shape, cfg: &PpoConfig, rng: &mut R) -> Self {
        let net = ActorCritic::new(shape, cfg.value_scale, rng);
        let adam = Adam::new(net.params.len(), cfg.adam_eps);
        PolicyParams { net, adam }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R) -> ActOutput<T> {
        let f = self.net.forward(obs);
        let action = sample_categorical(&f.probs, rng);
        ActOutput {
            action,
            log_prob: f.log_probs[action],
            value: f.value,
        }
    }
}

/// Value of `min(ρA, clip(ρ)A)` and its derivative with respect to `ρ`.
pub fn clipped_surrogate<T: Scalar>(ratio: T, adv: T, clip: T) -> (T, T) {
    let clipped = ratio.max(T::one() - clip).min(T::one() + clip);
    let unclipped_obj = ratio * adv;
    let clipped_obj = clipped * adv;
    if unclipped_obj <= clipped_obj {
        (unclipped_obj, adv)
    } else {
        (clipped_obj, T::zero())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub policy: T,
    pub value: T,
    pub entropy: T,
    pub approx_kl: T,
    pub clip_fraction: T,
}

/// Loss coefficients for one minibatch evaluation.
#[derive(Clone, Copy, Debug)]
pub struct LossCoefs<T> {
    pub clip: T,
    pub value_coef: T,
    pub entropy_coef: T,
}

/// Full loss over `idx` and its gradient with respect to every parameter.
pub fn loss_and_grad<T: Scalar>(
    net: &ActorCritic<T>,
    batch: &TrajectoryBatch<T>,
    advantages: &[T],
    idx: &[usize],
    coefs: LossCoefs<T>,
) -> (LossParts<T>, Vec<T>) {
    let mut grad = vec![T::zero(); net.params.len()];
    let mut parts = LossParts::default();
    let n = T::from_usize_lossy(idx.len());
    let inv_n = T::one() / n;
    let scale = net.value_scale;
    let a = net.shape.actions;
    let mut d_logits = vec![T::zero(); a];
    for &i in idx {
        let obs = batch.obs_row(i);
        let f = net.forward(obs);
        let act = batch.actions[i];
        let logp = f.log_probs[act];
        let log_ratio = logp - batch.log_probs[i];
        let ratio = log_ratio.exp();
        let (obj, d_obj) = clipped_surrogate(ratio, advantages[i], coefs.clip);
        let ent = f.entropy();
        let err = (f.value - batch.returns[i]) / scale;

        parts.policy -= obj * inv_n;
        parts.value += T::lit(0.5) * err * err * inv_n;
        parts.entropy += ent * inv_n;
        parts.approx_kl += ((ratio - T::one()) - log_ratio) * inv_n;
        if (ratio - T::one()).abs() > coefs.clip {
            parts.clip_fraction += inv_n;
        }

        // ∂(−obj)/∂logit_k = −dobj/dρ · ρ · (1[k=a] − p_k)
        // ∂(−c_H·H)/∂logit_k = c_H · p_k · (log p_k + H)
        let g_pg = -d_obj * ratio;
        for k in 0..a {
            let onehot = if k == act { T::one() } else { T::zero() };
            let p = f.probs[k];
            d_logits[k] = (g_pg * (onehot - p) + coefs.entropy_coef * p * (f.log_probs[k] + ent)) * inv_n;
        }
        let d_value = coefs.value_coef * err / scale * inv_n;
        net.backward(obs, &f, &d_logits, d_value, &mut grad);
    }
    parts.total = parts.policy + coefs.value_coef * parts.value - coefs.entropy_coef * parts.entropy;
    (parts, grad)
}

pub fn normalize_advantages<T: Scalar>(adv: &[T]) -> Vec<T> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = T::from_usize_lossy(adv.len());
    let mean = adv.iter().copied().sum::<T>() / n;
    let var = adv.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
    let denom = var.sqrt() + T::lit(ADV_EPS);
    adv.iter().map(|&a| (a - mean) / denom).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Global gradient norm before clipping, averaged over minibatch steps.
    pub grad_norm: f64,
    pub samples: usize,
}

/// Runs `epochs × minibatches` clipped-surrogate steps on `batch` in place.
pub fn ppo_update<T: Scalar, R: Rng + ?Sized>(
    params: &mut PolicyParams<T>,
    batch: &TrajectoryBatch<T>,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    cfg.validate()?;
    batch.check()?;
    let n = batch.len();
    if n == 0 {
        return Err(Error::contract("ppo_update on an empty batch"));
    }
    let adv = normalize_advantages(&batch.advantages);
    let coefs = LossCoefs {
        clip: T::lit(cfg.clip),
        value_coef: T::lit(cfg.value_coef),
        entropy_coef: T::lit(cfg.entropy_coef),
    };
    let lr = T::lit(cfg.lr);
    let max_norm = T::lit(cfg.max_grad_norm);
    let mb = cfg.minibatches.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats {
        samples: n,
        ..Default::default()
    };
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for m in 0..mb {
            let lo = m * n / mb;
            let hi = (m + 1) * n / mb;
            let idx = &order[lo..hi];
            let (parts, mut grad) = loss_and_grad(&params.net, batch, &adv, idx, coefs);
            let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
            let total = parts.total.as_f64();
            if !total.is_finite() || total.abs() > DIVERGENCE_LOSS || !norm.is_finite() {
                return Err(Error::Divergence {
                    loss: total,
                    diagnostics: format!(
                        "epoch {epoch} minibatch {m}: policy {:.4e} value {:.4e} entropy {:.4e} grad_norm {:.4e}",
                        parts.policy.as_f64(),
                        parts.value.as_f64(),
                        parts.entropy.as_f64(),
                        norm.as_f64()
                    ),
                });
            }
            if norm > max_norm {
                let s = max_norm / norm;
                for g in &mut grad {
                    *g *= s;
                }
            }
            params.adam.apply(&mut params.net.params, &grad, lr);
            if let Some(i) = params.net.params.iter().position(|p| !p.is_finite()) {
                return Err(Error::Numeric {
                    what: "parameter",
                    index: i,
                });
            }
            stats.policy_loss += parts.policy.as_f64();
            stats.value_loss += parts.value.as_f64();
            stats.entropy += parts.entropy.as_f64();
            stats.approx_kl += parts.approx_kl.as_f64();
            stats.clip_fraction += parts.clip_fraction.as_f64();
            stats.grad_norm += norm.as_f64();
            steps += 1;
        }
    }
    let k = steps as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    stats.grad_norm /= k;
    Ok(stats)
}
