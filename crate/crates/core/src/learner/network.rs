//! Actor and critic MLPs with one tanh hidden layer each, stored in one flat
//! parameter vector so the optimizer and checkpoints see a single slice.
//!
//! Parameter layout (row-major):
//! actor `W1[h×d] b1[h] W2[a×h] b2[a]`, then critic `U1[h×d] c1[h] U2[h] c2`.
//! The critic output is multiplied by a fixed `value_scale`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub obs_dim: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl Shape {
    pub fn num_params(&self) -> usize {
        let Shape {
            obs_dim: d,
            hidden: h,
            actions: a,
        } = *self;
        (h * d + h + a * h + a) + (h * d + h + h + 1)
    }

    fn offsets(&self) -> Offsets {
        let Shape {
            obs_dim: d,
            hidden: h,
            actions: a,
        } = *self;
        let w1 = 0;
        let b1 = w1 + h * d;
        let w2 = b1 + h;
        let b2 = w2 + a * h;
        let u1 = b2 + a;
        let c1 = u1 + h * d;
        let u2 = c1 + h;
        let c2 = u2 + h;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            u1,
            c1,
            u2,
            c2,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    u1: usize,
    c1: usize,
    u2: usize,
    c2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic<T> {
    pub shape: Shape,
    pub value_scale: T,
    pub params: Vec<T>,
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub actor_hidden: Vec<T>,
    pub critic_hidden: Vec<T>,
    pub log_probs: Vec<T>,
    pub probs: Vec<T>,
    pub value: T,
}

impl<T: Scalar> Forward<T> {
    pub fn entropy(&self) -> T {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(&p, &lp)| p * lp)
            .sum::<T>()
    }
}

impl<T: Scalar> ActorCritic<T> {
    /// Scaled-normal init: hidden layers `N(0, 1/d)`, policy head `0.01` of
    /// that, value head `N(0, 1/h)`, zero biases.
    pub fn new<R: Rng + ?Sized>(shape: Shape, value_scale: f64, rng: &mut R) -> Self {
        let o = shape.offsets();
        let mut params = vec![T::zero(); shape.num_params()];
        let d = shape.obs_dim as f64;
        let h = shape.hidden as f64;
        let mut fill = |range: std::ops::Range<usize>, std: f64, rng: &mut R| {
            let n = Normal::new(0.0, std).unwrap();
            for p in &mut params[range] {
                *p = T::lit(n.sample(rng));
            }
        };
        fill(o.w1..o.b1, 1.0 / d.sqrt(), rng);
        fill(o.w2..o.b2, 0.01 / h.sqrt(), rng);
        fill(o.u1..o.c1, 1.0 / d.sqrt(), rng);
        fill(o.u2..o.c2, 1.0 / h.sqrt(), rng);
        ActorCritic {
            shape,
            value_scale: T::lit(value_scale),
            params,
        }
    }

    pub fn from_params(shape: Shape, value_scale: T, params: Vec<T>) -> Self {
        assert_eq!(params.len(), shape.num_params(), "parameter count");
        ActorCritic {
            shape,
            value_scale,
            params,
        }
    }

    pub fn forward(&self, obs: &[T]) -> Forward<T> {
        let Shape {
            obs_dim: d,
            hidden: h,
            actions: a,
        } = self.shape;
        debug_assert_eq!(obs.len(), d);
        let o = self.shape.offsets();
        let p = &self.params;

        let dense_tanh = |w: usize, b: usize| -> Vec<T> {
            (0..h)
                .map(|j| {
                    let row = &p[w + j * d..w + (j + 1) * d];
                    let mut z = p[b + j];
                    for (wi, xi) in row.iter().zip(obs) {
                        z += *wi * *xi;
                    }
                    z.tanh()
                })
                .collect()
        };
        let actor_hidden = dense_tanh(o.w1, o.b1);
        let critic_hidden = dense_tanh(o.u1, o.c1);

        let logits: Vec<T> = (0..a)
            .map(|k| {
                let row = &p[o.w2 + k * h..o.w2 + (k + 1) * h];
                let mut z = p[o.b2 + k];
                for (wi, hi) in row.iter().zip(&actor_hidden) {
                    z += *wi * *hi;
                }
                z
            })
            .collect();
        let log_probs = log_softmax(&logits);
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();

        let mut v = p[o.c2];
        for (wi, hi) in p[o.u2..o.u2 + h].iter().zip(&critic_hidden) {
            v += *wi * *hi;
        }
        Forward {
            actor_hidden,
            critic_hidden,
            log_probs,
            probs,
            value: v * self.value_scale,
        }
    }

    pub fn value(&self, obs: &[T]) -> T {
        self.forward(obs).value
    }

    /// Accumulates `∂loss/∂θ` into `grad` given the loss gradient w.r.t. the
    /// logits and w.r.t. the (scaled) value output.
    pub fn backward(&self, obs: &[T], fwd: &Forward<T>, d_logits: &[T], d_value: T, grad: &mut [T]) {
        let Shape {
            obs_dim: d,
            hidden: h,
            actions: a,
        } = self.shape;
        let o = self.shape.offsets();
        let p = &self.params;

        // actor
        let mut d_hidden = vec![T::zero(); h];
        for k in 0..a {
            let g = d_logits[k];
            if g == T::zero() {
                continue;
            }
            grad[o.b2 + k] += g;
            for j in 0..h {
                grad[o.w2 + k * h + j] += g * fwd.actor_hidden[j];
                d_hidden[j] += g * p[o.w2 + k * h + j];
            }
        }
        for j in 0..h {
            let hj = fwd.actor_hidden[j];
            let g = d_hidden[j] * (T::one() - hj * hj);
            if g == T::zero() {
                continue;
            }
            grad[o.b1 + j] += g;
            let row = &mut grad[o.w1 + j * d..o.w1 + (j + 1) * d];
            for (gw, xi) in row.iter_mut().zip(obs) {
                *gw += g * *xi;
            }
        }

        // critic
        let dv = d_value * self.value_scale;
        if dv != T::zero() {
            grad[o.c2] += dv;
            for j in 0..h {
                let hj = fwd.critic_hidden[j];
                grad[o.u2 + j] += dv * hj;
                let g = dv * p[o.u2 + j] * (T::one() - hj * hj);
                grad[o.c1 + j] += g;
                let row = &mut grad[o.u1 + j * d..o.u1 + (j + 1) * d];
                for (gw, xi) in row.iter_mut().zip(obs) {
                    *gw += g * *xi;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ten_parameter_actor() {
        let s = Shape {
            obs_dim: 1,
            hidden: 2,
            actions: 2,
        };
        // actor part alone: 2 + 2 + 4 + 2
        assert_eq!(s.num_params() - (2 + 2 + 2 + 1), 10);
    }

    proptest! {
        #[test]
        fn policy_is_a_simplex(seed in 0u64..1000, scale in 0.1f64..50.0, x in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = ActorCritic::<f64>::new(Shape { obs_dim: 4, hidden: 8, actions: 5 }, 1.0, &mut rng);
            for p in &mut net.params {
                *p *= scale;
            }
            let f = net.forward(&x);
            let total: f64 = f.probs.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-6);
            prop_assert!(f.probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn categorical_sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = [0.2f64, 0.5, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..30000 {
            counts[sample_categorical(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / 30000.0 - p).abs() < 0.015);
        }
    }
}
