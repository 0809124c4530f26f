//! Adaptive-moment optimizer.
//!
//! With step count `t`, gradient `g`, rates `β1, β2`, learning rate `η` and
//! `ε`:
//!
//! ```text
//! m ← β1·m + (1−β1)·g
//! v ← β2·v + (1−β2)·g²
//! θ ← θ − η · (m / (1−β1ᵗ)) / (sqrt(v / (1−β2ᵗ)) + ε)
//! ```

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, eps: f64) -> Self {
        Adam {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(eps),
            step: 0,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    pub fn apply(&mut self, params: &mut [T], grad: &[T], lr: T) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
