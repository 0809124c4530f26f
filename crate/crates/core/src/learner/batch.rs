use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::advantage::{gae, td_errors};

/// Per-step rollout storage. Observations are stored row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryBatch<T> {
    pub obs_dim: usize,
    pub obs: Vec<T>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    pub next_values: Vec<T>,
    pub dones: Vec<bool>,
    pub deltas: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

/// One transition as produced by a rollout worker.
#[derive(Clone, Debug)]
pub struct Step<T> {
    pub obs: Vec<T>,
    pub action: usize,
    pub log_prob: T,
    pub reward: T,
    pub value: T,
    pub next_value: T,
    pub done: bool,
}

impl<T: Scalar> TrajectoryBatch<T> {
    pub fn new(obs_dim: usize) -> Self {
        TrajectoryBatch {
            obs_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_row(&self, i: usize) -> &[T] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn push(&mut self, step: Step<T>) {
        debug_assert_eq!(step.obs.len(), self.obs_dim);
        self.obs.extend_from_slice(&step.obs);
        self.actions.push(step.action);
        self.log_probs.push(step.log_prob);
        self.rewards.push(step.reward);
        self.values.push(step.value);
        self.next_values.push(step.next_value);
        self.dones.push(step.done);
    }

    /// Appends another batch, which must already carry its advantages if this
    /// one does.
    pub fn extend(&mut self, other: &TrajectoryBatch<T>) {
        assert_eq!(self.obs_dim, other.obs_dim, "observation width");
        self.obs.extend_from_slice(&other.obs);
        self.actions.extend_from_slice(&other.actions);
        self.log_probs.extend_from_slice(&other.log_probs);
        self.rewards.extend_from_slice(&other.rewards);
        self.values.extend_from_slice(&other.values);
        self.next_values.extend_from_slice(&other.next_values);
        self.dones.extend_from_slice(&other.dones);
        self.deltas.extend_from_slice(&other.deltas);
        self.advantages.extend_from_slice(&other.advantages);
        self.returns.extend_from_slice(&other.returns);
    }

    /// Fills `deltas`, `advantages` and `returns = A + V`.
    pub fn compute_advantages(&mut self, gamma: T, lambda: T) -> Result<()> {
        self.deltas = td_errors(
            &self.rewards,
            &self.values,
            &self.next_values,
            &self.dones,
            gamma,
        )?;
        self.advantages = gae(&self.deltas, gamma, lambda, &self.dones)?;
        self.returns = self
            .advantages
            .iter()
            .zip(&self.values)
            .map(|(&a, &v)| a + v)
            .collect();
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.log_probs.len(),
            self.rewards.len(),
            self.values.len(),
            self.next_values.len(),
            self.dones.len(),
            self.deltas.len(),
            self.advantages.len(),
            self.returns.len(),
        ];
        if self.obs.len() != n * self.obs_dim || lens.iter().any(|&l| l != n) {
            return Err(Error::contract("trajectory batch arrays differ in length"));
        }
        if let Some(i) = self.advantages.iter().position(|a| !a.is_finite()) {
            return Err(Error::Numeric {
                what: "advantage",
                index: i,
            });
        }
        Ok(())
    }
}
