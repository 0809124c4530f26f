//! Single-episode collection with optional fictitious substitution.

use rand::RngCore;

use crate::curriculum::{score_deltas, Scorer};
use crate::env::Simulator;
use crate::error::Result;
use crate::grounding::{fictitious_step, Belief, BeliefSummary};
use crate::learner::network::{argmax, sample_categorical};
use crate::learner::{td_errors, ActorCritic, Step, TrajectoryBatch};
use crate::scalar::Scalar;

use super::domain::{Domain, EpisodeInfo};

pub(crate) fn to_scalar<T: Scalar>(obs: &[f64]) -> Vec<T> {
    obs.iter().map(|&x| T::lit(x)).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct RolloutSpec {
    pub gamma: f64,
    pub lambda: f64,
    pub scorer: Scorer,
    /// Replace every transition by a fictitious one from the posterior.
    pub fictitious: bool,
}

#[derive(Clone, Debug)]
pub struct Rollout<T> {
    /// Training transitions with advantages; fictitious when requested.
    pub batch: TrajectoryBatch<T>,
    /// Regret score of the level, from the same transitions as `batch`.
    pub score: f64,
    pub real_return: f64,
    pub fict_return: Option<f64>,
    pub steps: usize,
    /// Non-terminal steps whose fictitious reward, observation or done flag
    /// differed from the real step.
    pub nonterminal_mismatches: usize,
    pub fict_ice_tiles: u32,
    pub info: EpisodeInfo,
    pub belief: BeliefSummary,
}

/// Runs one episode on `level` with the real simulator; with
/// `spec.fictitious` every step also takes a fictitious transition from the
/// real state using the same action.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<E: Domain, T: Scalar>(
    env: &E,
    level: &E::Level,
    net: &ActorCritic<T>,
    prior: &E::Prior,
    spec: RolloutSpec,
    reset_seed: u64,
    act_rng: &mut dyn RngCore,
    fict_rng: &mut dyn RngCore,
) -> Result<Rollout<T>> {
    let mut real = Simulator::new(env.clone());
    let mut fict = Simulator::new(env.clone());
    let mut belief = env.belief(prior, level);
    let obs0 = real.reset(level, reset_seed)?;
    let mut obs: Vec<T> = to_scalar(&obs0);
    let mut cur = net.forward(&obs);

    let mut batch = TrajectoryBatch::new(net.shape.obs_dim);
    let mut real_rewards = Vec::new();
    let mut real_values = Vec::new();
    let mut real_next = Vec::new();
    let mut real_dones = Vec::new();
    let mut fict_return = 0.0;
    let mut mismatches = 0;
    let mut fict_ice = 0u32;

    loop {
        let action = sample_categorical(&cur.probs, act_rng);
        let ft = if spec.fictitious {
            let snap = real.snapshot()?;
            Some(fictitious_step(&mut fict, &snap, &belief, action, fict_rng)?)
        } else {
            None
        };
        let out = real.step(action)?;
        belief.posterior_update(&out.evidence)?;
        let next_obs: Vec<T> = to_scalar(&out.observation);
        let next = if out.done { None } else { Some(net.forward(&next_obs)) };
        let next_value = next.as_ref().map_or(T::zero(), |f| f.value);

        real_rewards.push(T::lit(out.reward));
        real_values.push(cur.value);
        real_next.push(next_value);
        real_dones.push(out.done);

        let step = match &ft {
            Some(t) => {
                if !out.done && (t.reward != out.reward || t.observation != out.observation || t.done != out.done) {
                    mismatches += 1;
                }
                fict_return += t.reward;
                fict_ice += env
                    .info(level, &t.next_state)
                    .ice_tiles
                    .saturating_sub(env.info(level, &t.state).ice_tiles);
                let fv = if t.done {
                    T::zero()
                } else if t.observation == out.observation {
                    next_value
                } else {
                    net.value(&to_scalar(&t.observation))
                };
                Step {
                    obs: obs.clone(),
                    action,
                    log_prob: cur.log_probs[action],
                    reward: T::lit(t.reward),
                    value: cur.value,
                    next_value: fv,
                    done: t.done,
                }
            }
            None => Step {
                obs: obs.clone(),
                action,
                log_prob: cur.log_probs[action],
                reward: T::lit(out.reward),
                value: cur.value,
                next_value,
                done: out.done,
            },
        };
        batch.push(step);

        match next {
            Some(f) => {
                cur = f;
                obs = next_obs;
            }
            None => break,
        }
    }

    let gamma = T::lit(spec.gamma);
    let lambda = T::lit(spec.lambda);
    batch.compute_advantages(gamma, lambda)?;
    let score_src = if spec.fictitious {
        batch.deltas.clone()
    } else {
        td_errors(&real_rewards, &real_values, &real_next, &real_dones, gamma)?
    };
    let score = score_deltas(&score_src, &batch.dones, gamma, lambda, spec.scorer)?.as_f64();
    let real_return = real_rewards.iter().map(|r| r.as_f64()).sum();
    let final_state = real.state()?.clone();
    Ok(Rollout {
        steps: batch.len(),
        batch,
        score,
        real_return,
        fict_return: spec.fictitious.then_some(fict_return),
        nonterminal_mismatches: mismatches,
        fict_ice_tiles: fict_ice,
        info: env.info(level, &final_state),
        belief: belief.summary(),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalEpisode {
    pub ret: f64,
    pub steps: usize,
    pub info: EpisodeInfo,
}

/// Plays `level` with the policy, sampling actions or acting greedily.
pub fn play<E: Domain, T: Scalar>(
    env: &E,
    level: &E::Level,
    net: &ActorCritic<T>,
    greedy: bool,
    reset_seed: u64,
    rng: &mut dyn RngCore,
) -> Result<EvalEpisode> {
    play_with(env, level, reset_seed, rng, |_, obs, rng| {
        let f = net.forward(&to_scalar::<T>(obs));
        if greedy {
            argmax(&f.probs)
        } else {
            sample_categorical(&f.probs, rng)
        }
    })
}

/// Plays `level` with an arbitrary state-feedback policy.
pub fn play_with<E: Domain>(
    env: &E,
    level: &E::Level,
    reset_seed: u64,
    rng: &mut dyn RngCore,
    mut policy: impl FnMut(&E::State, &[f64], &mut dyn RngCore) -> usize,
) -> Result<EvalEpisode> {
    let (mut s, mut obs) = env.reset(level, reset_seed)?;
    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let a = policy(&s, &obs, rng);
        let out = env.step(&s, a)?;
        ret += out.reward;
        steps += 1;
        s = out.state;
        if out.done {
            break;
        }
        obs = out.observation;
    }
    Ok(EvalEpisode {
        ret,
        steps,
        info: env.info(level, &s),
    })
}
