//! Exact planning on enumerable belief MDPs.
//!
//! The belief MDP of a grounded environment has the information state as its
//! state: the simulator state with every undisclosed aleatoric component set
//! to a fixed placeholder. A transition averages the environment's own step
//! function over the exact posterior of the components it can disclose.

use std::collections::HashMap;

use serde::Serialize;
use statrs::function::beta::ln_beta;

use crate::env::fruit_rooms::FRUIT_COMPONENT;
use crate::env::icy_track::IceRate;
use crate::env::{
    Environment, Evidence, Fruit, FruitRooms, FruitRoomsLevel, FruitRoomsState, IceAssignment, IcyTrack, IcyTrackLevel,
    IcyTrackState,
};
use crate::error::{Error, Result};
use crate::grounding::{FruitPrior, Grounded};
use crate::learner::network::argmax;
use crate::learner::ActorCritic;
use crate::scalar::Scalar;

pub const DEFAULT_STATE_LIMIT: usize = 200_000;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

pub trait Enumerable: Grounded {
    /// Information-state representative of `state`.
    fn canonical(&self, state: &Self::State) -> Self::State;
    /// Exact posterior weights over the assignments that can influence the
    /// next transition from `state`. Components that cannot matter may be
    /// fixed arbitrarily.
    fn posterior_support(&self, prior: &Self::Prior, state: &Self::State) -> Vec<(Self::Aleatoric, f64)>;
    /// Evidence disclosed by the trajectory that led to `state`.
    fn disclosed(&self, state: &Self::State) -> Evidence;
}

impl Enumerable for FruitRooms {
    fn canonical(&self, s: &FruitRoomsState) -> FruitRoomsState {
        if s.eaten.is_some() {
            s.clone()
        } else {
            FruitRoomsState {
                correct: Fruit::Apple,
                ..s.clone()
            }
        }
    }

    fn posterior_support(&self, prior: &FruitPrior, s: &FruitRoomsState) -> Vec<(Fruit, f64)> {
        if s.eaten.is_some() {
            vec![(s.correct, 1.0)]
        } else {
            vec![(Fruit::Apple, prior.apple_prob), (Fruit::Banana, 1.0 - prior.apple_prob)]
        }
    }

    fn disclosed(&self, s: &FruitRoomsState) -> Evidence {
        match s.eaten {
            Some(_) => Evidence::from_entries([(FRUIT_COMPONENT, s.correct.code())]).expect("single entry"),
            None => Evidence::new(),
        }
    }
}

impl Enumerable for IcyTrack {
    fn canonical(&self, s: &IcyTrackState) -> IcyTrackState {
        let mut c = s.clone();
        for i in s.pos as usize..c.ice.len() {
            c.ice[i] = false;
        }
        c
    }

    /// Enumerates the tiles reachable this step; their joint law is the
    /// Beta-Bernoulli marginal given the disclosed counts.
    fn posterior_support(&self, prior: &IceRate, s: &IcyTrackState) -> Vec<(IceAssignment, f64)> {
        let base = self.canonical(s);
        let lo = s.pos as usize;
        let hi = (lo + s.vel as usize).min(s.ice.len());
        let m = hi - lo;
        let (k_ice, k_dry) = (s.n_ice as f64, s.n_dry as f64);
        let mut out = Vec::with_capacity(1 << m);
        for mask in 0..(1u32 << m) {
            let ones = mask.count_ones() as f64;
            let zeros = m as f64 - ones;
            let w = match *prior {
                IceRate::Beta { alpha, beta } => {
                    let (a, b) = (alpha + k_ice, beta + k_dry);
                    (ln_beta(a + ones, b + zeros) - ln_beta(a, b)).exp()
                }
                IceRate::Fixed { q } => q.powf(ones) * (1.0 - q).powf(zeros),
            };
            if w == 0.0 {
                continue;
            }
            let mut tiles = base.ice.clone();
            for j in 0..m {
                tiles[lo + j] = mask >> j & 1 == 1;
            }
            out.push((IceAssignment { rate: 0.0, tiles }, w));
        }
        out
    }

    fn disclosed(&self, s: &IcyTrackState) -> Evidence {
        s.evidence()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Tabular MDP; terminal states have no actions.
#[derive(Clone, Debug)]
pub struct FiniteMdp<S> {
    pub states: Vec<S>,
    pub initial: Vec<(usize, f64)>,
    pub terminal: Vec<bool>,
    /// `transitions[s][a]` lists the outcomes of action `a` in state `s`.
    pub transitions: Vec<Vec<Vec<Outcome>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub states: usize,
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    /// Optimal expected return from the initial distribution.
    pub v_star: f64,
    pub residual: f64,
    pub sweeps: usize,
    /// The greedy policy is unchanged by one more Bellman sweep.
    pub greedy_stable: bool,
}

/// Enumerates the belief MDP reachable from `initial`.
pub fn build_belief_mdp<E: Enumerable>(
    env: &E,
    prior: &E::Prior,
    initial: &[(E::State, f64)],
    limit: usize,
) -> Result<FiniteMdp<E::State>> {
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut states: Vec<E::State> = Vec::new();
    let intern = |s: E::State, index: &mut HashMap<Vec<u8>, usize>, states: &mut Vec<E::State>| -> Result<usize> {
        let key = env.snapshot(&s).0;
        if let Some(&i) = index.get(&key) {
            return Ok(i);
        }
        if states.len() >= limit {
            return Err(Error::StateSpaceOverflow { limit });
        }
        index.insert(key, states.len());
        states.push(s);
        Ok(states.len() - 1)
    };

    let mut init = Vec::new();
    for (s, p) in initial {
        let i = intern(env.canonical(s), &mut index, &mut states)?;
        init.push((i, *p));
    }
    let mut transitions = Vec::new();
    let mut terminal = Vec::new();
    let mut cursor = 0;
    while cursor < states.len() {
        let s = states[cursor].clone();
        if env.is_done(&s) {
            terminal.push(true);
            transitions.push(Vec::new());
            cursor += 1;
            continue;
        }
        terminal.push(false);
        let support = env.posterior_support(prior, &s);
        let evidence = env.disclosed(&s);
        let mut per_action = Vec::with_capacity(env.num_actions());
        for a in 0..env.num_actions() {
            let mut merged: Vec<Outcome> = Vec::new();
            for (theta, w) in &support {
                let grounded = env.set_aleatoric(&s, theta, &evidence)?;
                let out = env.step(&grounded, a)?;
                let next = intern(env.canonical(&out.state), &mut index, &mut states)?;
                match merged.iter_mut().find(|o| o.next == next && o.reward == out.reward) {
                    Some(o) => o.prob += w,
                    None => merged.push(Outcome {
                        next,
                        prob: *w,
                        reward: out.reward,
                    }),
                }
            }
            per_action.push(merged);
        }
        transitions.push(per_action);
        cursor += 1;
    }
    Ok(FiniteMdp {
        states,
        initial: init,
        terminal,
        transitions,
    })
}

fn q_value<S>(mdp: &FiniteMdp<S>, values: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
    mdp.transitions[s][a]
        .iter()
        .map(|o| o.prob * (o.reward + gamma * values[o.next]))
        .sum()
}

fn greedy<S>(mdp: &FiniteMdp<S>, values: &[f64], s: usize, gamma: f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..mdp.transitions[s].len() {
        let q = q_value(mdp, values, s, a, gamma);
        if q > best.1 + 1e-12 {
            best = (a, q);
        }
    }
    best
}

fn bellman_residual<S>(mdp: &FiniteMdp<S>, values: &[f64], gamma: f64) -> f64 {
    (0..mdp.states.len())
        .filter(|&s| !mdp.terminal[s])
        .map(|s| (greedy(mdp, values, s, gamma).1 - values[s]).abs())
        .fold(0.0, f64::max)
}

/// Gauss-Seidel value iteration, sweeping states in reverse discovery order.
pub fn value_iteration<S>(mdp: &FiniteMdp<S>, gamma: f64) -> Result<OracleResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!("gamma {gamma} outside [0, 1]")));
    }
    let n = mdp.states.len();
    let mut values = vec![0.0; n];
    let mut sweeps = 0;
    let max_sweeps = 100_000;
    loop {
        let mut change: f64 = 0.0;
        for s in (0..n).rev() {
            if mdp.terminal[s] {
                continue;
            }
            let v = greedy(mdp, &values, s, gamma).1;
            change = change.max((v - values[s]).abs());
            values[s] = v;
        }
        sweeps += 1;
        if change <= RESIDUAL_TOLERANCE * 1e-2 || sweeps >= max_sweeps {
            break;
        }
    }
    let policy: Vec<usize> = (0..n)
        .map(|s| if mdp.terminal[s] { 0 } else { greedy(mdp, &values, s, gamma).0 })
        .collect();
    let residual = bellman_residual(mdp, &values, gamma);
    let mut next = values.clone();
    for s in (0..n).rev() {
        if !mdp.terminal[s] {
            next[s] = greedy(mdp, &next, s, gamma).1;
        }
    }
    let greedy_stable = (0..n).all(|s| {
        mdp.terminal[s] || {
            let a = greedy(mdp, &next, s, gamma).0;
            a == policy[s] || (q_value(mdp, &next, s, a, gamma) - q_value(mdp, &next, s, policy[s], gamma)).abs() <= RESIDUAL_TOLERANCE
        }
    });
    let v_star = mdp.initial.iter().map(|&(s, p)| p * values[s]).sum();
    Ok(OracleResult {
        states: n,
        values,
        policy,
        v_star,
        residual,
        sweeps,
        greedy_stable,
    })
}

/// Expected return of a stochastic policy `pi(state index) -> action probs`.
pub fn policy_value<S>(mdp: &FiniteMdp<S>, gamma: f64, pi: impl Fn(usize) -> Vec<f64>) -> f64 {
    let n = mdp.states.len();
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|s| if mdp.terminal[s] { Vec::new() } else { pi(s) })
        .collect();
    let mut values = vec![0.0; n];
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for s in (0..n).rev() {
            if mdp.terminal[s] {
                continue;
            }
            let v: f64 = probs[s]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| p * q_value(mdp, &values, s, a, gamma))
                .sum();
            change = change.max((v - values[s]).abs());
            values[s] = v;
        }
        if change <= 1e-13 {
            break;
        }
    }
    mdp.initial.iter().map(|&(s, p)| p * values[s]).sum()
}

/// Per-`q` values of always eating one fruit, and the better of the two.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FruitChoice {
    pub q: f64,
    pub apple_value: f64,
    pub banana_value: f64,
    pub best: Option<Fruit>,
}

/// Optimal fruit per `q`; `best` is `None` on an exact tie.
pub fn indifference_scan(qs: &[f64], reward_apple: f64, reward_banana: f64) -> Result<Vec<FruitChoice>> {
    if !(reward_apple > 0.0 && reward_banana > 0.0) {
        return Err(Error::config("fruit rewards must be positive"));
    }
    Ok(qs
        .iter()
        .map(|&q| {
            let apple_value = q * reward_apple;
            let banana_value = (1.0 - q) * reward_banana;
            let best = if apple_value > banana_value {
                Some(Fruit::Apple)
            } else if banana_value > apple_value {
                Some(Fruit::Banana)
            } else {
                None
            };
            FruitChoice {
                q,
                apple_value,
                banana_value,
                best,
            }
        })
        .collect())
}

/// `q` at which both fruits have equal expected return.
pub fn indifference_point(reward_apple: f64, reward_banana: f64) -> f64 {
    reward_banana / (reward_apple + reward_banana)
}

/// Belief MDP of the fruit choice alone: one-room levels with the given
/// layouts, every start row equally likely.
pub fn fruit_choice_instance(
    env: &FruitRooms,
    prior: &FruitPrior,
    layouts: std::ops::Range<u64>,
) -> Result<FiniteMdp<FruitRoomsState>> {
    let h = env.cfg.height;
    let n = (layouts.end - layouts.start) as f64 * h as f64;
    let mut init = Vec::new();
    for layout_seed in layouts {
        let level = FruitRoomsLevel {
            rooms: 1,
            layout_seed,
            fruit: Fruit::Apple,
        };
        for row in 0..h {
            init.push((env.initial_state(&level, row)?, 1.0 / n));
        }
    }
    build_belief_mdp(env, prior, &init, DEFAULT_STATE_LIMIT)
}

/// Belief MDP of one IcyTrack layout under `prior`.
pub fn icy_instance(env: &IcyTrack, prior: &IceRate, length: u16, layout_seed: u64) -> Result<FiniteMdp<IcyTrackState>> {
    let level = IcyTrackLevel {
        length,
        layout_seed,
        ice: IceAssignment {
            rate: 0.0,
            tiles: vec![false; length as usize],
        },
    };
    let init = vec![(env.initial_state(&level)?, 1.0)];
    build_belief_mdp(env, prior, &init, DEFAULT_STATE_LIMIT)
}

/// Exact expected return of a network policy on an enumerated instance.
pub fn network_policy_value<E: Environment, T: Scalar>(
    env: &E,
    mdp: &FiniteMdp<E::State>,
    net: &ActorCritic<T>,
    gamma: f64,
    greedy: bool,
) -> f64 {
    policy_value(mdp, gamma, |s| {
        let obs: Vec<T> = env.observe(&mdp.states[s]).iter().map(|&x| T::lit(x)).collect();
        let f = net.forward(&obs);
        if greedy {
            let mut p = vec![0.0; f.probs.len()];
            p[argmax(&f.probs)] = 1.0;
            p
        } else {
            f.probs.iter().map(|p| p.as_f64()).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> FiniteMdp<usize> {
        let mut transitions = Vec::new();
        let mut terminal = Vec::new();
        for s in 0..n {
            if s + 1 == n {
                terminal.push(true);
                transitions.push(Vec::new());
            } else {
                terminal.push(false);
                let r = if s + 2 == n { 1.0 } else { 0.0 };
                transitions.push(vec![vec![Outcome {
                    next: s + 1,
                    prob: 1.0,
                    reward: r,
                }]]);
            }
        }
        FiniteMdp {
            states: (0..n).collect(),
            initial: vec![(0, 1.0)],
            terminal,
            transitions,
        }
    }

    #[test]
    fn deterministic_chain() {
        let r = value_iteration(&chain(6), 1.0).unwrap();
        assert_eq!(r.v_star, 1.0);
        assert!(r.residual <= RESIDUAL_TOLERANCE);
        assert!(r.greedy_stable);
        assert_eq!(policy_value(&chain(6), 1.0, |_| vec![1.0]), 1.0);
    }

    #[test]
    fn indifference() {
        assert!((indifference_point(3.0, 10.0) - 10.0 / 13.0).abs() < 1e-15);
        let scan = indifference_scan(&[1.0, 0.5, 0.7], 3.0, 10.0).unwrap();
        assert_eq!(scan[0].best, Some(Fruit::Apple));
        assert_eq!(scan[0].apple_value, 3.0);
        assert_eq!(scan[2].best, Some(Fruit::Banana));
        let tie = indifference_scan(&[0.5], 4.0, 4.0).unwrap();
        assert_eq!(tie[0].best, None);
    }
}
