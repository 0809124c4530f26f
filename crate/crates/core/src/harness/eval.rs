//! Evaluation of a fixed policy on a suite of levels.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::Fruit;
use crate::error::Result;
use crate::learner::ActorCritic;
use crate::scalar::Scalar;

use super::domain::{Domain, EvalSuite};
use super::rollout::{play, EvalEpisode};
use super::stats::summarize;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub episodes: usize,
    pub mean_return: f64,
    pub solve_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub q: Option<f64>,
    pub episodes: usize,
    pub mean_return: f64,
    pub stderr: f64,
    pub solve_rate: f64,
    pub apple_fraction: f64,
    pub banana_fraction: f64,
    pub no_fruit_fraction: f64,
    /// Banana share among episodes that ate a fruit; `None` if none did.
    pub banana_share: Option<f64>,
    pub crash_rate: f64,
    pub mean_tiles: f64,
    pub ice_per_tile: f64,
    /// Keyed by room count (FruitRooms) or track length (IcyTrack).
    pub by_size: BTreeMap<u16, GroupStats>,
}

/// Seed of the level stream for suite `index`; shared by every method so
/// evaluations are paired.
pub fn suite_rngs(seed: u64, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut levels = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_E7A1);
    levels.set_stream(2 * index as u64);
    let mut acts = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_E7A1);
    acts.set_stream(2 * index as u64 + 1);
    (levels, acts)
}

pub fn evaluate<E: Domain, T: Scalar>(
    env: &E,
    net: &ActorCritic<T>,
    suite: &EvalSuite<E::Level>,
    index: usize,
    episodes: usize,
    greedy: bool,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_with(env, suite, index, episodes, seed, |e, level, reset_seed, rng| {
        play(e, level, net, greedy, reset_seed, rng)
    })
}

/// Evaluation with a caller-supplied episode runner, e.g. a scripted policy
/// through [`play_with`](super::rollout::play_with).
pub fn evaluate_with<E: Domain>(
    env: &E,
    suite: &EvalSuite<E::Level>,
    index: usize,
    episodes: usize,
    seed: u64,
    mut run: impl FnMut(&E, &E::Level, u64, &mut dyn RngCore) -> Result<EvalEpisode>,
) -> Result<EvalReport> {
    let (mut lrng, mut arng) = suite_rngs(seed, index);
    let mut returns = Vec::with_capacity(episodes);
    let (mut solved, mut apple, mut banana, mut crashes) = (0usize, 0usize, 0usize, 0usize);
    let (mut tiles, mut ice) = (0u64, 0u64);
    let mut groups: BTreeMap<u16, (Vec<f64>, usize)> = BTreeMap::new();
    for _ in 0..episodes {
        let level = suite.generator.sample(&mut lrng);
        let reset_seed = lrng.next_u64();
        let ep = run(env, &level, reset_seed, &mut arng)?;
        returns.push(ep.ret);
        solved += ep.info.solved as usize;
        crashes += ep.info.crashed as usize;
        match ep.info.fruit {
            Some(Fruit::Apple) => apple += 1,
            Some(Fruit::Banana) => banana += 1,
            None => {}
        }
        tiles += ep.info.tiles as u64;
        ice += ep.info.ice_tiles as u64;
        let size = ep.info.rooms.map(u16::from).or(ep.info.length).unwrap_or(0);
        let g = groups.entry(size).or_default();
        g.0.push(ep.ret);
        g.1 += ep.info.solved as usize;
    }
    let s = summarize(&returns);
    let n = episodes.max(1) as f64;
    Ok(EvalReport {
        condition: suite.name.clone(),
        q: suite.q,
        episodes,
        mean_return: s.mean,
        stderr: s.stderr,
        solve_rate: solved as f64 / n,
        apple_fraction: apple as f64 / n,
        banana_fraction: banana as f64 / n,
        no_fruit_fraction: (episodes - apple - banana) as f64 / n,
        banana_share: (apple + banana > 0).then(|| banana as f64 / (apple + banana) as f64),
        crash_rate: crashes as f64 / n,
        mean_tiles: tiles as f64 / n,
        ice_per_tile: if tiles > 0 { ice as f64 / tiles as f64 } else { 0.0 },
        by_size: groups
            .into_iter()
            .map(|(k, (r, sv))| {
                let m = r.iter().sum::<f64>() / r.len() as f64;
                (
                    k,
                    GroupStats {
                        episodes: r.len(),
                        mean_return: m,
                        solve_rate: sv as f64 / r.len() as f64,
                    },
                )
            })
            .collect(),
    })
}
