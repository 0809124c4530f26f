use rand::Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::env::{LevelDescriptor, LevelGenerator};
use crate::error::{Error, Result};

use super::buffer::{LevelBuffer, ReplayConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeMode {
    /// Fresh level from the generator; trajectory only scores the level.
    EvaluateNew,
    /// Level drawn from the buffer; trajectory is trained on.
    Replay,
}

/// Picks the next level: replay with probability `p` when the buffer is
/// nonempty, otherwise a new draw from `generator`.
pub fn plr_episode<L, G, R>(
    generator: &G,
    buffer: &LevelBuffer<L>,
    cfg: &ReplayConfig,
    episode: u64,
    rng: &mut R,
) -> Result<(L, EpisodeMode)>
where
    L: LevelDescriptor,
    G: LevelGenerator<L> + ?Sized,
    R: Rng,
{
    let replay = !buffer.is_empty() && rng.random_bool(cfg.replay_rate);
    if !replay {
        return Ok((generator.sample(rng), EpisodeMode::EvaluateNew));
    }
    let dist = buffer.replay_distribution(cfg, episode)?;
    let w = WeightedIndex::new(&dist.probs)
        .map_err(|e| Error::contract(format!("replay distribution: {e}")))?;
    let i = w.sample(rng);
    Ok((buffer.entries()[i].level.clone(), EpisodeMode::Replay))
}
