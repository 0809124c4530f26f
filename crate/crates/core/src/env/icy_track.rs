//! IcyTrack: a one-dimensional tile track driven with discrete velocity.
//!
//! The car starts at rest on a dry start tile `0`; tiles `1..=L` follow, with
//! tile `L` the finish. Some tiles are turns with a visible speed limit.
//! Each step the car first advances by its current velocity, earning
//! `1000 / L` per newly reached tile and crashing (terminal, `-10`) if it
//! enters a turn faster than the limit. The action then changes velocity by
//! `+1 / 0 / -1` on the tile the car landed on, unless that tile is black ice,
//! where velocity cannot change. Ice is invisible; a tile's ice bit is
//! disclosed once the car reaches it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::codec::{ByteReader, ByteWriter, SimState, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
use super::level_text::{bits_to_string, string_to_bits, Fields};
use super::{Action, Environment, Evidence, LevelDescriptor, LevelGenerator, Observation, StepOutcome};
use crate::error::{Error, Result};

pub const ACTION_ACCELERATE: Action = 0;
pub const ACTION_COAST: Action = 1;
pub const ACTION_BRAKE: Action = 2;
pub const NUM_ACTIONS: usize = 3;
pub const OBS_DIM: usize = 10;

const SNAPSHOT_KIND: u8 = 2;
const TURN_HORIZON: f64 = 12.0;
const LOCAL_HORIZON: f64 = 8.0;

/// Average speed still needed to finish, as a fraction of `v_max`, capped
/// at 2. Scale-free in the track length.
fn required_pace(tiles_left: usize, steps_left: u32, vmax: f64) -> f64 {
    if tiles_left == 0 {
        0.0
    } else if steps_left == 0 {
        2.0
    } else {
        (tiles_left as f64 / (steps_left as f64 * vmax)).min(2.0)
    }
}

/// Latent ice rate plus the per-tile ice bits (index `i` is tile `i + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct IceAssignment {
    pub rate: f64,
    pub tiles: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcyTrackLevel {
    pub length: u16,
    pub layout_seed: u64,
    pub ice: IceAssignment,
}

impl IcyTrackLevel {
    pub fn ice_fraction(&self) -> f64 {
        let n = self.ice.tiles.iter().filter(|&&b| b).count();
        n as f64 / self.ice.tiles.len().max(1) as f64
    }
}

impl LevelDescriptor for IcyTrackLevel {
    type Aleatoric = IceAssignment;

    fn to_line(&self) -> String {
        format!(
            "env=icytrack length={} layout={} rate={} ice={}",
            self.length,
            self.layout_seed,
            self.ice.rate,
            bits_to_string(&self.ice.tiles)
        )
    }

    fn from_line(line: &str) -> Result<Self> {
        let f = Fields::parse(line)?;
        f.expect_only(&["env", "length", "layout", "rate", "ice"])?;
        if f.get("env")? != "icytrack" {
            return Err(Error::decode("not an icytrack level"));
        }
        let length: u16 = f.parse_as("length")?;
        let tiles = string_to_bits(f.get("ice")?)?;
        if tiles.len() != length as usize {
            return Err(Error::decode(format!(
                "ice string has {} tiles, length is {length}",
                tiles.len()
            )));
        }
        let rate: f64 = f.parse_as("rate")?;
        Ok(IcyTrackLevel {
            length,
            layout_seed: f.parse_as("layout")?,
            ice: IceAssignment { rate, tiles },
        })
    }

    fn aleatoric(&self) -> IceAssignment {
        self.ice.clone()
    }

    fn with_aleatoric(&self, theta: IceAssignment) -> Self {
        IcyTrackLevel {
            ice: theta,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcyTrackConfig {
    pub v_max: u8,
    pub crash_penalty: f64,
    pub step_cost: f64,
    /// Total progress reward for the whole track, split evenly over tiles.
    pub track_reward: f64,
    /// Step budget is `ceil(budget_per_tile * L)`.
    pub budget_per_tile: f64,
    pub min_length: u16,
    pub max_length: u16,
}

impl Default for IcyTrackConfig {
    fn default() -> Self {
        IcyTrackConfig {
            v_max: 5,
            crash_penalty: 10.0,
            step_cost: 0.1,
            track_reward: 1000.0,
            budget_per_tile: 0.6,
            min_length: 4,
            max_length: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcyTrackState {
    pub length: u16,
    /// Speed limit per tile (index `i` is tile `i + 1`), `0` when not a turn.
    pub turns: Vec<u8>,
    pub ice: Vec<bool>,
    pub pos: u16,
    pub vel: u8,
    pub steps: u32,
    pub budget: u32,
    pub n_ice: u16,
    pub n_dry: u16,
    pub crashed: bool,
    pub done: bool,
}

impl IcyTrackState {
    /// Tiles `1..=pos` have been reached and their ice bits disclosed.
    pub fn disclosed(&self, index: usize) -> bool {
        index < self.pos as usize
    }

    pub fn evidence(&self) -> Evidence {
        let mut ev = Evidence::new();
        for i in 0..self.pos as usize {
            ev.insert(i, self.ice[i] as u8).expect("fresh evidence");
        }
        ev
    }
}

#[derive(Clone, Debug, Default)]
pub struct IcyTrack {
    pub cfg: IcyTrackConfig,
}

/// Inputs of the observation function; shared with the belief-MDP oracle so
/// both compute bit-identical feature vectors.
#[derive(Clone, Copy, Debug)]
pub struct IcyView<'a> {
    pub turns: &'a [u8],
    pub pos: u16,
    pub vel: u8,
    pub steps: u32,
    pub budget: u32,
    pub n_ice: u16,
    pub n_dry: u16,
}

impl IcyTrack {
    pub fn new(cfg: IcyTrackConfig) -> Self {
        IcyTrack { cfg }
    }

    /// Turn speed limits for a track of `length` tiles.
    pub fn layout(&self, length: u16, layout_seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(layout_seed ^ 0x1C17_4A3C);
        let mut turns = vec![0u8; length as usize];
        let mut tile = rng.random_range(2..=5u32);
        while tile < length as u32 {
            turns[tile as usize - 1] = rng.random_range(1..=3u8);
            tile += rng.random_range(3..=8u32);
        }
        turns
    }

    pub fn budget(&self, length: u16) -> u32 {
        (self.cfg.budget_per_tile * length as f64).ceil() as u32
    }

    pub fn observation(&self, v: IcyView<'_>) -> Observation {
        let length = v.turns.len();
        let vmax = self.cfg.v_max as f64;
        let mut upcoming = v
            .turns
            .iter()
            .enumerate()
            .skip(v.pos as usize)
            .filter(|(_, &lim)| lim > 0)
            .map(|(i, &lim)| ((i + 1 - v.pos as usize) as f64, lim as f64));
        let (d1, l1) = upcoming.next().unwrap_or((TURN_HORIZON, vmax));
        let (d2, l2) = upcoming.next().unwrap_or((TURN_HORIZON, vmax));
        let seen = (v.n_ice + v.n_dry) as f64;
        vec![
            v.vel as f64 / vmax,
            d1.min(TURN_HORIZON) / TURN_HORIZON,
            l1 / vmax,
            d2.min(TURN_HORIZON) / TURN_HORIZON,
            l2 / vmax,
            (v.budget.saturating_sub(v.steps) as f64).min(LOCAL_HORIZON) / LOCAL_HORIZON,
            ((length - v.pos as usize) as f64).min(LOCAL_HORIZON) / LOCAL_HORIZON,
            required_pace(length - v.pos as usize, v.budget.saturating_sub(v.steps), vmax),
            if seen > 0.0 { v.n_ice as f64 / seen } else { 0.0 },
            seen.min(32.0) / 32.0,
        ]
    }

    pub fn initial_state(&self, level: &IcyTrackLevel) -> Result<IcyTrackState> {
        self.validate(level)?;
        Ok(IcyTrackState {
            length: level.length,
            turns: self.layout(level.length, level.layout_seed),
            ice: level.ice.tiles.clone(),
            pos: 0,
            vel: 0,
            steps: 0,
            budget: self.budget(level.length),
            n_ice: 0,
            n_dry: 0,
            crashed: false,
            done: false,
        })
    }
}

impl Environment for IcyTrack {
    type Level = IcyTrackLevel;
    type State = IcyTrackState;
    type Aleatoric = IceAssignment;

    fn name(&self) -> &'static str {
        "icytrack"
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn validate(&self, level: &IcyTrackLevel) -> Result<()> {
        if level.length < self.cfg.min_length || level.length > self.cfg.max_length {
            return Err(Error::construction(format!(
                "track length {} outside [{}, {}]",
                level.length, self.cfg.min_length, self.cfg.max_length
            )));
        }
        if level.ice.tiles.len() != level.length as usize {
            return Err(Error::construction(format!(
                "ice assignment covers {} tiles, track has {}",
                level.ice.tiles.len(),
                level.length
            )));
        }
        if !(0.0..=1.0).contains(&level.ice.rate) {
            return Err(Error::construction(format!(
                "ice rate {} outside [0, 1]",
                level.ice.rate
            )));
        }
        Ok(())
    }

    fn reset(&self, level: &IcyTrackLevel, _seed: u64) -> Result<(IcyTrackState, Observation)> {
        let s = self.initial_state(level)?;
        let o = self.observe(&s);
        Ok((s, o))
    }

    fn step(&self, state: &IcyTrackState, action: Action) -> Result<StepOutcome<IcyTrackState>> {
        if state.done {
            return Err(Error::contract("step called on a terminal IcyTrack state"));
        }
        let delta: i16 = match action {
            ACTION_ACCELERATE => 1,
            ACTION_COAST => 0,
            ACTION_BRAKE => -1,
            _ => return Err(Error::contract(format!("action {action} out of range"))),
        };
        let mut s = state.clone();
        let length = s.length;
        let tile_reward = self.cfg.track_reward / length as f64;
        let mut reward = -self.cfg.step_cost;
        let mut evidence = Evidence::new();
        s.steps += 1;

        let v = s.vel;
        let end = (s.pos as u32 + v as u32).min(length as u32) as u16;
        for tile in s.pos + 1..=end {
            let idx = tile as usize - 1;
            let limit = s.turns[idx];
            if limit > 0 && v > limit {
                s.crashed = true;
                s.done = true;
                reward -= self.cfg.crash_penalty;
                break;
            }
            s.pos = tile;
            reward += tile_reward;
            let icy = s.ice[idx];
            evidence.insert(idx, icy as u8)?;
            if icy {
                s.n_ice += 1;
            } else {
                s.n_dry += 1;
            }
        }
        if !s.crashed {
            if s.pos == length {
                s.done = true;
            } else {
                let grip = s.pos == 0 || !s.ice[s.pos as usize - 1];
                if grip {
                    s.vel = (v as i16 + delta).clamp(0, self.cfg.v_max as i16) as u8;
                }
            }
        }
        if s.steps >= s.budget {
            s.done = true;
        }
        let observation = self.observe(&s);
        let done = s.done;
        Ok(StepOutcome {
            state: s,
            observation,
            reward,
            done,
            evidence,
        })
    }

    fn observe(&self, s: &IcyTrackState) -> Observation {
        self.observation(IcyView {
            turns: &s.turns,
            pos: s.pos,
            vel: s.vel,
            steps: s.steps,
            budget: s.budget,
            n_ice: s.n_ice,
            n_dry: s.n_dry,
        })
    }

    fn is_done(&self, s: &IcyTrackState) -> bool {
        s.done
    }

    fn snapshot(&self, s: &IcyTrackState) -> SimState {
        let mut w = ByteWriter::with_header(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, SNAPSHOT_KIND);
        w.u16(s.length);
        w.bytes(&s.turns);
        w.bytes(&s.ice.iter().map(|&b| b as u8).collect::<Vec<_>>());
        w.u16(s.pos);
        w.u8(s.vel);
        w.u32(s.steps);
        w.u32(s.budget);
        w.u16(s.n_ice);
        w.u16(s.n_dry);
        w.bool(s.crashed);
        w.bool(s.done);
        SimState(w.finish())
    }

    fn restore(&self, snap: &SimState) -> Result<IcyTrackState> {
        let mut r = ByteReader::open(snap.as_bytes(), SNAPSHOT_MAGIC, SNAPSHOT_VERSION, SNAPSHOT_KIND)?;
        let length = r.u16()?;
        let turns = r.bytes()?;
        let ice = r
            .bytes()?
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::decode(format!("invalid ice byte {b}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let s = IcyTrackState {
            length,
            turns,
            ice,
            pos: r.u16()?,
            vel: r.u8()?,
            steps: r.u32()?,
            budget: r.u32()?,
            n_ice: r.u16()?,
            n_dry: r.u16()?,
            crashed: r.bool()?,
            done: r.bool()?,
        };
        r.finish()?;
        if s.turns.len() != length as usize
            || s.ice.len() != length as usize
            || s.pos > length
            || s.vel > self.cfg.v_max
            || (s.n_ice + s.n_dry) != s.pos
        {
            return Err(Error::decode("IcyTrack snapshot fields inconsistent"));
        }
        Ok(s)
    }

    fn set_aleatoric(&self, state: &IcyTrackState, theta: &IceAssignment, evidence: &Evidence) -> Result<IcyTrackState> {
        if theta.tiles.len() != state.length as usize {
            return Err(Error::contract(format!(
                "ice assignment has {} tiles, track has {}",
                theta.tiles.len(),
                state.length
            )));
        }
        for (i, v) in evidence.iter() {
            let proposed = *theta.tiles.get(i).ok_or_else(|| {
                Error::contract(format!("evidence index {i} beyond track length"))
            })? as u8;
            if proposed != v {
                return Err(Error::GroundingConsistency {
                    index: i,
                    disclosed: v,
                    proposed,
                });
            }
        }
        let mut s = state.clone();
        for (i, tile) in s.ice.iter_mut().enumerate() {
            if !state.disclosed(i) && evidence.get(i).is_none() {
                *tile = theta.tiles[i];
            }
        }
        Ok(s)
    }

    fn aleatoric_of(&self, s: &IcyTrackState) -> IceAssignment {
        let n = s.ice.iter().filter(|&&b| b).count();
        IceAssignment {
            rate: n as f64 / s.ice.len().max(1) as f64,
            tiles: s.ice.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IceRate {
    Beta { alpha: f64, beta: f64 },
    Fixed { q: f64 },
}

impl IceRate {
    pub fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        match *self {
            IceRate::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("valid Beta parameters")
                .sample(rng),
            IceRate::Fixed { q } => q,
        }
    }
}

/// Hierarchical ice sampler: `q ~ rate`, then each tile icy with probability
/// `q`.
pub fn sample_ice(rate: &IceRate, length: u16, rng: &mut dyn rand::RngCore) -> IceAssignment {
    let q = rate.sample(rng);
    let tiles = (0..length).map(|_| rng.random_bool(q)).collect();
    IceAssignment { rate: q, tiles }
}

#[derive(Clone, Debug)]
pub struct IcyTrackGenerator {
    pub min_length: u16,
    pub max_length: u16,
    /// Fixed layout for enumerable instances; random per level otherwise.
    pub layout_seed: Option<u64>,
    pub rate: IceRate,
}

impl LevelGenerator<IcyTrackLevel> for IcyTrackGenerator {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> IcyTrackLevel {
        let length = rng.random_range(self.min_length..=self.max_length);
        let layout_seed = match self.layout_seed {
            Some(s) => s,
            None => rng.next_u64(),
        };
        let ice = sample_ice(&self.rate, length, rng);
        IcyTrackLevel {
            length,
            layout_seed,
            ice,
        }
    }
}
