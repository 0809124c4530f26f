//! Per-environment glue: episode statistics, level generators and the
//! evaluation suites built from a config.

use serde::Serialize;

use crate::env::fruit_rooms::FruitRoomsGenerator;
use crate::env::icy_track::{IceRate, IcyTrackGenerator};
use crate::env::{Fruit, FruitRooms, FruitRoomsLevel, FruitRoomsState, IcyTrack, IcyTrackLevel, IcyTrackState, LevelGenerator};

use super::config::ExperimentConfig;
use super::oracle::Enumerable;

/// Outcome statistics of one finished episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EpisodeInfo {
    /// FruitRooms: some fruit eaten. IcyTrack: finish line reached.
    pub solved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fruit: Option<Fruit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rooms: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<u16>,
    /// Track tiles reached.
    pub tiles: u32,
    /// Icy tiles among those reached.
    pub ice_tiles: u32,
    pub crashed: bool,
}

pub struct EvalSuite<L> {
    pub name: String,
    /// Fixed ice or fruit rate of the condition; `None` for the ground truth.
    pub q: Option<f64>,
    pub generator: Box<dyn LevelGenerator<L>>,
}

pub trait Domain: Enumerable + Sized + 'static {
    fn from_config(cfg: &ExperimentConfig) -> Self;
    fn prior(cfg: &ExperimentConfig) -> Self::Prior;
    fn train_generator(cfg: &ExperimentConfig) -> Box<dyn LevelGenerator<Self::Level>>;
    /// Ground-truth suite first, then the fixed-rate conditions of `eval_q`.
    fn eval_suites(cfg: &ExperimentConfig) -> Vec<EvalSuite<Self::Level>>;
    fn info(&self, level: &Self::Level, state: &Self::State) -> EpisodeInfo;
    /// Scalar summary of a level's aleatoric part, averaged over the buffer.
    fn aleatoric_feature(level: &Self::Level) -> f64;
}

impl Domain for FruitRooms {
    fn from_config(cfg: &ExperimentConfig) -> Self {
        FruitRooms::new(cfg.fruit_config())
    }

    fn prior(cfg: &ExperimentConfig) -> Self::Prior {
        cfg.fruit_prior()
    }

    fn train_generator(cfg: &ExperimentConfig) -> Box<dyn LevelGenerator<FruitRoomsLevel>> {
        Box::new(FruitRoomsGenerator {
            min_rooms: cfg.rooms_min,
            max_rooms: cfg.rooms_max,
            apple_prob: cfg.apple_prob,
        })
    }

    fn eval_suites(cfg: &ExperimentConfig) -> Vec<EvalSuite<FruitRoomsLevel>> {
        let suite = |name: String, q: Option<f64>, p: f64| EvalSuite {
            name,
            q,
            generator: Box::new(FruitRoomsGenerator {
                min_rooms: cfg.rooms_min,
                max_rooms: cfg.rooms_max,
                apple_prob: p,
            }) as Box<dyn LevelGenerator<FruitRoomsLevel>>,
        };
        let mut out = vec![suite("ground_truth".into(), None, cfg.apple_prob)];
        out.extend(cfg.eval_q.iter().map(|&q| suite(format!("q={q}"), Some(q), q)));
        out
    }

    fn info(&self, level: &FruitRoomsLevel, s: &FruitRoomsState) -> EpisodeInfo {
        EpisodeInfo {
            solved: s.eaten.is_some(),
            fruit: s.eaten,
            rooms: Some(level.rooms),
            ..Default::default()
        }
    }

    fn aleatoric_feature(level: &FruitRoomsLevel) -> f64 {
        (level.fruit == Fruit::Apple) as u8 as f64
    }
}

impl Domain for IcyTrack {
    fn from_config(cfg: &ExperimentConfig) -> Self {
        IcyTrack::new(cfg.icy_config())
    }

    fn prior(cfg: &ExperimentConfig) -> IceRate {
        cfg.ice_prior()
    }

    fn train_generator(cfg: &ExperimentConfig) -> Box<dyn LevelGenerator<IcyTrackLevel>> {
        Box::new(IcyTrackGenerator {
            min_length: cfg.track_min,
            max_length: cfg.track_max,
            layout_seed: cfg.layout_seed,
            rate: cfg.ice_prior(),
        })
    }

    fn eval_suites(cfg: &ExperimentConfig) -> Vec<EvalSuite<IcyTrackLevel>> {
        let suite = |name: String, q: Option<f64>, rate: IceRate| EvalSuite {
            name,
            q,
            generator: Box::new(IcyTrackGenerator {
                min_length: cfg.eval_track_min,
                max_length: cfg.eval_track_max,
                layout_seed: cfg.layout_seed,
                rate,
            }) as Box<dyn LevelGenerator<IcyTrackLevel>>,
        };
        let mut out = vec![suite("ground_truth".into(), None, cfg.ice_prior())];
        out.extend(cfg.eval_q.iter().map(|&q| suite(format!("q={q}"), Some(q), IceRate::Fixed { q })));
        out
    }

    fn info(&self, level: &IcyTrackLevel, s: &IcyTrackState) -> EpisodeInfo {
        EpisodeInfo {
            solved: s.pos == s.length,
            length: Some(level.length),
            tiles: s.pos as u32,
            ice_tiles: s.n_ice as u32,
            crashed: s.crashed,
            ..Default::default()
        }
    }

    fn aleatoric_feature(level: &IcyTrackLevel) -> f64 {
        level.ice_fraction()
    }
}
