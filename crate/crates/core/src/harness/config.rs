//! Flat experiment configuration.
//!
//! A config file is a flat TOML table. Missing keys take the per-environment
//! defaults, unknown keys are rejected, and the fully resolved table is
//! written next to the run artifacts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curriculum::{Prioritization, ReplayConfig, Scorer};
use crate::env::icy_track::IceRate;
use crate::env::{FruitRoomsConfig, IcyTrackConfig};
use crate::error::{Error, Result};
use crate::grounding::FruitPrior;
use crate::learner::PpoConfig;

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::config(format!(
                        concat!("unknown ", stringify!($name), " `{}`"), s
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Method {
    Dr => "dr",
    Plr => "plr",
    Naive => "naive",
    Samplr => "samplr",
});

keyword_enum!(EnvKind {
    FruitRooms => "fruitrooms",
    IcyTrack => "icytrack",
});

keyword_enum!(Precision {
    F32 => "f32",
    F64 => "f64",
});

impl Method {
    pub fn uses_buffer(self) -> bool {
        self != Method::Dr
    }
}

/// Values given on the command line; each replaces the config entry.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub env: Option<EnvKind>,
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub total_steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub precision: Precision,
    pub total_steps: u64,
    /// Transitions collected between updates (whole episodes, at least this many).
    pub rollout_steps: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_greedy: bool,
    /// Extra fixed-rate evaluation conditions, run at the end of training.
    pub eval_q: Vec<f64>,
    pub checkpoint_interval: u64,
    pub audit: bool,
    /// Also write one metrics record per episode (belief summary included).
    pub log_episodes: bool,

    // ground-truth prior
    pub apple_prob: f64,
    pub ice_alpha: f64,
    pub ice_beta: f64,
    /// When set, the ice rate is this constant instead of Beta-distributed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ice_fixed_q: Option<f64>,

    // fruitrooms
    pub rooms_min: u8,
    pub rooms_max: u8,
    pub reward_apple: f64,
    pub reward_banana: f64,
    pub room_width: u8,
    pub room_height: u8,
    pub step_budget: u32,
    pub kick_success_prob: f64,
    pub kick_cap: u8,

    // icytrack
    pub track_min: u16,
    pub track_max: u16,
    pub eval_track_min: u16,
    pub eval_track_max: u16,
    /// Fixed turn layout for every track; random per level when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_seed: Option<u64>,
    pub v_max: u8,
    pub crash_penalty: f64,
    pub step_cost: f64,
    pub track_reward: f64,
    pub budget_per_tile: f64,

    // learner
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

    // curriculum
    pub replay_rate: f64,
    pub staleness: f64,
    pub temperature: f64,
    pub prioritization: Prioritization,
    pub capacity: usize,
    pub scorer: Scorer,
}

impl ExperimentConfig {
    /// Per-environment defaults at desk scale.
    pub fn defaults(env: EnvKind) -> Self {
        let fr = FruitRoomsConfig::default();
        let it = IcyTrackConfig::default();
        let base = ExperimentConfig {
            method: Method::Samplr,
            env,
            seeds: vec![0],
            out_dir: "runs".into(),
            precision: Precision::F64,
            total_steps: 0,
            rollout_steps: 2048,
            eval_interval: 250_000,
            eval_episodes: 200,
            eval_greedy: false,
            eval_q: Vec::new(),
            checkpoint_interval: 0,
            audit: true,
            log_episodes: false,
            apple_prob: 0.7,
            ice_alpha: 1.0,
            ice_beta: 15.0,
            ice_fixed_q: None,
            rooms_min: 1,
            rooms_max: 4,
            reward_apple: fr.reward_apple,
            reward_banana: fr.reward_banana,
            room_width: fr.width,
            room_height: fr.height,
            step_budget: fr.step_budget,
            kick_success_prob: fr.kick_success_prob,
            kick_cap: fr.kick_cap,
            track_min: 12,
            track_max: 24,
            eval_track_min: 24,
            eval_track_max: 48,
            layout_seed: None,
            v_max: it.v_max,
            crash_penalty: it.crash_penalty,
            step_cost: it.step_cost,
            track_reward: it.track_reward,
            budget_per_tile: it.budget_per_tile,
            gamma: 0.995,
            lambda: 0.95,
            clip: 0.2,
            epochs: 5,
            minibatches: 1,
            lr: 1e-3,
            adam_eps: 1e-5,
            max_grad_norm: 0.5,
            value_coef: 0.5,
            entropy_coef: 0.0,
            hidden: 64,
            value_scale: 1.0,
            replay_rate: 0.95,
            staleness: 0.3,
            temperature: 0.3,
            prioritization: Prioritization::Rank,
            capacity: 256,
            scorer: Scorer::PositiveValueLoss,
        };
        match env {
            EnvKind::FruitRooms => ExperimentConfig {
                total_steps: 3_000_000,
                eval_q: vec![0.0, 0.2, 0.4, 0.6, 0.8],
                ..base
            },
            EnvKind::IcyTrack => ExperimentConfig {
                total_steps: 1_000_000,
                eval_interval: 100_000,
                eval_q: vec![0.2, 0.4, 0.6, 0.8],
                gamma: 0.99,
                lambda: 0.9,
                epochs: 3,
                minibatches: 4,
                value_coef: 1.0,
                value_scale: 100.0,
                replay_rate: 0.5,
                staleness: 0.7,
                temperature: 1.0,
                prioritization: Prioritization::Power,
                capacity: 64,
                ..base
            },
        }
    }

    /// Overlays `table` on the defaults for its environment (`env` key, or
    /// `fallback_env`).
    pub fn from_table(mut table: toml::Table, fallback_env: EnvKind) -> Result<Self> {
        let env = match table.get("env") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::config("`env` must be a string")),
            None => fallback_env,
        };
        table.insert("env".into(), toml::Value::String(env.to_string()));
        let defaults = toml::Table::try_from(Self::defaults(env))
            .map_err(|e| Error::config(format!("serializing defaults: {e}")))?;
        let mut merged = defaults;
        for (k, v) in table {
            merged.insert(k, v);
        }
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config text (possibly empty) with command-line overrides applied
    /// before the defaults are filled in.
    pub fn resolve(text: Option<&str>, o: &Overrides) -> Result<Self> {
        let mut table: toml::Table = match text {
            Some(t) => t.parse().map_err(|e: toml::de::Error| Error::config(e.to_string()))?,
            None => toml::Table::new(),
        };
        if let Some(e) = o.env {
            table.insert("env".into(), e.to_string().into());
        }
        if let Some(m) = o.method {
            table.insert("method".into(), m.to_string().into());
        }
        if let Some(n) = o.total_steps {
            let n = i64::try_from(n).map_err(|_| Error::config("step count too large"))?;
            table.insert("total_steps".into(), n.into());
        }
        if let Some(s) = o.seed {
            let s = i64::try_from(s).map_err(|_| Error::config("seed too large"))?;
            table.insert("seeds".into(), toml::Value::Array(vec![s.into()]));
        }
        if let Some(d) = &o.out_dir {
            table.insert("out_dir".into(), d.clone().into());
        }
        let cfg = Self::from_table(table, EnvKind::FruitRooms)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        Self::from_table(table, EnvKind::FruitRooms)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo().validate()?;
        self.replay().validate()?;
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.rollout_steps == 0 {
            return bad("rollout_steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.apple_prob) {
            return bad("apple_prob must lie in [0, 1]");
        }
        if !(self.ice_alpha > 0.0 && self.ice_beta > 0.0) {
            return bad("ice_alpha and ice_beta must be positive");
        }
        if let Some(q) = self.ice_fixed_q {
            if !(0.0..=1.0).contains(&q) {
                return bad("ice_fixed_q must lie in [0, 1]");
            }
        }
        if self.eval_q.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("eval_q entries must lie in [0, 1]");
        }
        if self.rooms_min == 0 || self.rooms_min > self.rooms_max || self.rooms_max > crate::env::fruit_rooms::MAX_ROOMS {
            return bad("rooms_min..=rooms_max must be a nonempty range within 1..=8");
        }
        if self.reward_apple <= 0.0 || self.reward_banana <= 0.0 {
            return bad("fruit rewards must be positive");
        }
        if !(0.0 < self.kick_success_prob && self.kick_success_prob <= 1.0) {
            return bad("kick_success_prob must lie in (0, 1]");
        }
        let it = self.icy_config();
        if self.track_min < it.min_length || self.track_min > self.track_max {
            return bad("track_min..=track_max must be a nonempty range of valid lengths");
        }
        if self.eval_track_min < it.min_length || self.eval_track_min > self.eval_track_max {
            return bad("eval_track_min..=eval_track_max must be a nonempty range of valid lengths");
        }
        if self.budget_per_tile <= 0.0 || self.v_max == 0 {
            return bad("budget_per_tile and v_max must be positive");
        }
        Ok(())
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            clip: self.clip,
            epochs: self.epochs,
            minibatches: self.minibatches,
            lr: self.lr,
            adam_eps: self.adam_eps,
            max_grad_norm: self.max_grad_norm,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            hidden: self.hidden,
            value_scale: self.value_scale,
        }
    }

    pub fn replay(&self) -> ReplayConfig {
        ReplayConfig {
            replay_rate: self.replay_rate,
            staleness: self.staleness,
            temperature: self.temperature,
            prioritization: self.prioritization,
            capacity: self.capacity,
        }
    }

    pub fn fruit_config(&self) -> FruitRoomsConfig {
        FruitRoomsConfig {
            reward_apple: self.reward_apple,
            reward_banana: self.reward_banana,
            width: self.room_width,
            height: self.room_height,
            step_budget: self.step_budget,
            kick_success_prob: self.kick_success_prob,
            kick_cap: self.kick_cap,
        }
    }

    pub fn icy_config(&self) -> IcyTrackConfig {
        IcyTrackConfig {
            v_max: self.v_max,
            crash_penalty: self.crash_penalty,
            step_cost: self.step_cost,
            track_reward: self.track_reward,
            budget_per_tile: self.budget_per_tile,
            ..IcyTrackConfig::default()
        }
    }

    pub fn fruit_prior(&self) -> FruitPrior {
        FruitPrior {
            apple_prob: self.apple_prob,
        }
    }

    pub fn ice_prior(&self) -> IceRate {
        match self.ice_fixed_q {
            Some(q) => IceRate::Fixed { q },
            None => IceRate::Beta {
                alpha: self.ice_alpha,
                beta: self.ice_beta,
            },
        }
    }
}
