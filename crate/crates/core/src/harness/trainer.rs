//! Training loop shared by every curriculum method.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curriculum::{plr_episode, AuditEvent, AuditLog, BufferOutcome, EpisodeMode, LevelBuffer};
use crate::env::{Fruit, FruitRooms, IcyTrack, LevelDescriptor};
use crate::error::{Error, Result};
use crate::grounding::{naive_ground, BeliefSummary};
use crate::learner::network::Shape;
use crate::learner::{checkpoint, ppo_update, PolicyParams, TrajectoryBatch, UpdateStats};
use crate::scalar::Scalar;

use super::config::{EnvKind, ExperimentConfig, Method, Precision};
use super::domain::{Domain, EpisodeInfo};
use super::eval::{evaluate, EvalReport};
use super::metrics::MetricsWriter;
use super::rollout::{run_episode, RolloutSpec};

/// Independent random streams of one run.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Level = 2,
    Reset = 3,
    Act = 4,
    Fictitious = 5,
    Ground = 6,
    Update = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: u64,
    /// Mean real return of every episode since the previous update.
    pub train_return: f64,
    /// Mean real return of the episodes trained on.
    pub trained_return: f64,
    /// Mean fictitious return of the episodes trained on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fict_return: Option<f64>,
    pub trained_episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub buffer_size: usize,
    pub buffer_mean_score: f64,
    /// Mean aleatoric feature over buffer levels (apple indicator or ice
    /// fraction).
    pub buffer_aleatoric_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apple_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub banana_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rooms: Option<f64>,
    /// Icy tiles per tile in the experience trained on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ice_per_tile: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct EvalRecord<'a> {
    env_steps: u64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

#[derive(Clone, Debug, Serialize)]
struct EpisodeRecord<'a> {
    episode: u64,
    env_steps: u64,
    mode: Option<EpisodeMode>,
    level: String,
    trained: bool,
    score: f64,
    real_return: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fict_return: Option<f64>,
    steps: usize,
    nonterminal_mismatches: usize,
    info: &'a EpisodeInfo,
    belief: &'a BeliefSummary,
}

#[derive(Clone, Debug, Serialize)]
struct DivergenceRecord {
    env_steps: u64,
    update: u64,
    loss: f64,
    diagnostics: String,
}

/// What a finished run leaves behind, besides the files in its directory.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub seed: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub updates: Vec<UpdateRecord>,
    pub final_evals: Vec<EvalReport>,
    /// Summed over all samplr episodes; zero when the method does not
    /// simulate fictitious transitions.
    pub nonterminal_mismatches: usize,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const EVAL_FILE: &str = "eval.json";
pub const BUFFER_FILE: &str = "buffer.tsv";

/// Trains `cfg.method` on `cfg.env` with one seed, writing every artifact
/// under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    match (cfg.env, cfg.precision) {
        (EnvKind::FruitRooms, Precision::F32) => train::<FruitRooms, f32>(cfg, seed, out_dir),
        (EnvKind::FruitRooms, Precision::F64) => train::<FruitRooms, f64>(cfg, seed, out_dir),
        (EnvKind::IcyTrack, Precision::F32) => train::<IcyTrack, f32>(cfg, seed, out_dir),
        (EnvKind::IcyTrack, Precision::F64) => train::<IcyTrack, f64>(cfg, seed, out_dir),
    }
}

#[derive(Default)]
struct Window {
    returns: Vec<f64>,
    trained_returns: Vec<f64>,
    fict_returns: Vec<f64>,
    apple: usize,
    banana: usize,
    rooms: Vec<f64>,
    tiles: u64,
    ice: u64,
    episodes: Vec<u64>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn train<E: Domain, T: Scalar>(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let env = E::from_config(cfg);
    let prior = E::prior(cfg);
    let generator = E::train_generator(cfg);
    let suites = E::eval_suites(cfg);
    let ppo = cfg.ppo();
    let replay = cfg.replay();
    let method = cfg.method;
    let shape = Shape {
        obs_dim: env.obs_dim(),
        hidden: ppo.hidden,
        actions: env.num_actions(),
    };

    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut level_rng = stream_rng(seed, Stream::Level);
    let mut reset_rng = stream_rng(seed, Stream::Reset);
    let mut act_rng = stream_rng(seed, Stream::Act);
    let mut fict_rng = stream_rng(seed, Stream::Fictitious);
    let mut ground_rng = stream_rng(seed, Stream::Ground);
    let mut update_rng = stream_rng(seed, Stream::Update);

    let mut params = PolicyParams::<T>::new(shape, &ppo, &mut init_rng);
    let mut buffer: LevelBuffer<E::Level> = LevelBuffer::new(replay.capacity);
    let mut metrics = MetricsWriter::create(&out_dir.join(METRICS_FILE))?;
    let mut audit = if cfg.audit {
        AuditLog::to_file(&out_dir.join(AUDIT_FILE), false)?
    } else {
        AuditLog::disabled()
    };
    let spec = RolloutSpec {
        gamma: ppo.gamma,
        lambda: ppo.lambda,
        scorer: cfg.scorer,
        fictitious: method == Method::Samplr,
    };

    let mut summary = RunSummary {
        seed,
        checkpoint: out_dir.join(CHECKPOINT_FILE),
        metrics: out_dir.join(METRICS_FILE),
        ..Default::default()
    };
    let mut pending = TrajectoryBatch::<T>::new(shape.obs_dim);
    let mut window = Window::default();
    let mut env_steps = 0u64;
    let mut episode = 0u64;
    let mut update = 0u64;
    let mut next_eval = if cfg.eval_interval > 0 { cfg.eval_interval } else { u64::MAX };
    let mut next_ckpt = if cfg.checkpoint_interval > 0 {
        cfg.checkpoint_interval
    } else {
        u64::MAX
    };

    while env_steps < cfg.total_steps {
        let (level, mode) = if method.uses_buffer() {
            let (l, m) = plr_episode(generator.as_ref(), &buffer, &replay, episode, &mut level_rng)?;
            (l, Some(m))
        } else {
            (generator.sample(&mut level_rng), None)
        };
        let played = if method == Method::Naive {
            naive_ground(&env, &level, &prior, &mut ground_rng)
        } else {
            level.clone()
        };
        let reset_seed = reset_rng.next_u64();
        let ro = run_episode(
            &env,
            &played,
            &params.net,
            &prior,
            spec,
            reset_seed,
            &mut act_rng,
            &mut fict_rng,
        )?;
        env_steps += ro.steps as u64;
        summary.nonterminal_mismatches += ro.nonterminal_mismatches;
        let trained = mode != Some(EpisodeMode::EvaluateNew);
        let key = level.to_line();

        if let Some(m) = mode {
            audit.record(AuditEvent::Episode {
                episode,
                mode: m,
                level: key.clone(),
                score: Some(ro.score),
            })?;
            let outcome = buffer.update(level.clone(), ro.score, episode, &replay)?;
            let (name, evicted, evicted_score) = match &outcome {
                BufferOutcome::Inserted => ("inserted", None, None),
                BufferOutcome::Updated { .. } => ("updated", None, None),
                BufferOutcome::Replaced { evicted, evicted_score } => {
                    ("replaced", Some(evicted.clone()), Some(*evicted_score))
                }
                BufferOutcome::Rejected { .. } => ("rejected", None, None),
            };
            audit.record(AuditEvent::Buffer {
                episode,
                level: key.clone(),
                score: ro.score,
                outcome: name.into(),
                evicted,
                evicted_score,
                min_retained: buffer.min_score(),
            })?;
        }

        if cfg.log_episodes {
            metrics.write(
                "episode",
                &EpisodeRecord {
                    episode,
                    env_steps,
                    mode,
                    level: played.to_line(),
                    trained,
                    score: ro.score,
                    real_return: ro.real_return,
                    fict_return: ro.fict_return,
                    steps: ro.steps,
                    nonterminal_mismatches: ro.nonterminal_mismatches,
                    info: &ro.info,
                    belief: &ro.belief,
                },
            )?;
        }

        window.returns.push(ro.real_return);
        if trained {
            window.trained_returns.push(ro.real_return);
            if let Some(f) = ro.fict_return {
                window.fict_returns.push(f);
            }
            match ro.info.fruit {
                Some(Fruit::Apple) => window.apple += 1,
                Some(Fruit::Banana) => window.banana += 1,
                None => {}
            }
            if let Some(r) = ro.info.rooms {
                window.rooms.push(r as f64);
            }
            window.tiles += ro.info.tiles as u64;
            window.ice += if spec.fictitious {
                ro.fict_ice_tiles as u64
            } else {
                ro.info.ice_tiles as u64
            };
            window.episodes.push(episode);
            pending.extend(&ro.batch);
        }
        episode += 1;

        if pending.len() >= cfg.rollout_steps {
            let stats = match ppo_update(&mut params, &pending, &ppo, &mut update_rng) {
                Ok(s) => s,
                Err(e) => return Err(diverged(e, &params, &mut metrics, out_dir, env_steps, update)),
            };
            update += 1;
            audit.record(AuditEvent::Update {
                update,
                episodes: std::mem::take(&mut window.episodes),
                samples: pending.len(),
            })?;
            let rec = update_record::<E>(update, env_steps, episode, &window, &stats, &buffer);
            metrics.write("update", &rec)?;
            summary.updates.push(rec);
            window = Window::default();
            pending = TrajectoryBatch::new(shape.obs_dim);
        }

        if env_steps >= next_eval {
            while next_eval <= env_steps {
                next_eval = next_eval.saturating_add(cfg.eval_interval);
            }
            let report = evaluate(&env, &params.net, &suites[0], 0, cfg.eval_episodes, cfg.eval_greedy, seed)?;
            metrics.write("eval", &EvalRecord { env_steps, report: &report })?;
        }
        if env_steps >= next_ckpt {
            while next_ckpt <= env_steps {
                next_ckpt = next_ckpt.saturating_add(cfg.checkpoint_interval);
            }
            let dir = out_dir.join("checkpoints");
            fs::create_dir_all(&dir)?;
            checkpoint::save(&params, &dir.join(format!("step_{env_steps}.bin")))?;
        }
    }

    for (i, suite) in suites.iter().enumerate() {
        let report = evaluate(&env, &params.net, suite, i, cfg.eval_episodes, cfg.eval_greedy, seed)?;
        metrics.write("final_eval", &EvalRecord { env_steps, report: &report })?;
        summary.final_evals.push(report);
    }
    metrics.flush()?;
    audit.flush()?;

    checkpoint::save(&params, &summary.checkpoint)?;
    let mut resolved = cfg.clone();
    resolved.seeds = vec![seed];
    fs::write(out_dir.join(CONFIG_FILE), resolved.to_toml())?;
    fs::write(out_dir.join(EVAL_FILE), serde_json::to_string_pretty(&summary.final_evals)?)?;
    if method.uses_buffer() {
        fs::write(out_dir.join(BUFFER_FILE), buffer.to_table(&replay, episode))?;
    }
    summary.env_steps = env_steps;
    summary.episodes = episode;
    Ok(summary)
}

fn update_record<E: Domain>(
    update: u64,
    env_steps: u64,
    episodes: u64,
    w: &Window,
    stats: &UpdateStats,
    buffer: &LevelBuffer<E::Level>,
) -> UpdateRecord {
    let entries = buffer.entries();
    let fruit = w.apple + w.banana;
    let is_fruit = !w.rooms.is_empty();
    UpdateRecord {
        update,
        env_steps,
        episodes,
        train_return: mean(&w.returns),
        trained_return: mean(&w.trained_returns),
        fict_return: (!w.fict_returns.is_empty()).then(|| mean(&w.fict_returns)),
        trained_episodes: w.trained_returns.len(),
        policy_loss: stats.policy_loss,
        value_loss: stats.value_loss,
        entropy: stats.entropy,
        grad_norm: stats.grad_norm,
        approx_kl: stats.approx_kl,
        clip_fraction: stats.clip_fraction,
        buffer_size: entries.len(),
        buffer_mean_score: mean(&entries.iter().map(|e| e.score).collect::<Vec<_>>()),
        buffer_aleatoric_mean: mean(&entries.iter().map(|e| E::aleatoric_feature(&e.level)).collect::<Vec<_>>()),
        apple_fraction: (is_fruit && fruit > 0).then(|| w.apple as f64 / fruit as f64),
        banana_fraction: (is_fruit && fruit > 0).then(|| w.banana as f64 / fruit as f64),
        mean_rooms: is_fruit.then(|| mean(&w.rooms)),
        ice_per_tile: (!is_fruit && w.tiles > 0).then(|| w.ice as f64 / w.tiles as f64),
    }
}

/// Saves the last parameters and a diagnostic record, then hands back the
/// error.
fn diverged<T: Scalar>(
    err: Error,
    params: &PolicyParams<T>,
    metrics: &mut MetricsWriter,
    out_dir: &Path,
    env_steps: u64,
    update: u64,
) -> Error {
    let (loss, diagnostics) = match &err {
        Error::Divergence { loss, diagnostics } => (*loss, diagnostics.clone()),
        other => (f64::NAN, other.to_string()),
    };
    let _ = metrics.write(
        "divergence",
        &DivergenceRecord {
            env_steps,
            update,
            loss: if loss.is_finite() { loss } else { f64::MAX },
            diagnostics,
        },
    );
    let _ = metrics.flush();
    let _ = checkpoint::save(params, &out_dir.join(CHECKPOINT_FILE));
    match err {
        Error::Numeric { .. } => Error::Divergence {
            loss,
            diagnostics: err.to_string(),
        },
        e => e,
    }
}

/// Evaluates a saved policy on every suite of `cfg`.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, seed: u64, checkpoint_path: &Path) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    match (cfg.env, cfg.precision) {
        (EnvKind::FruitRooms, Precision::F32) => eval_all::<FruitRooms, f32>(cfg, seed, checkpoint_path),
        (EnvKind::FruitRooms, Precision::F64) => eval_all::<FruitRooms, f64>(cfg, seed, checkpoint_path),
        (EnvKind::IcyTrack, Precision::F32) => eval_all::<IcyTrack, f32>(cfg, seed, checkpoint_path),
        (EnvKind::IcyTrack, Precision::F64) => eval_all::<IcyTrack, f64>(cfg, seed, checkpoint_path),
    }
}

fn eval_all<E: Domain, T: Scalar>(cfg: &ExperimentConfig, seed: u64, path: &Path) -> Result<Vec<EvalReport>> {
    let env = E::from_config(cfg);
    let params = checkpoint::load::<T>(path)?;
    if params.net.shape.obs_dim != env.obs_dim() || params.net.shape.actions != env.num_actions() {
        return Err(Error::config(format!(
            "checkpoint shape {:?} does not fit environment {}",
            params.net.shape, cfg.env
        )));
    }
    E::eval_suites(cfg)
        .iter()
        .enumerate()
        .map(|(i, s)| evaluate(&env, &params.net, s, i, cfg.eval_episodes, cfg.eval_greedy, seed))
        .collect()
}
