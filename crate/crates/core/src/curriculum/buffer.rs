//! Top-K level buffer with prioritized, staleness-aware replay.
//!
//! ```text
//! P_replay = (1−ρ)·P_S + ρ·P_C
//! P_S(i) ∝ h(S_i)^(1/β)      h = 1/rank(S_i)  or  h = S_i
//! P_C(i) = (c − C_i) / Σ_j (c − C_j)
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::LevelDescriptor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prioritization {
    #[default]
    Rank,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    /// Probability `p` of replaying instead of drawing a new level.
    pub replay_rate: f64,
    /// Staleness mixing coefficient `ρ`.
    pub staleness: f64,
    /// Temperature `β`.
    pub temperature: f64,
    pub prioritization: Prioritization,
    /// Buffer capacity `K`.
    pub capacity: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            replay_rate: 0.95,
            staleness: 0.3,
            temperature: 0.3,
            prioritization: Prioritization::Rank,
            capacity: 256,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.replay_rate) {
            return Err(Error::config("replay_rate must lie in [0, 1]"));
        }
        if !unit(self.staleness) {
            return Err(Error::config("staleness must lie in [0, 1]"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature must be positive"));
        }
        if self.capacity == 0 {
            return Err(Error::config("capacity must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry<L> {
    pub level: L,
    pub key: String,
    pub score: f64,
    /// Episode count at the last score update.
    pub timestamp: u64,
    /// Insertion sequence number, the rank tie-breaker.
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelBuffer<L> {
    pub capacity: usize,
    entries: Vec<Entry<L>>,
    next_seq: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub probs: Vec<f64>,
    /// Power prioritization with all-zero scores fell back to uniform.
    pub uniform_fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BufferOutcome {
    Inserted,
    Updated { previous_score: f64 },
    Replaced { evicted: String, evicted_score: f64 },
    Rejected { min_support_score: f64 },
}

impl<L: LevelDescriptor> LevelBuffer<L> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        LevelBuffer {
            capacity,
            entries: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry<L>] {
        &self.entries
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.key == key)
    }

    pub fn min_score(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.score).reduce(f64::min)
    }

    /// `P_S` alone.
    pub fn score_distribution(&self, cfg: &ReplayConfig) -> Result<(Vec<f64>, bool)> {
        let n = self.entries.len();
        if n == 0 {
            return Err(Error::contract("replay distribution of an empty buffer"));
        }
        let inv_beta = 1.0 / cfg.temperature;
        let h: Vec<f64> = match cfg.prioritization {
            Prioritization::Rank => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    let (ea, eb) = (&self.entries[a], &self.entries[b]);
                    eb.score.total_cmp(&ea.score).then(ea.seq.cmp(&eb.seq))
                });
                let mut h = vec![0.0; n];
                for (r, &i) in order.iter().enumerate() {
                    h[i] = (1.0 / (r + 1) as f64).powf(inv_beta);
                }
                h
            }
            Prioritization::Power => self.entries.iter().map(|e| e.score.powf(inv_beta)).collect(),
        };
        let total: f64 = h.iter().sum();
        if total > 0.0 && total.is_finite() {
            Ok((h.iter().map(|x| x / total).collect(), false))
        } else {
            log::debug!("all buffer scores are zero; score distribution falls back to uniform");
            Ok((vec![1.0 / n as f64; n], true))
        }
    }

    /// `P_C` alone at episode count `c`.
    pub fn staleness_distribution(&self, episode: u64) -> Vec<f64> {
        let n = self.entries.len();
        let w: Vec<f64> = self
            .entries
            .iter()
            .map(|e| episode.saturating_sub(e.timestamp) as f64)
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter().map(|x| x / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        }
    }

    pub fn replay_distribution(&self, cfg: &ReplayConfig, episode: u64) -> Result<Replay> {
        let (ps, uniform_fallback) = self.score_distribution(cfg)?;
        let pc = self.staleness_distribution(episode);
        let rho = cfg.staleness;
        let probs = ps
            .iter()
            .zip(&pc)
            .map(|(s, c)| (1.0 - rho) * s + rho * c)
            .collect();
        Ok(Replay {
            probs,
            uniform_fallback,
        })
    }

    /// Inserts, updates in place, or replaces the entry of minimal replay
    /// support when the new score beats it.
    pub fn update(&mut self, level: L, score: f64, episode: u64, cfg: &ReplayConfig) -> Result<BufferOutcome> {
        if !(score >= 0.0 && score.is_finite()) {
            return Err(Error::contract(format!("buffer score must be finite and >= 0, got {score}")));
        }
        let key = level.to_line();
        if let Some(i) = self.position(&key) {
            let e = &mut self.entries[i];
            let previous_score = e.score;
            e.score = score;
            e.timestamp = episode;
            return Ok(BufferOutcome::Updated { previous_score });
        }
        let seq = self.next_seq;
        let fresh = Entry {
            level,
            key,
            score,
            timestamp: episode,
            seq,
        };
        if self.entries.len() < self.capacity {
            self.entries.push(fresh);
            self.next_seq += 1;
            return Ok(BufferOutcome::Inserted);
        }
        let probs = self.replay_distribution(cfg, episode)?.probs;
        let mut min_i = 0;
        for i in 1..probs.len() {
            if probs[i] < probs[min_i] {
                min_i = i;
            }
        }
        let min_support_score = self.entries[min_i].score;
        if min_support_score < score {
            self.next_seq += 1;
            let old = std::mem::replace(&mut self.entries[min_i], fresh);
            Ok(BufferOutcome::Replaced {
                evicted: old.key,
                evicted_score: old.score,
            })
        } else {
            Ok(BufferOutcome::Rejected { min_support_score })
        }
    }

    /// Human-readable table: id, score, timestamp, replay probability, level.
    pub fn to_table(&self, cfg: &ReplayConfig, episode: u64) -> String {
        let probs = self
            .replay_distribution(cfg, episode)
            .map(|r| r.probs)
            .unwrap_or_default();
        let mut out = String::from("id\tscore\ttimestamp\tp_replay\tlevel\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i}\t{:.6}\t{}\t{:.6}\t{}",
                e.score,
                e.timestamp,
                probs.get(i).copied().unwrap_or(0.0),
                e.key
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Fruit, FruitRoomsLevel};

    fn lvl(seed: u64) -> FruitRoomsLevel {
        FruitRoomsLevel {
            rooms: 1,
            layout_seed: seed,
            fruit: Fruit::Apple,
        }
    }

    fn cfg(prio: Prioritization, beta: f64, rho: f64, k: usize) -> ReplayConfig {
        ReplayConfig {
            replay_rate: 0.5,
            staleness: rho,
            temperature: beta,
            prioritization: prio,
            capacity: k,
        }
    }

    #[test]
    fn symmetric_entries_are_uniform() {
        let c = cfg(Prioritization::Rank, 0.3, 0.3, 4);
        let mut b = LevelBuffer::new(4);
        b.update(lvl(1), 1.0, 0, &c).unwrap();
        b.update(lvl(2), 1.0, 0, &c).unwrap();
        let c = cfg(Prioritization::Power, 0.3, 0.3, 4);
        assert_eq!(b.replay_distribution(&c, 0).unwrap().probs, vec![0.5, 0.5]);
    }

    #[test]
    fn rank_ties_prefer_earlier_insertion() {
        let c = cfg(Prioritization::Rank, 1.0, 0.0, 4);
        let mut b = LevelBuffer::new(4);
        b.update(lvl(1), 1.0, 0, &c).unwrap();
        b.update(lvl(2), 1.0, 0, &c).unwrap();
        let p = b.replay_distribution(&c, 0).unwrap().probs;
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_level_updates_in_place() {
        let c = cfg(Prioritization::Rank, 1.0, 0.0, 4);
        let mut b = LevelBuffer::new(4);
        b.update(lvl(1), 1.0, 0, &c).unwrap();
        let out = b.update(lvl(1), 4.0, 7, &c).unwrap();
        assert_eq!(out, BufferOutcome::Updated { previous_score: 1.0 });
        assert_eq!(b.len(), 1);
        assert_eq!(b.entries()[0].timestamp, 7);
    }

    #[test]
    fn power_mode_all_zero_falls_back() {
        let c = cfg(Prioritization::Power, 0.5, 0.0, 4);
        let mut b = LevelBuffer::new(4);
        for s in 0..3 {
            b.update(lvl(s), 0.0, 0, &c).unwrap();
        }
        let r = b.replay_distribution(&c, 1).unwrap();
        assert!(r.uniform_fallback);
        assert!(r.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn table_lists_every_entry() {
        let c = cfg(Prioritization::Rank, 1.0, 0.0, 4);
        let mut b = LevelBuffer::new(4);
        b.update(lvl(1), 1.0, 0, &c).unwrap();
        b.update(lvl(2), 2.0, 1, &c).unwrap();
        let t = b.to_table(&c, 2);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("layout=2"));
    }
}
