use gplr_core::curriculum::{
    plr_episode, BufferOutcome, EpisodeMode, LevelBuffer, Prioritization, ReplayConfig,
};
use gplr_core::env::fruit_rooms::FruitRoomsGenerator;
use gplr_core::env::{Fruit, FruitRoomsLevel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lvl(seed: u64) -> FruitRoomsLevel {
    FruitRoomsLevel {
        rooms: 2,
        layout_seed: seed,
        fruit: Fruit::Banana,
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

fn filled(scores: &[f64], stamps: &[u64], c: &ReplayConfig) -> LevelBuffer<FruitRoomsLevel> {
    let mut b = LevelBuffer::new(c.capacity.max(scores.len()));
    for (i, (&s, &t)) in scores.iter().zip(stamps).enumerate() {
        b.update(lvl(i as u64), s, t, c).unwrap();
    }
    b
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn rank_worked_example() {
    let c = cfg(Prioritization::Rank, 1.0, 0.0, 8);
    let b = filled(&[3.0, 1.0, 2.0], &[0, 0, 0], &c);
    let p = b.replay_distribution(&c, 5).unwrap().probs;
    assert!(close(&p, &[6.0 / 11.0, 2.0 / 11.0, 3.0 / 11.0]), "{p:?}");
}

#[test]
fn staleness_worked_example() {
    let c = cfg(Prioritization::Rank, 1.0, 1.0, 8);
    let b = filled(&[1.0, 1.0], &[0, 2], &c);
    let p = b.replay_distribution(&c, 4).unwrap().probs;
    assert!(close(&p, &[2.0 / 3.0, 1.0 / 3.0]), "{p:?}");
}

#[test]
fn all_fresh_timestamps_give_uniform_staleness() {
    let c = cfg(Prioritization::Rank, 1.0, 1.0, 8);
    let b = filled(&[5.0, 1.0, 2.0], &[4, 4, 4], &c);
    let p = b.replay_distribution(&c, 4).unwrap().probs;
    assert!(close(&p, &[1.0 / 3.0; 3]));
}

#[test]
fn full_buffer_replaces_lowest_score_at_zero_staleness() {
    let c = cfg(Prioritization::Rank, 1.0, 0.0, 2);
    let mut b = filled(&[5.0, 1.0], &[0, 0], &c);
    let out = b.update(lvl(9), 3.0, 1, &c).unwrap();
    assert!(matches!(out, BufferOutcome::Replaced { evicted_score, .. } if evicted_score == 1.0));
    let mut scores: Vec<f64> = b.entries().iter().map(|e| e.score).collect();
    scores.sort_by(f64::total_cmp);
    assert_eq!(scores, vec![3.0, 5.0]);
}

#[test]
fn full_buffer_rejects_weaker_level() {
    let c = cfg(Prioritization::Power, 0.3, 0.3, 2);
    let mut b = filled(&[5.0, 1.0], &[0, 0], &c);
    let before = b.clone();
    let out = b.update(lvl(9), 0.5, 1, &c).unwrap();
    assert!(matches!(out, BufferOutcome::Rejected { .. }));
    assert_eq!(b, before);
}

#[test]
fn replay_rate_extremes_and_concentration() {
    let generator = FruitRoomsGenerator { min_rooms: 1, max_rooms: 3, apple_prob: 0.3 };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut c = cfg(Prioritization::Rank, 0.3, 0.3, 4);
    let b = filled(&[1.0, 2.0], &[0, 0], &c);

    c.replay_rate = 0.0;
    for e in 0..200 {
        assert_eq!(plr_episode(&generator, &b, &c, e, &mut rng).unwrap().1, EpisodeMode::EvaluateNew);
    }
    c.replay_rate = 1.0;
    for e in 0..200 {
        assert_eq!(plr_episode(&generator, &b, &c, e, &mut rng).unwrap().1, EpisodeMode::Replay);
    }
    let empty = LevelBuffer::<FruitRoomsLevel>::new(4);
    assert_eq!(plr_episode(&generator, &empty, &c, 0, &mut rng).unwrap().1, EpisodeMode::EvaluateNew);

    c.replay_rate = 0.5;
    let replays = (0..10_000)
        .filter(|&e| plr_episode(&generator, &b, &c, e, &mut rng).unwrap().1 == EpisodeMode::Replay)
        .count();
    let frac = replays as f64 / 10_000.0;
    assert!((0.48..=0.52).contains(&frac), "replay fraction {frac}");
}

fn arb_cfg() -> impl Strategy<Value = ReplayConfig> {
    (
        prop_oneof![Just(Prioritization::Rank), Just(Prioritization::Power)],
        0.05f64..5.0,
        0.0f64..=1.0,
    )
        .prop_map(|(p, beta, rho)| cfg(p, beta, rho, 64))
}

proptest! {
    #[test]
    fn replay_distribution_is_normalized(
        scores in proptest::collection::vec(0.0f64..100.0, 1..40),
        c in arb_cfg(),
        now in 40u64..200,
    ) {
        let stamps: Vec<u64> = (0..scores.len() as u64).collect();
        let b = filled(&scores, &stamps, &c);
        let p = b.replay_distribution(&c, now).unwrap().probs;
        prop_assert_eq!(p.len(), scores.len());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn rank_prioritization_is_scale_invariant(
        scores in proptest::collection::vec(0.0f64..100.0, 1..40),
        scale in 1e-3f64..1e3,
        beta in 0.05f64..5.0,
    ) {
        let c = cfg(Prioritization::Rank, beta, 0.0, 64);
        let stamps = vec![0; scores.len()];
        let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        let a = filled(&scores, &stamps, &c).score_distribution(&c).unwrap().0;
        let b = filled(&scaled, &stamps, &c).score_distribution(&c).unwrap().0;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn power_prioritization_is_monotone_in_own_score(
        scores in proptest::collection::vec(0.01f64..100.0, 2..20),
        bump in 0.0f64..50.0,
        beta in 0.05f64..5.0,
        which in 0usize..20,
    ) {
        let c = cfg(Prioritization::Power, beta, 0.0, 64);
        let i = which % scores.len();
        let stamps = vec![0; scores.len()];
        let mut raised = scores.clone();
        raised[i] += bump;
        let lo = filled(&scores, &stamps, &c).replay_distribution(&c, 1).unwrap().probs[i];
        let hi = filled(&raised, &stamps, &c).replay_distribution(&c, 1).unwrap().probs[i];
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn evictions_never_drop_a_level_above_the_retained_minimum(
        stream in proptest::collection::vec((0u64..30, 0.0f64..10.0), 1..200),
        prio in prop_oneof![Just(Prioritization::Rank), Just(Prioritization::Power)],
        beta in 0.1f64..3.0,
        k in 1usize..8,
    ) {
        let c = cfg(prio, beta, 0.0, k);
        let mut b = LevelBuffer::new(k);
        for (ep, (id, s)) in stream.into_iter().enumerate() {
            let out = b.update(lvl(id), s, ep as u64, &c).unwrap();
            prop_assert!(b.len() <= k);
            if let BufferOutcome::Replaced { evicted_score, .. } = out {
                prop_assert!(evicted_score <= b.min_score().unwrap());
            }
            let mut keys: Vec<&str> = b.entries().iter().map(|e| e.key.as_str()).collect();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), b.len());
        }
    }
}
