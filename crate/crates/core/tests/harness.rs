use std::collections::HashMap;
use std::path::Path;

use gplr_core::curriculum::audit::read_audit;
use gplr_core::curriculum::{AuditEvent, EpisodeMode};
use gplr_core::env::fruit_rooms::scripted_action;
use gplr_core::env::{random_action, Fruit, FruitRooms};
use gplr_core::harness::config::{EnvKind, ExperimentConfig, Method};
use gplr_core::harness::eval::evaluate_with;
use gplr_core::harness::metrics::read_metrics;
use gplr_core::harness::plots::{aggregate, emit_plots, find_runs, EVAL_RETURN_VS_Q, FRUIT_CHOICE, ROOM_CURRICULUM, TRAINING_RETURN};
use gplr_core::harness::rollout::play_with;
use gplr_core::harness::stats::summarize;
use gplr_core::harness::trainer::{AUDIT_FILE, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE};
use gplr_core::harness::{run_experiment, Domain};
use gplr_core::Error;
use serde_json::Value;

fn small(env: EnvKind, method: Method, steps: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(env);
    c.method = method;
    c.total_steps = steps;
    c.rollout_steps = 512;
    c.eval_episodes = 20;
    c.eval_interval = 0;
    c.capacity = 16;
    c
}

#[test]
fn zero_steps_gives_an_eval_only_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(EnvKind::FruitRooms, Method::Dr, 0);
    let s = run_experiment(&cfg, 3, dir.path()).unwrap();
    assert_eq!((s.env_steps, s.episodes), (0, 0));
    assert!(s.updates.is_empty());
    assert_eq!(s.final_evals.len(), 1 + cfg.eval_q.len());
    assert_eq!(s.final_evals[0].condition, "ground_truth");
    assert!(s.final_evals.iter().all(|r| r.episodes == 20));
    let recs = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
    assert!(recs.iter().all(|r| r["kind"] == "final_eval"));
    for f in [CHECKPOINT_FILE, CONFIG_FILE] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let resolved = ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(resolved.seeds, vec![3]);
    assert_eq!(ExperimentConfig { seeds: vec![3], ..cfg }, resolved);
}

#[test]
fn repeated_runs_write_identical_metrics() {
    for (env, method) in [(EnvKind::FruitRooms, Method::Samplr), (EnvKind::IcyTrack, Method::Naive)] {
        let mut cfg = small(env, method, 4000);
        cfg.log_episodes = true;
        cfg.eval_interval = 2000;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg, 11, a.path()).unwrap();
        run_experiment(&cfg, 11, b.path()).unwrap();
        for f in [METRICS_FILE, AUDIT_FILE, CHECKPOINT_FILE] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert!(x == y, "{env} {method}: {f} differs");
        }
    }
}

#[test]
fn samplr_fruit_transitions_match_before_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(EnvKind::FruitRooms, Method::Samplr, 20_000);
    let s = run_experiment(&cfg, 5, dir.path()).unwrap();
    assert!(s.episodes > 20);
    assert_eq!(s.nonterminal_mismatches, 0);
}

#[test]
fn updates_never_use_evaluate_new_episodes() {
    for method in [Method::Plr, Method::Naive, Method::Samplr] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(EnvKind::FruitRooms, method, 15_000);
        cfg.replay_rate = 0.5;
        run_experiment(&cfg, 2, dir.path()).unwrap();
        let events = read_audit(&dir.path().join(AUDIT_FILE)).unwrap();
        let mut modes = HashMap::new();
        let mut updates = 0;
        let mut fresh = 0;
        for ev in events {
            match ev {
                AuditEvent::Episode { episode, mode, .. } => {
                    fresh += (mode == EpisodeMode::EvaluateNew) as usize;
                    modes.insert(episode, mode);
                }
                AuditEvent::Update { episodes, .. } => {
                    updates += 1;
                    assert!(!episodes.is_empty());
                    for e in episodes {
                        assert_eq!(modes[&e], EpisodeMode::Replay, "{method}: update used episode {e}");
                    }
                }
                AuditEvent::Buffer { .. } => {}
            }
        }
        assert!(updates > 0 && fresh > 0, "{method}: {updates} updates, {fresh} new levels");
    }
}

fn episodes(dir: &Path) -> Vec<Value> {
    read_metrics(&dir.join(METRICS_FILE))
        .unwrap()
        .into_iter()
        .filter(|r| r["kind"] == "episode")
        .collect()
}

/// All regimes share the level, reset and action streams, so the first
/// episode (before any buffer or update exists) is identical up to what the
/// regime changes: naive redraws the fruit, samplr adds fictitious rewards.
#[test]
fn regimes_consume_randomness_identically_until_they_diverge() {
    let mut first = HashMap::new();
    for &method in Method::ALL {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(EnvKind::FruitRooms, method, 1);
        cfg.log_episodes = true;
        run_experiment(&cfg, 9, dir.path()).unwrap();
        let eps = episodes(dir.path());
        assert_eq!(eps.len(), 1);
        first.insert(method, eps[0].clone());
    }
    let dr = &first[&Method::Dr];
    let strip = |v: &Value, keys: &[&str]| {
        let mut v = v.clone();
        for k in keys {
            v.as_object_mut().unwrap().remove(*k);
        }
        v
    };
    // the first plr episode only differs from dr by being labelled and untrained
    let plr = &first[&Method::Plr];
    assert_eq!(strip(plr, &["mode", "trained"]), strip(dr, &["mode", "trained"]));
    assert_eq!(plr["mode"], "evaluate_new");
    // samplr plays the same real episode; only the fictitious data and score differ
    let sam = &first[&Method::Samplr];
    let real = ["level", "real_return", "steps", "info"];
    for k in real {
        assert_eq!(sam[k], plr[k], "samplr {k}");
    }
    // naive keeps rooms and layout, drawing only the fruit
    let nv = &first[&Method::Naive];
    let layout = |v: &Value| {
        let s = v["level"].as_str().unwrap().to_string();
        s.split_whitespace().filter(|t| !t.starts_with("fruit=")).collect::<Vec<_>>().join(" ")
    };
    assert_eq!(layout(nv), layout(plr));
}

#[test]
fn random_policy_solves_some_single_room_levels() {
    let mut cfg = ExperimentConfig::defaults(EnvKind::FruitRooms);
    cfg.rooms_max = 1;
    let env = FruitRooms::from_config(&cfg);
    let suites = FruitRooms::eval_suites(&cfg);
    let r = evaluate_with(&env, &suites[0], 0, 200, 1, |e, level, seed, rng| {
        play_with(e, level, seed, rng, |_, _, rng| random_action(e, rng))
    })
    .unwrap();
    assert!(r.solve_rate > 0.0, "{r:?}");
}

#[test]
fn scripted_fruit_policies_hit_their_expected_returns() {
    let cfg = ExperimentConfig::defaults(EnvKind::FruitRooms);
    let env = FruitRooms::from_config(&cfg);
    let suites = FruitRooms::eval_suites(&cfg);
    for (target, want) in [(Fruit::Banana, 3.0), (Fruit::Apple, 2.1)] {
        let mut returns = Vec::new();
        let mut rng = rand_chacha_rng(4);
        for _ in 0..2000 {
            let level = suites[0].generator.sample(&mut rng);
            let ep = play_with(&env, &level, 7, &mut rng, |s, _, _| scripted_action(&env, s, target)).unwrap();
            if ep.info.fruit.is_some() {
                returns.push(ep.ret);
            }
        }
        let s = summarize(&returns);
        assert!(s.n > 1500, "{target:?} reached the fruit {} times", s.n);
        assert!((s.mean - want).abs() <= 3.0 * s.stderr, "{target:?}: {} ± {}", s.mean, s.stderr);
    }
}

fn rand_chacha_rng(seed: u64) -> impl rand::RngCore {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn plot_stderr_matches_hand_computation() {
    // three seeds at one step: 1, 2, 4 → mean 7/3, sd = sqrt(7/3), stderr = sd/√3
    let series = vec![
        ("plr".to_string(), vec![(100.0, 1.0)]),
        ("plr".to_string(), vec![(100.0, 2.0)]),
        ("plr".to_string(), vec![(100.0, 4.0)]),
    ];
    let rows = aggregate(&series);
    assert_eq!(rows.len(), 1);
    assert!((rows[0].mean - 7.0 / 3.0).abs() < 1e-12);
    assert!((rows[0].stderr - (7.0f64 / 3.0).sqrt() / 3f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0].seeds, 3);

    let one = aggregate(&[("dr".to_string(), vec![(1.0, 5.0), (2.0, 6.0)])]);
    assert!(one.iter().all(|r| r.stderr == 0.0 && r.seeds == 1));
    let twin = aggregate(&[
        ("dr".to_string(), vec![(1.0, 5.0), (2.0, 6.0)]),
        ("dr".to_string(), vec![(1.0, 5.0), (2.0, 6.0)]),
    ]);
    assert!(twin.iter().all(|r| r.stderr == 0.0 && r.seeds == 2));
}

#[test]
fn plots_are_written_and_missing_fields_are_named() {
    let root = tempfile::tempdir().unwrap();
    for method in [Method::Plr, Method::Samplr] {
        for seed in [1, 2] {
            let cfg = small(EnvKind::FruitRooms, method, 3000);
            run_experiment(&cfg, seed, &root.path().join(format!("{method}/seed_{seed}"))).unwrap();
        }
    }
    let runs = find_runs(root.path()).unwrap();
    assert_eq!(runs.len(), 4);
    let out = root.path().join("plots");
    let written = emit_plots(&runs, &out).unwrap();
    for name in [TRAINING_RETURN, EVAL_RETURN_VS_Q, FRUIT_CHOICE, ROOM_CURRICULUM] {
        let text = std::fs::read_to_string(&written[name]).unwrap();
        assert!(text.starts_with("step,mean,stderr,method,seeds\n"), "{name}: {text}");
    }
    let text = std::fs::read_to_string(&written[TRAINING_RETURN]).unwrap();
    assert!(text.contains(",samplr:fictitious,2"));

    let m = runs[0].join(METRICS_FILE);
    let broken: String = std::fs::read_to_string(&m)
        .unwrap()
        .lines()
        .map(|l| l.replace("\"train_return\"", "\"renamed\"") + "\n")
        .collect();
    std::fs::write(&m, broken).unwrap();
    match emit_plots(&runs, &out) {
        Err(Error::Schema { field }) => assert_eq!(field, "train_return"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn icy_runs_report_ice_exposure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(EnvKind::IcyTrack, Method::Samplr, 5000);
    let s = run_experiment(&cfg, 1, dir.path()).unwrap();
    assert!(!s.updates.is_empty());
    assert!(s.updates.iter().all(|u| u.ice_per_tile.is_some() && u.mean_rooms.is_none()));
    let names: Vec<_> = s.final_evals.iter().map(|r| r.condition.as_str()).collect();
    assert_eq!(names, ["ground_truth", "q=0.2", "q=0.4", "q=0.6", "q=0.8"]);
    for r in &s.final_evals {
        assert!(r.by_size.keys().all(|&l| (24..=48).contains(&l)));
    }
}
