use gplr_core::env::icy_track::IceRate;
use gplr_core::env::{Environment, Fruit, FruitRooms, FruitRoomsLevel, IceAssignment, IcyTrack, IcyTrackLevel};
use gplr_core::grounding::FruitPrior;
use gplr_core::harness::oracle::{
    build_belief_mdp, policy_value, value_iteration, DEFAULT_STATE_LIMIT, RESIDUAL_TOLERANCE,
};
use gplr_core::Error;

fn final_room_initial(env: &FruitRooms, layouts: std::ops::Range<u64>) -> Vec<(<FruitRooms as Environment>::State, f64)> {
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
            init.push((env.initial_state(&level, row).unwrap(), 1.0 / n));
        }
    }
    init
}

#[test]
fn fruit_choice_sub_mdp_optimum() {
    let env = FruitRooms::default();
    for (q, want) in [(0.7, 3.0), (0.9, 2.7), (10.0 / 13.0, 30.0 / 13.0)] {
        let mdp = build_belief_mdp(&env, &FruitPrior { apple_prob: q }, &final_room_initial(&env, 0..3), DEFAULT_STATE_LIMIT).unwrap();
        let r = value_iteration(&mdp, 1.0).unwrap();
        assert!((r.v_star - want).abs() < 1e-9, "q={q}: {}", r.v_star);
        assert!(r.residual <= RESIDUAL_TOLERANCE);
        assert!(r.greedy_stable);
    }
}

#[test]
fn fixed_fruit_policies_match_closed_form() {
    use gplr_core::env::fruit_rooms::scripted_action;
    let env = FruitRooms::default();
    let mdp = build_belief_mdp(&env, &FruitPrior { apple_prob: 0.7 }, &final_room_initial(&env, 0..3), DEFAULT_STATE_LIMIT).unwrap();
    for (target, want) in [(Fruit::Apple, 2.1), (Fruit::Banana, 3.0)] {
        let v = policy_value(&mdp, 1.0, |s| {
            let mut p = vec![0.0; 6];
            p[scripted_action(&env, &mdp.states[s], target)] = 1.0;
            p
        });
        assert!((v - want).abs() < 1e-9, "{target:?}: {v}");
    }
}

fn six_tile(prior_layout: u64) -> (IcyTrack, IcyTrackLevel) {
    let env = IcyTrack::default();
    let level = IcyTrackLevel {
        length: 6,
        layout_seed: prior_layout,
        ice: IceAssignment {
            rate: 0.0,
            tiles: vec![false; 6],
        },
    };
    (env, level)
}

/// Brute force over every ice assignment and every open-loop action sequence
/// is an upper bound; the belief optimum must lie between the best open-loop
/// plan and the clairvoyant optimum.
#[test]
fn icy_belief_optimum_is_bracketed() {
    let (env, level) = six_tile(7);
    let prior = IceRate::Beta { alpha: 1.0, beta: 3.0 };
    let init = vec![(env.initial_state(&level).unwrap(), 1.0)];
    let mdp = build_belief_mdp(&env, &prior, &init, DEFAULT_STATE_LIMIT).unwrap();
    let r = value_iteration(&mdp, 1.0).unwrap();
    assert!(r.residual <= RESIDUAL_TOLERANCE);
    assert!(r.greedy_stable);

    let budget = env.budget(6) as usize;
    let plans: Vec<Vec<usize>> = (0..3usize.pow(budget as u32))
        .map(|mut c| {
            (0..budget)
                .map(|_| {
                    let a = c % 3;
                    c /= 3;
                    a
                })
                .collect()
        })
        .collect();
    let run = |tiles: &[bool], plan: &[usize]| {
        let lvl = IcyTrackLevel {
            ice: IceAssignment {
                rate: 0.0,
                tiles: tiles.to_vec(),
            },
            ..level.clone()
        };
        let (mut s, _) = env.reset(&lvl, 0).unwrap();
        let mut total = 0.0;
        for &a in plan {
            if s.done {
                break;
            }
            let out = env.step(&s, a).unwrap();
            total += out.reward;
            s = out.state;
        }
        total
    };
    let weight = |tiles: &[bool]| {
        let k = tiles.iter().filter(|&&t| t).count() as f64;
        let m = tiles.len() as f64 - k;
        (statrs::function::beta::ln_beta(1.0 + k, 3.0 + m) - statrs::function::beta::ln_beta(1.0, 3.0)).exp()
    };
    let mut open_loop_best = f64::NEG_INFINITY;
    for plan in &plans {
        let mut v = 0.0;
        for mask in 0..64u32 {
            let tiles: Vec<bool> = (0..6).map(|i| mask >> i & 1 == 1).collect();
            v += weight(&tiles) * run(&tiles, plan);
        }
        open_loop_best = open_loop_best.max(v);
    }
    let mut clairvoyant = 0.0;
    for mask in 0..64u32 {
        let tiles: Vec<bool> = (0..6).map(|i| mask >> i & 1 == 1).collect();
        let best = plans.iter().map(|p| run(&tiles, p)).fold(f64::NEG_INFINITY, f64::max);
        clairvoyant += weight(&tiles) * best;
    }
    assert!(r.v_star >= open_loop_best - 1e-9, "{} < {open_loop_best}", r.v_star);
    assert!(r.v_star <= clairvoyant + 1e-9, "{} > {clairvoyant}", r.v_star);
}

#[test]
fn oversized_instances_fail_explicitly() {
    let env = FruitRooms::default();
    let err = build_belief_mdp(&env, &FruitPrior { apple_prob: 0.7 }, &final_room_initial(&env, 0..3), 100).unwrap_err();
    assert!(matches!(err, Error::StateSpaceOverflow { limit: 100 }));
}
