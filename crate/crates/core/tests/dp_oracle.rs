//! The backward-induction solver against exhaustive policy enumeration.

mod common;

use common::{brute_force_optimum, random_mdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucbq_core::{greedy_policy, optimal_values, policy_value, Policy, TieBreak};

#[test]
fn small_mdps_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 40 {
        let (s, a, h) = (
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        if (a as u64).pow((s * h) as u32) > 4096 {
            continue;
        }
        let mdp = random_mdp(&mut rng, s, a, h);
        let tables = optimal_values(&mdp).unwrap();
        for (x, best) in brute_force_optimum(&mdp).into_iter().enumerate() {
            assert!((tables.v_star.get(1, x) - best).abs() <= 1e-9);
        }
        checked += 1;
    }
}

#[test]
fn two_state_two_action_two_step_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mdp = random_mdp(&mut rng, 2, 2, 2);
    let tables = optimal_values(&mdp).unwrap();
    let brute = brute_force_optimum(&mdp);
    for (x, best) in brute.iter().enumerate() {
        assert!((tables.v_star.get(1, x) - best).abs() <= 1e-12);
    }
    for code in 0..16usize {
        let policy =
            Policy::deterministic(2, 2, 2, |h, x| (code >> ((h - 1) * 2 + x)) & 1).unwrap();
        let v = policy_value(&mdp, &policy).unwrap();
        for x in 0..2 {
            assert!(v.get(1, x) <= tables.v_star.get(1, x) + 1e-12);
        }
    }
}

#[test]
fn bellman_consistency_and_value_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let (s, a, h) = (
            rng.random_range(1..=6),
            rng.random_range(1..=4),
            rng.random_range(1..=8),
        );
        let mdp = random_mdp(&mut rng, s, a, h);
        let t = optimal_values(&mdp).unwrap();
        for step in 1..=h {
            for x in 0..s {
                let row_max = t
                    .q_star
                    .row(step, x)
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(t.v_star.get(step, x), row_max);
                for act in 0..a {
                    let q = t.q_star.get(step, x, act);
                    assert!(q >= 0.0 && q <= (h - step + 1) as f64 + 1e-12);
                    let backup: f64 = mdp
                        .transition_row(step, x, act)
                        .iter()
                        .enumerate()
                        .map(|(y, p)| p * t.v_star.get(step + 1, y))
                        .sum();
                    assert!((q - mdp.reward(step, x, act) - backup).abs() <= 1e-12);
                }
            }
        }
        for x in 0..s {
            assert_eq!(t.v_star.get(h + 1, x), 0.0);
        }
    }
}

#[test]
fn greedy_policy_on_q_star_is_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mdp = random_mdp(&mut rng, 4, 3, 5);
        let t = optimal_values(&mdp).unwrap();
        for tie in [TieBreak::LowestIndex, TieBreak::Uniform] {
            let v = policy_value(&mdp, &greedy_policy(&t.q_star, tie)).unwrap();
            for (a, b) in v.as_slice().iter().zip(t.v_star.as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn random_policies_are_dominated() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let (s, a, h) = (
            rng.random_range(1..=5),
            rng.random_range(1..=4),
            rng.random_range(1..=6),
        );
        let mdp = random_mdp(&mut rng, s, a, h);
        let t = optimal_values(&mdp).unwrap();
        let mut probs = Vec::new();
        for _ in 0..h * s {
            let w: Vec<f64> = (0..a).map(|_| rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            probs.extend(w.iter().map(|p| p / total));
        }
        // Renormalization rounding can leave rows a few ulps off 1.
        let policy = Policy::from_probs(h, s, a, probs).unwrap();
        let v = policy_value(&mdp, &policy).unwrap();
        for (vp, vs) in v.as_slice().iter().zip(t.v_star.as_slice()) {
            assert!(*vp <= vs + 1e-9);
        }
    }
}
