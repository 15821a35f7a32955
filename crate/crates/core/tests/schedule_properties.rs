//! Properties of the visit weights induced by `alpha_t = (H+1)/(H+t)`.

use proptest::prelude::*;
use ucbq_core::LearningRateSchedule;

const HORIZONS: [usize; 5] = [1, 2, 3, 5, 10];

/// `alpha_t^i` straight from the product definition.
fn literal_weight(schedule: &LearningRateSchedule, i: u64, t: u64) -> f64 {
    let head = if i == 0 {
        1.0
    } else {
        schedule.alpha(i).unwrap()
    };
    ((i + 1)..=t).fold(head, |acc, j| acc * (1.0 - schedule.alpha(j).unwrap()))
}

#[test]
fn weights_partition_unity() {
    for h in HORIZONS {
        let schedule = LearningRateSchedule::horizon_scaled(h);
        let mut stream = schedule.weights_stream();
        assert_eq!(stream.weights()[1..].iter().sum::<f64>(), 0.0);
        for t in 1..=10_000u64 {
            let weights = stream.advance();
            let total: f64 = weights[1..].iter().sum();
            assert!((total - 1.0).abs() <= 1e-10, "H={h} t={t}: {total}");
        }
    }
}

#[test]
fn recurrence_matches_literal_product() {
    for h in HORIZONS {
        let schedule = LearningRateSchedule::horizon_scaled(h);
        for t in (0..=500u64).step_by(7) {
            for i in 0..=t {
                let lhs = schedule.alpha_weight(i, t).unwrap();
                let rhs = literal_weight(&schedule, i, t);
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "H={h} i={i} t={t}: {lhs} vs {rhs}"
                );
            }
        }
    }
}

#[test]
fn harmonic_weights_are_uniform() {
    let schedule = LearningRateSchedule::harmonic(4);
    for t in 1..40u64 {
        for w in &schedule.alpha_weights(t)[1..] {
            assert!((w - 1.0 / t as f64).abs() < 1e-14);
        }
    }
}

proptest! {
    #[test]
    fn batch_weights_match_single_weights(h in 1usize..12, t in 0u64..300) {
        let schedule = LearningRateSchedule::horizon_scaled(h);
        let batch = schedule.alpha_weights(t);
        prop_assert_eq!(batch.len() as u64, t + 1);
        for (i, w) in batch.iter().enumerate() {
            prop_assert!((w - schedule.alpha_weight(i as u64, t).unwrap()).abs() <= 1e-13);
        }
    }

    #[test]
    fn rates_stay_in_unit_interval(h in 1usize..50, t in 1u64..1_000_000) {
        let a = LearningRateSchedule::horizon_scaled(h).alpha(t).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(a <= LearningRateSchedule::horizon_scaled(h).alpha(t.max(2) - 1).unwrap());
    }
}
