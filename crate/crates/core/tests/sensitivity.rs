mod common;

use common::{rebalance_round, sensitivity_trial};

#[test]
fn cluster_sums_move_by_at_most_two_clip_bounds() {
    for trial in 0..2000 {
        let worst = sensitivity_trial(trial, 12, 3, 2);
        assert!(worst <= 2.0 + 1e-9, "trial {trial}: change {worst} C");
    }
}

#[test]
fn sensitivity_holds_across_thresholds() {
    for b in 0..=3 {
        for trial in 0..300 {
            let worst = sensitivity_trial(10_000 + trial, 12, 3, b);
            assert!(worst <= 2.0 + 1e-9, "B = {b}, trial {trial}: change {worst} C");
        }
    }
}

#[test]
fn rebalance_invariants_hold_on_random_rounds() {
    for trial in 0..20_000 {
        rebalance_round(trial).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
    }
}
