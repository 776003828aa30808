//! Worked examples of the reduction, lift and robustness arithmetic.

use distill_core::security_bounds::{
    definetti_bound, g_nd, hoeffding_pe_abort, leak_bound, ln_g_nd, localstates_lift, pair_budget,
    postselection_bound, purification_lift, robustness_bound, EpsilonModel, RobustnessInput,
};
use distill_core::DistillError;
use num_bigint::BigUint;

#[test]
fn definetti_examples() {
    let b = definetti_bound(1_000_000, 1_000, 1e-4).unwrap();
    assert!((b.value - 142_829.222_5).abs() < 1e-9 * 142_829.222_5);
    assert!(b.vacuous);
    let tiny = definetti_bound(u64::MAX, 1, 0.0).unwrap();
    assert!(tiny.value < 1e-11 && !tiny.vacuous);
}

#[test]
fn definetti_is_monotone() {
    let base = definetti_bound(10_000, 10, 1e-6).unwrap().value;
    assert!(definetti_bound(10_000, 20, 1e-6).unwrap().value > base);
    assert!(definetti_bound(10_000, 10, 1e-5).unwrap().value > base);
    assert!(definetti_bound(10, 11, 0.0).is_err());
}

#[test]
fn small_postselection_factors() {
    assert_eq!(g_nd(1, 4), BigUint::from(16u32));
    assert_eq!(g_nd(2, 4), BigUint::from(136u32));
    assert_eq!(g_nd(4, 4), BigUint::from(3876u32));
    let b = postselection_bound(1, 1e-8).unwrap();
    assert!((b.value - 16.0 * 4.0 * 2f64.sqrt() * 0.01).abs() < 1e-13);
}

#[test]
fn postselection_is_monotone() {
    let base = postselection_bound(1024, 1e-12).unwrap().value;
    assert!(postselection_bound(2048, 1e-12).unwrap().value > base);
    assert!(postselection_bound(1024, 1e-11).unwrap().value > base);
    assert!(postselection_bound(1024, 1e-12).unwrap().vacuous);
}

#[test]
fn postselection_scaling_exponent() {
    // with ε_P(n) = n^{-b} the bound grows like n^{15 - b/4}
    let b = 8.0;
    let model = EpsilonModel::Fitted { a: 1.0, b };
    let log_bound = |n: u64| postselection_bound(n, model.eval(n, false)).unwrap().log_value;
    let (n1, n2) = (1u64 << 40, 1u64 << 41);
    let slope = (log_bound(n2) - log_bound(n1)) / 2f64.ln();
    assert!((slope - (15.0 - b / 4.0)).abs() < 1e-6, "{slope}");
}

#[test]
fn log_domain_matches_exact_binomial_beyond_threshold() {
    for n in [10_001u64, 50_000, 123_456] {
        let exact = distill_core::security_bounds::ln_big(&g_nd(n, 4));
        assert!((ln_g_nd(n, 4) - exact).abs() < 1e-9 * exact);
    }
}

#[test]
fn lift_examples() {
    assert_eq!(localstates_lift(0.0).unwrap(), 0.0);
    assert!((localstates_lift(0.01).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(purification_lift(0.0).unwrap(), 0.0);
    assert!((purification_lift(0.04).unwrap() - 0.2).abs() < 1e-15);
    let chain = localstates_lift(leak_bound(1e-8).unwrap()).unwrap();
    assert!((chain - 0.05657).abs() < 5e-6);
    let via_purification = localstates_lift(2.0 * purification_lift(1e-8).unwrap()).unwrap();
    assert_eq!(chain, via_purification);
}

#[test]
fn lifts_are_increasing_and_concave() {
    for f in [purification_lift, leak_bound, localstates_lift] {
        let xs: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x).unwrap()).collect();
        for w in ys.windows(3) {
            assert!(w[1] > w[0] && w[2] > w[1]);
            assert!(w[1] - w[0] >= w[2] - w[1]);
        }
    }
}

#[test]
fn estimation_correction_evaluates_at_reduced_size() {
    let model = EpsilonModel::Fitted { a: 2.0, b: 1.0 };
    assert!((model.eval(10_000, true) - 2.0 / 9_900.0).abs() < 1e-18);
    assert_eq!(EpsilonModel::Value { epsilon: 0.3 }.eval(10_000, true), 0.3);
}

#[test]
fn hoeffding_examples() {
    assert!((hoeffding_pe_abort(0.05, 160_000.0).unwrap() - 0.60653).abs() < 5e-6);
    assert!(hoeffding_pe_abort(50.0, 160_000.0).unwrap() == 0.0);
    let mut last = 1.0;
    for k in [1e2, 1e4, 1e6, 1e8] {
        let v = hoeffding_pe_abort(0.05, k).unwrap();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn pair_budget_examples() {
    let b = pair_budget(3, 5.0).unwrap();
    assert_eq!((b.c, b.distillation_pairs), (160.0, 1280.0));
    assert_eq!(b.k_ceil, 1317);
    assert!((b.k - b.k.sqrt() - 1280.0).abs() < 1e-9);
    let b = pair_budget(1, 1.0).unwrap();
    assert_eq!((b.c, b.distillation_pairs), (8.0, 16.0));
}

#[test]
fn robustness_example_evaluates_both_readings() {
    // k = 10⁶ and ξ = 20 do not satisfy k − √k = ξ·2^{2M+2} together
    assert!(matches!(RobustnessInput::new(0.98, 0.52, 1e6, 5, 20.0), Err(DistillError::Precondition(_))));
    let by_pairs = robustness_bound(&RobustnessInput::from_pairs(0.98, 0.52, 1e6, 5).unwrap()).unwrap();
    let by_budget = robustness_bound(&RobustnessInput::from_budget(0.98, 0.52, 5, 20.0).unwrap()).unwrap();
    for b in [&by_pairs, &by_budget] {
        assert!(b.value.is_finite() && b.value > 0.0);
    }
    let gap: f64 = 3.0 * 0.98 + 1.0 - 4.0 * 0.52;
    let expected = (-gap * gap * 1000.0 / 128.0).exp() + 5.0 * (-(1e6 - 1e3) / 4096.0f64).exp();
    assert!((by_pairs.value - expected).abs() < 1e-15);
    assert!((by_budget.distillation_term - 5.0 * (-20.0f64).exp()).abs() < 1e-20);
}

#[test]
fn robustness_vanishes_for_large_budgets() {
    let mut last = f64::INFINITY;
    for xi in [1.0, 10.0, 100.0, 1e4] {
        let b = robustness_bound(&RobustnessInput::from_budget(0.98, 0.52, 5, xi).unwrap()).unwrap();
        assert!(b.value < last, "ξ = {xi}");
        last = b.value;
    }
    assert!(last < 1e-70);
}

#[test]
fn per_round_chain_is_dominated_by_last_round() {
    for (m, xi) in [(1, 1.0), (3, 5.0), (5, 20.0)] {
        let b = robustness_bound(&RobustnessInput::from_budget(0.98, 0.52, m, xi).unwrap()).unwrap();
        let last = *b.per_round.last().unwrap();
        assert!((last - (-xi).exp()).abs() < 1e-15 * last.max(1e-300));
        assert!((last - (-b.c * 2f64.powi(-(m as i32 + 2))).exp()).abs() < 1e-15);
        assert!(b.per_round.iter().all(|&x| x <= last));
        assert!(b.per_round.iter().sum::<f64>() <= b.distillation_term * (1.0 + 1e-15));
    }
}

#[test]
fn undistillable_channel_is_a_distinct_result() {
    let input = RobustnessInput::from_budget(0.3, 0.52, 3, 5.0).unwrap();
    match robustness_bound(&input) {
        Err(DistillError::Undistillable { beta, threshold }) => {
            assert_eq!(beta, 0.3);
            assert!((threshold - (4.0 * 0.52 - 1.0) / 3.0).abs() < 1e-15);
        }
        other => panic!("expected the undistillable result, got {other:?}"),
    }
}
