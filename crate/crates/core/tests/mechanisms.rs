mod common;

use citedtcr::agents::Strategy;
use citedtcr::graph::NodeId;
use citedtcr::peer_prediction::{expected_theta_analytic, pair_curators, verify_strong_truthfulness, JointSignals};
use citedtcr::staking::{odds_ratio, odds_ratio_sign, staking_expected_reward, Sign, StakingScenario};
use citedtcr::stats::{box_summary, spearman};
use common::{mc_theta_mean, random_positive_joint, spearman_oracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pairing_is_uniform_over_other_curators() {
    let curators: Vec<NodeId> = (0..10).map(NodeId).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 100_000;
    let mut hits = [0usize; 10];
    for _ in 0..trials {
        let pairs = pair_curators(&curators, &mut rng).unwrap();
        let (c, p) = pairs[0];
        assert_eq!(c, NodeId(0));
        hits[p.0 as usize] += 1;
    }
    assert_eq!(hits[0], 0);
    for &h in &hits[1..] {
        assert!((h as f64 / trials as f64 - 1.0 / 9.0).abs() < 0.01);
    }
}

#[test]
fn random_joints_are_strongly_truthful() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let joint = random_positive_joint(&mut rng);
        assert!(joint.is_positively_correlated());
        let report = verify_strong_truthfulness(&joint).unwrap();
        assert!(report.holds, "{joint:?}: {:?}", report.argmax);
    }
}

#[test]
fn independent_signals_are_rejected() {
    let joint = JointSignals::independent(0.3, 0.6).unwrap();
    assert!(verify_strong_truthfulness(&joint).is_err());
    for sc in Strategy::CANONICAL {
        for sp in Strategy::CANONICAL {
            assert!(expected_theta_analytic(&joint, &sc, &sp).abs() < 1e-15);
        }
    }
}

#[test]
fn settlement_monte_carlo_tracks_analytic() {
    let joint = JointSignals::new([[0.4, 0.1], [0.15, 0.35]]).unwrap();
    let u = Strategy::Uninformative { p_one: 0.5 };
    for (sc, sp) in [(Strategy::Truthful, Strategy::Truthful), (Strategy::Truthful, u), (Strategy::AlwaysOne, Strategy::Opposite)] {
        let mc = mc_theta_mean(&joint, &sc, &sp, 40_000, 9);
        let exact = expected_theta_analytic(&joint, &sc, &sp);
        assert!((mc - exact).abs() < 0.02, "{sc:?}/{sp:?}: {mc} vs {exact}");
    }
}

#[test]
fn staking_grid_sign_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    use rand::Rng;
    let mut seen = [false; 2];
    for _ in 0..1000 {
        let n = rng.random_range(2u64..200);
        let n_star = rng.random_range(1..n);
        let s = StakingScenario::new(rng.random_range(0.001..0.999), rng.random_range(0.1..100.0), n, n_star, 0.0).unwrap();
        let e = staking_expected_reward(&s).unwrap();
        let sign = odds_ratio_sign(&s).unwrap();
        assert_eq!(Sign::of(e), sign, "{s:?}");
        seen[usize::from(sign == Sign::Positive)] = true;
    }
    assert_eq!(seen, [true, true]);
}

proptest! {
    #[test]
    fn break_even_is_exact(k in 0u32..10, j in 1u64..8, stake in 0.5f64..50.0) {
        // p = n_star / n exactly representable
        let n = 1u64 << (k + 3);
        let n_star = (n / 8 * j).max(1);
        let p = n_star as f64 / n as f64;
        let s = StakingScenario::new(p, stake, n, n_star, 0.0).unwrap();
        prop_assert_eq!(staking_expected_reward(&s).unwrap(), 0.0);
        prop_assert_eq!(odds_ratio_sign(&s).unwrap(), Sign::Zero);
        prop_assert!((odds_ratio(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn any_cost_loses_at_break_even(n in 2u64..500, frac in 0.01f64..0.99, cost in 1e-6f64..10.0) {
        let n_star = ((n as f64 * frac) as u64).clamp(1, n - 1);
        let p = n_star as f64 / n as f64;
        let s = StakingScenario::new(p, 1.0, n, n_star, cost).unwrap();
        prop_assert!(staking_expected_reward(&s).unwrap() < 0.0);
    }

    #[test]
    fn spearman_matches_rank_oracle(pairs in proptest::collection::vec((0u8..5, 0u8..5), 2..10)) {
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        match spearman(&x, &y) {
            Ok(r) => {
                prop_assert!((-1.0..=1.0).contains(&r));
                prop_assert!((r - spearman_oracle(&x, &y)).abs() < 1e-12);
            }
            Err(_) => prop_assert!(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0])),
        }
    }

    #[test]
    fn spearman_is_rank_invariant(x in proptest::collection::vec(-1e3f64..1e3, 3..30)) {
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_summary_is_ordered(v in proptest::collection::vec(-10f64..10.0, 1..40)) {
        let b = box_summary(&v).unwrap();
        prop_assert!(b.whisker_low <= b.q1 + 1e-12);
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(b.q3 <= b.whisker_high + 1e-12);
        let inside = v.iter().filter(|x| (b.whisker_low..=b.whisker_high).contains(x)).count();
        prop_assert_eq!(inside + b.outliers.len(), v.len());
    }
}

#[test]
fn spearman_tied_example() {
    let x = [1.0, 2.0, 2.0, 4.0];
    let y = [1.0, 2.0, 3.0, 4.0];
    let r = spearman(&x, &y).unwrap();
    assert!((r - spearman_oracle(&x, &y)).abs() < 1e-15);
    // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
    assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
}
