use lka_core::asymptotics::{
    clt_check, clt_default_sets, primary_convergence, synthetic_loop, synthetic_replicates,
    FiniteReadout, Rate, SyntheticScenario,
};
use lka_core::lka::fundamental_limit_features;
use lka_core::numeric::tilt::{one_mass, one_var};
use lka_core::scenarios::{
    one_tilt_for_mean, CoinCubeScenario, DecimalScenario, PollScenario, ScenarioKind, TreeNode,
    TreeScenario,
};
use lka_core::worlds::{tv_distance, BeliefMeasure, TruthSet, WorldSpace};
use lka_core::LkaError;
use proptest::prelude::*;

fn coin(x0: &[f64], features: usize) -> CoinCubeScenario {
    CoinCubeScenario {
        r: x0.len(),
        features_per_coord: features,
        x0: x0.to_vec(),
        truth: None,
    }
}

#[test]
fn one_feature_coin_converges_at_root_n() {
    let s = ScenarioKind::Coin(coin(&[0.3, 0.7], 1));
    let rep = primary_convergence(&s, &[100, 1_000, 10_000, 100_000], 200, 7).unwrap();
    assert_eq!(rep.rate, Rate::RootN);
    assert_eq!(rep.quantity, "tv_to_Pinf");
    assert!(rep
        .tv_errors
        .iter()
        .flatten()
        .all(|v| (0.0..=1.0).contains(v)));
    assert!(
        rep.medians.windows(2).all(|w| w[1] < w[0]),
        "{:?}",
        rep.medians
    );
    assert!((-0.6..=-0.4).contains(&rep.slope), "slope {}", rep.slope);
    assert!(
        rep.slope_ci[0] <= rep.slope && rep.slope <= rep.slope_ci[1],
        "{:?}",
        rep.slope_ci
    );
    assert_eq!(rep.records().len(), 4 * 200);
}

#[test]
fn one_feature_limit_is_not_a_point_mass() {
    for x0 in [[0.3, 0.7], [0.5, 0.5], [0.1, 0.6]] {
        let rep = primary_convergence(&ScenarioKind::Coin(coin(&x0, 1)), &[10, 20], 2, 0).unwrap();
        assert!(
            rep.pinf_tv_to_delta > 0.5,
            "{x0:?}: {}",
            rep.pinf_tv_to_delta
        );
    }
}

#[test]
fn two_feature_coin_concentrates_on_the_ball() {
    let s = ScenarioKind::Coin(coin(&[0.3, 0.7], 2));
    let rep = primary_convergence(&s, &[100, 1_000, 10_000], 20, 3).unwrap();
    assert_eq!(rep.rate, Rate::PointMass);
    assert_eq!(rep.quantity, "tv_to_delta");
    assert_eq!(rep.pinf_tv_to_delta, 0.0);
    assert!(rep.medians[0] > rep.medians[2]);
    // P_N(B_0.05[x0]) >= 0.99 at N = 10^4
    assert!(
        rep.tv_errors[2].iter().all(|&v| v <= 0.01),
        "{:?}",
        rep.tv_errors[2]
    );
}

#[test]
fn poll_mismatch_rate_matches_the_miss_probability() {
    let s = PollScenario {
        d: 10,
        h: 6,
        eps: 0.1,
        x0: 7,
        biased_agent: None,
    };
    let r = 4000;
    let rep = primary_convergence(&ScenarioKind::Poll(s), &[5, 10, 20], r, 11).unwrap();
    assert_eq!(rep.rate, Rate::Exponential);
    let rate = rep.mismatch_rate.as_ref().unwrap();
    let bound = rep.mismatch_bound.as_ref().unwrap();
    for (k, n) in [5, 10, 20].iter().enumerate() {
        let p = 0.9f64.powi(*n);
        assert!((bound[k] - p).abs() < 1e-15);
        let se = (p * (1.0 - p) / r as f64).sqrt();
        assert!((rate[k] - p).abs() <= 3.0 * se, "N={n}: {} vs {p}", rate[k]);
    }
}

#[test]
fn decimal_interior_point_converges_and_edge_point_splits() {
    let inner = DecimalScenario { n: 10, x0: 0.55 };
    let rep =
        primary_convergence(&ScenarioKind::Decimal(inner), &[10, 100, 1_000], 400, 5).unwrap();
    let rate = rep.mismatch_rate.unwrap();
    assert!(rate[0] > rate[1] && rate[1] > rate[2], "{rate:?}");
    assert!(rate[2] < 0.01);
    assert!(rep.split_fraction.is_none());

    let edge = DecimalScenario { n: 10, x0: 0.5 };
    let rep = primary_convergence(&ScenarioKind::Decimal(edge), &[1_000, 10_000], 2000, 5).unwrap();
    assert!(rep.slope.is_nan());
    for f in rep.split_fraction.unwrap() {
        // a fair split, plus the atom at exactly 0.5 which joins the upper cell
        assert!((f - 0.5).abs() < 0.05, "{f}");
    }
}

#[test]
fn convergence_rejects_bad_inputs() {
    let s = ScenarioKind::Coin(coin(&[0.3], 1));
    assert!(matches!(
        primary_convergence(&s, &[100, 100], 10, 0),
        Err(LkaError::InvalidInput(_))
    ));
    assert!(matches!(
        primary_convergence(&s, &[], 10, 0),
        Err(LkaError::InvalidInput(_))
    ));
    assert!(matches!(
        primary_convergence(&s, &[10], 1, 0),
        Err(LkaError::InvalidInput(_))
    ));
    let tree = ScenarioKind::Tree(TreeScenario {
        r: 1,
        root: TreeNode::balanced(1, 1, 0.5, 0.5),
    });
    assert!(matches!(
        primary_convergence(&tree, &[10], 10, 0),
        Err(LkaError::Unsupported(_))
    ));
}

#[test]
fn convergence_is_deterministic() {
    let s = ScenarioKind::Coin(coin(&[0.4], 1));
    let a = primary_convergence(&s, &[50, 500], 30, 9).unwrap();
    let b = primary_convergence(&s, &[50, 500], 30, 9).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

/// `P(A; μ)` for `A = [u, v]` on the unit interval, and its derivative in `μ`
/// through `dμ/da = Var_a(t)`.
fn interval_derivative(mu: f64, u: f64, v: f64) -> f64 {
    let (a, _) = one_tilt_for_mean(mu, 60.0);
    // d/da of ∫_u^v e^{at} / ∫_0^1 e^{at}
    let m = |lo: f64, hi: f64| one_mass(a, lo, hi);
    let mean_on = |lo: f64, hi: f64| {
        let g = |t: f64| (a * t).exp() * (a * t - 1.0) / (a * a);
        (g(hi) - g(lo)) / ((a * hi).exp() - (a * lo).exp()) * a
    };
    let mean_all = mean_on(0.0, 1.0);
    let dp_da = m(u, v) * (mean_on(u, v) - mean_all);
    dp_da / one_var(a)
}

#[test]
fn clt_variance_matches_the_delta_method() {
    let s = ScenarioKind::Coin(coin(&[0.3], 1));
    let a = TruthSet::rect(&[(0.0, 0.5)]).unwrap();
    let rep = clt_check(&s, &a, 10_000, 5000, 17, None).unwrap();
    let d = interval_derivative(0.3, 0.0, 0.5);
    assert!(
        (rep.derivative[0] - d).abs() < 1e-6 * d.abs(),
        "{} vs {d}",
        rep.derivative[0]
    );
    assert!((rep.sigma[0][0] - 0.21).abs() < 1e-15);
    assert!((rep.predicted_var - d * d * 0.21).abs() < 1e-5 * rep.predicted_var);
    assert!((0.9..=1.1).contains(&rep.ratio), "ratio {}", rep.ratio);
    assert!(
        rep.empirical_mean.abs() <= 3.0 * rep.mean_stderr,
        "{} ± {}",
        rep.empirical_mean,
        rep.mean_stderr
    );
    assert_eq!(rep.records().len(), 5000);
}

#[test]
fn clt_whole_space_has_no_fluctuation() {
    let s = ScenarioKind::Coin(coin(&[0.3, 0.6], 1));
    let a = TruthSet::whole(&WorldSpace::cube(2).unwrap());
    let rep = clt_check(&s, &a, 1000, 50, 1, None).unwrap();
    assert_eq!(rep.predicted_var, 0.0);
    assert!(rep.empirical_var < 1e-20);
    assert!(rep.ratio.is_nan());
}

#[test]
fn clt_complement_has_equal_variance() {
    let s = ScenarioKind::Coin(coin(&[0.3], 1));
    let a = TruthSet::rect(&[(0.2, 0.5)]).unwrap();
    let c = a.complement().unwrap();
    let ra = clt_check(&s, &a, 2000, 400, 4, None).unwrap();
    let rc = clt_check(&s, &c, 2000, 400, 4, None).unwrap();
    assert!((ra.empirical_var - rc.empirical_var).abs() < 1e-9 * ra.empirical_var);
    assert!((ra.predicted_var - rc.predicted_var).abs() < 1e-9 * ra.predicted_var);
    assert!((ra.derivative[0] + rc.derivative[0]).abs() < 1e-9);
}

#[test]
fn clt_errors() {
    let edge = ScenarioKind::Coin(coin(&[0.0], 1));
    let a = TruthSet::rect(&[(0.0, 0.5)]).unwrap();
    assert_eq!(
        clt_check(&edge, &a, 100, 10, 0, None).unwrap_err(),
        LkaError::DegenerateA
    );
    let two = ScenarioKind::Coin(coin(&[0.3], 2));
    assert!(matches!(
        clt_check(&two, &a, 100, 10, 0, None),
        Err(LkaError::Unsupported(_))
    ));
    let wrong = TruthSet::rect(&[(0.0, 0.5), (0.0, 0.5)]).unwrap();
    let one = ScenarioKind::Coin(coin(&[0.3], 1));
    assert!(matches!(
        clt_check(&one, &wrong, 100, 10, 0, None),
        Err(LkaError::SpaceMismatch(_))
    ));
    assert!(clt_check(&one, &a, 100, 10, 0, Some(0.5)).is_err());
}

#[test]
fn clt_default_sets_are_rectangles_in_the_cube() {
    let s = coin(&[0.3, 0.6], 1);
    let sets = clt_default_sets(&s, 2).unwrap();
    assert_eq!(sets.len(), 4, "the whole cube has no complement to add");
    let mut with_truth = s.clone();
    with_truth.truth = Some(vec![[0.2, 0.6], [0.1, 0.9]]);
    let sets_t = clt_default_sets(&with_truth, 2).unwrap();
    assert_eq!(sets_t.len(), 5);
    let k = ScenarioKind::Coin(with_truth);
    let ra = clt_check(&k, &sets_t[0], 500, 50, 1, None).unwrap();
    let rc = clt_check(&k, &sets_t[1], 500, 50, 1, None).unwrap();
    assert!((ra.pinf_a + rc.pinf_a - 1.0).abs() < 1e-12);
    let k = ScenarioKind::Coin(s);
    for a in &sets {
        let rep = clt_check(&k, a, 500, 20, 0, None).unwrap();
        assert!(rep.empirical_var >= 0.0 && rep.predicted_var >= 0.0);
    }
}

#[test]
fn synthetic_generation_one_stays_near_generation_zero() {
    let s = SyntheticScenario::Coin(coin(&[0.3], 1));
    let rep = synthetic_loop(&s, 1, 100_000, 21).unwrap();
    assert_eq!(rep.generations.len(), 2);
    assert_eq!(rep.generations[0].tv_to_gen0, 0.0);
    assert!(
        rep.generations[1].tv_to_gen0 <= 0.05,
        "{}",
        rep.generations[1].tv_to_gen0
    );
}

#[test]
fn synthetic_loop_never_reaches_the_point_mass() {
    let s = SyntheticScenario::Coin(coin(&[0.3, 0.7], 1));
    for rep in synthetic_replicates(&s, 5, 10_000, 4, 8).unwrap() {
        let floor = rep.gen0_floor();
        assert!(floor > 0.5);
        for g in &rep.generations {
            assert!(
                g.tv_to_delta >= floor - 0.05,
                "gen {}: {} < {floor}",
                g.generation,
                g.tv_to_delta
            );
        }
        assert_eq!(rep.records(0).len(), 12);
    }
}

fn fundamental_rows(d: usize) -> Vec<Vec<f64>> {
    let f = fundamental_limit_features(d).unwrap();
    let n = f.n();
    f.values().unwrap().chunks(n).map(|c| c.to_vec()).collect()
}

#[test]
fn synthetic_loop_from_a_point_mass_stays_there() {
    let s = SyntheticScenario::Readout(FiniteReadout {
        features: fundamental_rows(4),
        x0: 2,
    });
    let rep = synthetic_loop(&s, 5, 1000, 3).unwrap();
    for g in &rep.generations {
        assert!(
            g.tv_to_delta < 1e-9,
            "gen {}: {}",
            g.generation,
            g.tv_to_delta
        );
        assert!(g.tv_to_gen0 < 1e-9);
    }
}

#[test]
fn synthetic_readout_with_coarse_features_keeps_its_spread() {
    // worlds 0 and 1 share a reading, so P_0 splits between them
    let s = SyntheticScenario::Readout(FiniteReadout {
        features: vec![vec![1.0], vec![1.0], vec![0.0]],
        x0: 0,
    });
    let rep = synthetic_loop(&s, 3, 100, 0).unwrap();
    for g in &rep.generations {
        assert!((g.tv_to_delta - 0.5).abs() < 1e-9, "{}", g.tv_to_delta);
    }
}

#[test]
fn synthetic_loop_validation() {
    let s = SyntheticScenario::Coin(coin(&[0.3], 1));
    assert!(synthetic_loop(&s, 0, 10, 0).is_err());
    assert!(synthetic_loop(&s, 1, 0, 0).is_err());
    let two = SyntheticScenario::Coin(coin(&[0.3], 2));
    assert!(matches!(
        synthetic_loop(&two, 1, 10, 0),
        Err(LkaError::Unsupported(_))
    ));
    let a = serde_json::to_string(&synthetic_loop(&s, 2, 100, 5).unwrap()).unwrap();
    let b = serde_json::to_string(&synthetic_loop(&s, 2, 100, 5).unwrap()).unwrap();
    assert_eq!(a, b);
}

fn arb_finite(d: usize) -> impl Strategy<Value = BeliefMeasure> {
    prop::collection::vec(0.01f64..1.0, d)
        .prop_map(|w| BeliefMeasure::finite_from_weights(&w).unwrap())
}

proptest! {
    #[test]
    fn tv_is_a_metric_on_triples(a in arb_finite(6), b in arb_finite(6), c in arb_finite(6)) {
        let ab = tv_distance(&a, &b).unwrap();
        let ba = tv_distance(&b, &a).unwrap();
        let bc = tv_distance(&b, &c).unwrap();
        let ac = tv_distance(&a, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!(ac <= ab + bc + 1e-15);
    }

    #[test]
    fn tv_is_a_metric_on_tilted_products(la in -5.0f64..5.0, lb in -5.0f64..5.0, lc in -5.0f64..5.0) {
        use lka_core::worlds::Marginal;
        let m = |l: f64| BeliefMeasure::product(vec![Marginal::OneTilt { lambda: l }]).unwrap();
        let (a, b, c) = (m(la), m(lb), m(lc));
        let ab = tv_distance(&a, &b).unwrap();
        let ba = tv_distance(&b, &a).unwrap();
        let ac = tv_distance(&a, &c).unwrap();
        let bc = tv_distance(&b, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}
