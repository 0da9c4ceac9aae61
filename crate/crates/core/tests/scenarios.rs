use lka_core::lka::active_info;
use lka_core::numeric::tilt::one_mass;
use lka_core::rng::{stream_id, StreamRng};
use lka_core::scenarios::*;
use lka_core::worlds::{
    ball, tv_distance, BeliefMeasure, Metric, Rect, TruthSet, World, WorldSpace,
};
use lka_core::LkaError;
use proptest::prelude::*;

fn poll(x0: usize, delta: Option<f64>) -> PollScenario {
    PollScenario {
        d: 10,
        h: 6,
        eps: 0.1,
        x0,
        biased_agent: delta.map(|delta| BiasedAgent { delta }),
    }
}

#[test]
fn poll_without_inclusion_keeps_the_prior() {
    let o = poll_from_data(&poll(8, None), vec![0; 20]).unwrap();
    assert_eq!(o.mu_hat, 0.4);
    for p in o.posterior.probs().unwrap() {
        assert!((p - 0.1).abs() < 1e-15);
    }
    assert_eq!(o.report.active_info, 0.0);
}

#[test]
fn poll_northern_subject() {
    let o = poll_from_data(&poll(8, None), vec![0, 2, 0, 2]).unwrap();
    assert_eq!(o.mu_hat, 1.0);
    let p = o.posterior.probs().unwrap();
    assert!(p[..6].iter().all(|&x| x == 0.0));
    assert!(p[6..].iter().all(|&x| (x - 0.25).abs() < 1e-15));
    assert!(o.report.full_learning);
    assert!(!o.report.full_knowledge);
    assert!((o.report.raw_values.p_x0 - 0.25).abs() < 1e-15);
    assert!(o.generic_fit_tv(&poll(8, None)).unwrap() <= 1e-12);
}

#[test]
fn poll_biased_agent() {
    let s = poll(8, Some(0.1));
    let o = poll_from_data(&s, vec![2; 5]).unwrap();
    let b = o.biased.as_ref().unwrap();
    assert!((b.mu_tilde - 0.9).abs() < 1e-15);
    let p = b.posterior.probs().unwrap();
    for k in 7..=10 {
        let want = 2.0 * k as f64 * 0.9 / (4.0 * 17.0);
        assert!((p[k - 1] - want).abs() < 1e-15);
    }
    for k in 1..=6 {
        let want = 2.0 * k as f64 * 0.1 / 42.0;
        assert!((p[k - 1] - want).abs() < 1e-15);
    }
    assert!(o.generic_fit_tv(&s).unwrap() <= 1e-12);
}

#[test]
fn poll_generic_fit_all_cases() {
    let s = poll(2, Some(0.1));
    for data in [vec![0u8; 4], vec![1, 0, 1], vec![2, 2, 0]] {
        let o = poll_from_data(&s, data).unwrap();
        assert!(o.generic_fit_tv(&s).unwrap() <= 1e-12);
    }
}

#[test]
fn poll_mixed_answers_violate_the_model() {
    assert!(matches!(
        poll_mu_hat(10, 6, &[1, 2]),
        Err(LkaError::ModelViolation(_))
    ));
    assert!(matches!(
        poll_mu_tilde(10, 6, 0.1, &[2, 0, 1]),
        Err(LkaError::ModelViolation(_))
    ));
    let bad = PollScenario {
        h: 10,
        ..poll(0, None)
    };
    assert!(bad.validate().is_err());
}

#[test]
fn poll_full_learning_rate() {
    // P(S included at least once) = 1 − 0.9^50
    let s = poll(7, None);
    let m = 10_000;
    let hits = (0..m)
        .filter(|&i| {
            let mut rng = StreamRng::new(42, stream_id("poll"), i);
            poll_simulate_with(&s, 50, &mut rng).unwrap().mu_hat == 1.0
        })
        .count();
    let p = 1.0 - 0.9f64.powi(50);
    let se = (p * (1.0 - p) / m as f64).sqrt();
    let rate = hits as f64 / m as f64;
    assert!(
        (rate - p).abs() <= 3.0 * se,
        "rate {rate}, want {p} ± {}",
        3.0 * se
    );
}

#[test]
fn poll_ka_bound_for_northern_worlds() {
    for mu in [0.0, 0.2, 0.4, 0.9, 1.0] {
        let p = poll_posterior(10, 6, mu).unwrap();
        for k in 6..10 {
            assert!(p.point_mass_at(&World::Index(k)) <= 0.25 + 1e-15);
        }
    }
}

fn coin(r: usize, fpc: usize, x0: Vec<f64>) -> CoinCubeScenario {
    CoinCubeScenario {
        r,
        features_per_coord: fpc,
        x0,
        truth: None,
    }
}

#[test]
fn fair_coin_gives_flat_tilt() {
    let s = coin(1, 1, vec![0.5]);
    let o = coin_from_heads(&s, 1_000_000, vec![500_000]).unwrap();
    assert!(o.lambda[0].abs() < 1e-9);
    let o = coin_simulate(&s, 1_000_000, 3).unwrap();
    assert!(o.lambda[0].abs() < 0.05);
}

#[test]
fn coin_boundary_counts_are_capped() {
    let s = coin(2, 1, vec![0.999, 0.5]);
    let o = coin_from_heads(&s, 10, vec![10, 5]).unwrap();
    assert_eq!(o.boundary, vec![true, false]);
    assert_eq!(o.lambda[0], ONE_FEATURE_CAP);
    assert!(o.generic_fit_tv(&s).is_err());
}

/// `P([a, b])` under density `∝ e^{λx}` on the unit interval.
fn tilted_interval_mass(l: f64, a: f64, b: f64) -> f64 {
    if l.abs() < 1e-12 {
        return b - a;
    }
    ((l * b).exp() - (l * a).exp()) / (l.exp() - 1.0)
}

#[test]
fn sup_of_truth_mass_over_tilts() {
    for (a, b) in [(0.0, 0.3), (0.6, 1.0), (0.2, 0.5), (0.4, 0.45), (0.1, 0.9)] {
        let g = g_bar(a, b);
        let grid = (0..=40_000)
            .map(|i| -200.0 + 400.0 * i as f64 / 40_000.0)
            .map(|l| tilted_interval_mass(l, a, b))
            .fold(0.0, f64::max);
        if a == 0.0 || b == 1.0 {
            assert_eq!(g, 1.0);
            assert!(grid > 1.0 - 1e-6);
        } else {
            assert!(g < 1.0);
            assert!(grid <= g + 1e-12, "({a}, {b}): grid {grid} > {g}");
            assert!(g - grid < 1e-6, "({a}, {b}): grid {grid} vs {g}");
        }
        assert!((one_mass(0.0, a, b) - (b - a)).abs() < 1e-14);
    }
    let t = Rect::from_bounds(&[(0.2, 0.5), (0.0, 0.3)]).unwrap();
    assert!((coin_sup_truth_mass(&t) - g_bar(0.2, 0.5)).abs() < 1e-15);
}

#[test]
fn one_feature_never_concentrates() {
    // the best tilt still puts little mass near an interior x0
    let x0: f64 = 0.3;
    let best = (0..=20_000)
        .map(|i| -500.0 + 1000.0 * i as f64 / 20_000.0)
        .map(|l| tilted_interval_mass(l, x0 - BALL_RADIUS, x0 + BALL_RADIUS))
        .fold(0.0, f64::max);
    assert!(best < 0.2, "{best}");
    let s = coin(1, 1, vec![x0]);
    let o = coin_from_heads(&s, 100_000, vec![30_000]).unwrap();
    assert!(o.ball_mass <= best + 1e-12);
    assert!(!o.report.full_knowledge);
}

#[test]
fn two_features_concentrate_at_the_coin() {
    let s = coin(1, 2, vec![0.3]);
    let mut last = 0.0;
    for n in [100usize, 1_000, 10_000] {
        let o = coin_from_heads(&s, n, vec![(0.3 * n as f64).round() as u64]).unwrap();
        assert!(o.ball_mass > last, "N = {n}: {} after {last}", o.ball_mass);
        last = o.ball_mass;
    }
    assert!(last >= 0.99, "{last}");
}

#[test]
fn two_tilt_matches_normal_approximation() {
    let (m1, v) = (0.3, 0.21e-4);
    let (a, b, boundary) = two_tilt_for_moments(m1, m1 * m1 + v, TWO_FEATURE_CAP).unwrap();
    assert!(!boundary);
    // a Gaussian N(m, v) has b = −1/(2v), a = m/v
    assert!((b * 2.0 * v + 1.0).abs() < 1e-6);
    assert!((a * v - m1).abs() < 1e-6);
    let (_, _, boundary) = two_tilt_for_moments(0.0, 0.0, TWO_FEATURE_CAP).unwrap();
    assert!(boundary);
}

#[test]
fn coin_cross_checks() {
    for (i, (fpc, x0)) in [
        (1, vec![0.3, 0.8]),
        (2, vec![0.3]),
        (2, vec![0.55, 0.2]),
        (1, vec![0.5]),
    ]
    .into_iter()
    .enumerate()
    {
        let s = coin(x0.len(), fpc, x0);
        for n in [50, 1_000, 10_000] {
            let o = coin_simulate(&s, n, 100 + i as u64).unwrap();
            let tv = o.generic_fit_tv(&s).unwrap();
            assert!(tv <= 1e-8, "features {fpc}, N {n}: tv {tv}");
        }
    }
}

fn decimal(n: usize, x0: f64) -> DecimalScenario {
    DecimalScenario { n, x0 }
}

#[test]
fn decimal_first_digit_is_learned() {
    let s = decimal(10, 0.5503);
    let o = decimal_posterior(&s, 1_000_000, 11).unwrap();
    assert_eq!(o.cell, 5);
    assert_eq!(o.first_decimal.raw_values.p_t, 1.0);
    assert!(o.first_decimal.full_learning);
    assert_eq!(o.second_decimal.active_info, 0.0);
    assert!((o.second_decimal.raw_values.p_t - 0.1).abs() < 1e-15);
    assert!(!o.ball_checks.is_empty() && o.ball_checks.iter().all(|c| c.holds));
    assert!(!o.boundary_ambiguous);
}

#[test]
fn decimal_second_digit_is_never_informed() {
    let s = decimal(10, 0.37);
    let t2 = second_decimal_five();
    for i in 0..10 {
        let heads = (i as u64) * 100 + 37;
        let o = decimal_from_heads(&s, 1000, heads).unwrap();
        assert_eq!(o.cell, i);
        assert_eq!(o.second_decimal.active_info, 0.0, "cell {i}");
        let p0 = BeliefMeasure::uniform(o.posterior.space());
        // the generic path measures the same sets in floating-point geometry
        assert!(active_info(&p0, &o.posterior, &t2).unwrap().abs() < 1e-12);
    }
}

#[test]
fn decimal_ball_bound() {
    let s = decimal(10, 0.5);
    let o = decimal_from_heads(&s, 100, 52).unwrap();
    let b = ball(
        o.posterior.space(),
        Metric::SupNorm,
        &World::Point(vec![0.5]),
        0.02,
        false,
    )
    .unwrap();
    let m = o.posterior.measure_of(&b).unwrap();
    assert!(m <= 0.7);
    assert!((m - 0.2).abs() < 1e-12);
    assert!(o.ball_checks.iter().all(|c| c.holds && c.eps < 0.05));
}

#[test]
fn decimal_second_digit_with_hundred_cells() {
    let s = decimal(100, 0.2553);
    let wins = (0..100)
        .filter(|&seed| {
            let o = decimal_posterior(&s, 1_000_000, seed).unwrap();
            o.second_decimal.full_learning
        })
        .count();
    assert!(wins >= 99, "{wins}");
}

#[test]
fn decimal_cell_edges() {
    assert_eq!(cell_of(10, 0.0), 0);
    assert_eq!(cell_of(10, 0.1), 1);
    assert_eq!(cell_of(10, 1.0), 9);
    assert_eq!(cell_of(100, 0.55), 55);
    let o = decimal_from_heads(&decimal(10, 0.6), 10_000, 6_001).unwrap();
    assert!(o.boundary_ambiguous);
    assert!(decimal(7, 0.1).validate().is_err());
}

#[test]
fn decimal_cross_check() {
    for (n, x0) in [(10, 0.5503), (100, 0.2553), (10, 0.05)] {
        let o = decimal_posterior(&decimal(n, x0), 10_000, 5).unwrap();
        let tv = o.generic_fit_tv(&decimal(n, x0)).unwrap();
        assert!(tv <= 1e-8, "{tv}");
    }
}

#[test]
fn depth_one_tree() {
    let s = TreeScenario {
        r: 1,
        root: TreeNode::split(0, 0.5, 0.7, TreeNode::Leaf, TreeNode::Leaf),
    };
    let o = tree_build(&s).unwrap();
    assert_eq!(o.leaves[0].bounds, vec![[0.0, 0.5]]);
    assert_eq!(o.leaves[1].bounds, vec![[0.5, 1.0]]);
    assert!((o.leaves[0].weight - 0.3).abs() < 1e-15);
    assert!((o.leaves[1].weight - 0.7).abs() < 1e-15);
    assert!((o.leaves[0].lambda - 0.6f64.ln()).abs() < 1e-15);
    assert!((o.leaves[1].lambda - 1.4f64.ln()).abs() < 1e-15);
    assert_eq!(o.gauge, "log-density");
    assert!(o.diameter_bound_holds);
    assert!(o.witness_ball_mass < 1.0);
    assert!(o.generic_fit_tv().unwrap() <= 1e-8);
}

#[test]
fn balanced_fair_tree_is_uniform() {
    for (r, depth) in [(1, 3), (2, 4), (3, 3)] {
        let o = tree_build(&TreeScenario {
            r,
            root: TreeNode::balanced(r, depth, 0.5, 0.5),
        })
        .unwrap();
        assert_eq!(o.leaves.len(), 1 << depth);
        assert!(o.leaves.iter().all(|l| l.lambda.abs() < 1e-14));
        let u = BeliefMeasure::uniform(o.posterior.space());
        assert!(tv_distance(&u, &o.posterior).unwrap() < 1e-14);
    }
}

/// Exact fraction in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Q(i128, i128);

impl Q {
    fn new(n: i128, d: i128) -> Q {
        fn gcd(a: i128, b: i128) -> i128 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(n, d);
        Q(n / g, d / g)
    }
    fn mul(self, o: Q) -> Q {
        Q::new(self.0 * o.0, self.1 * o.1)
    }
    fn add(self, o: Q) -> Q {
        Q::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn sub(self, o: Q) -> Q {
        Q::new(self.0 * o.1 - o.0 * self.1, self.1 * o.1)
    }
    fn f(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

/// Unbalanced tree on the square with five leaves, splits in tenths.
fn five_leaf() -> (TreeScenario, Vec<(Q, Q)>) {
    use TreeNode::Leaf;
    let t = |n: i128| Q::new(n, 10);
    let root = TreeNode::split(
        0,
        0.3,
        0.6,
        TreeNode::split(1, 0.7, 0.2, Leaf, Leaf),
        TreeNode::split(1, 0.4, 0.9, Leaf, TreeNode::split(0, 0.8, 0.3, Leaf, Leaf)),
    );
    let one = Q::new(1, 1);
    // (volume, weight) for each leaf in left-to-right order
    let oracle = vec![
        (t(3).mul(t(7)), one.sub(t(6)).mul(one.sub(t(2)))),
        (t(3).mul(one.sub(t(7))), one.sub(t(6)).mul(t(2))),
        (one.sub(t(3)).mul(t(4)), t(6).mul(one.sub(t(9)))),
        (
            t(8).sub(t(3)).mul(one.sub(t(4))),
            t(6).mul(t(9)).mul(one.sub(t(3))),
        ),
        (one.sub(t(8)).mul(one.sub(t(4))), t(6).mul(t(9)).mul(t(3))),
    ];
    (TreeScenario { r: 2, root }, oracle)
}

#[test]
fn five_leaf_tree_against_exact_arithmetic() {
    let (s, oracle) = five_leaf();
    let o = tree_build(&s).unwrap();
    assert_eq!(o.leaves.len(), 5);
    let (mut vol, mut w) = (Q::new(0, 1), Q::new(0, 1));
    for (leaf, (v, p)) in o.leaves.iter().zip(&oracle) {
        assert!((leaf.volume - v.f()).abs() < 1e-15);
        assert!((leaf.weight - p.f()).abs() < 1e-15);
        assert!((leaf.lambda - (p.f() / v.f()).ln()).abs() < 1e-12);
        vol = vol.add(*v);
        w = w.add(*p);
    }
    assert_eq!((vol, w), (Q(1, 1), Q(1, 1)));
    let sv: f64 = o.leaves.iter().map(|l| l.volume).sum();
    let sw: f64 = o.leaves.iter().map(|l| l.weight).sum();
    assert!((sv - 1.0).abs() < 1e-12 && (sw - 1.0).abs() < 1e-12);
    assert!(o.max_diameter >= 5f64.powf(-0.5));
    assert!(o.witness_ball_mass < 1.0);
    assert!(o.generic_fit_tv().unwrap() <= 1e-8);
    let json = serde_json::to_string(&s).unwrap();
    assert_eq!(serde_json::from_str::<TreeScenario>(&json).unwrap(), s);
}

#[test]
fn invalid_trees() {
    use TreeNode::Leaf;
    let bad = [
        TreeNode::split(1, 0.5, 0.5, Leaf, Leaf),
        TreeNode::split(0, 0.5, 1.0, Leaf, Leaf),
        TreeNode::split(0, 0.5, 0.5, TreeNode::split(0, 0.7, 0.5, Leaf, Leaf), Leaf),
    ];
    for root in bad {
        let e = tree_build(&TreeScenario { r: 1, root }).unwrap_err();
        assert!(matches!(e, LkaError::InvalidTree(_)), "{e:?}");
    }
}

fn arb_tree(depth: u32) -> impl Strategy<Value = TreeNode> {
    let leaf = Just(TreeNode::Leaf);
    leaf.prop_recursive(depth, 32, 2, |inner| {
        (
            0usize..2,
            0.05f64..0.95,
            0.05f64..0.95,
            inner.clone(),
            inner,
        )
            .prop_map(|(c, a, q, l, r)| TreeNode::split(c, a, q, l, r))
    })
}

/// Rescale split points so each lies inside its node's range.
fn fit_into(node: TreeNode, lo: [f64; 2], hi: [f64; 2]) -> TreeNode {
    match node {
        TreeNode::Leaf => TreeNode::Leaf,
        TreeNode::Split {
            coord,
            point,
            prob,
            left,
            right,
        } => {
            let p = lo[coord] + point * (hi[coord] - lo[coord]);
            let (mut lh, mut rl) = (hi, lo);
            lh[coord] = p;
            rl[coord] = p;
            TreeNode::split(
                coord,
                p,
                prob,
                fit_into(*left, lo, lh),
                fit_into(*right, rl, hi),
            )
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_diameter_bound(root in arb_tree(5)) {
        let root = fit_into(root, [0.0, 0.0], [1.0, 1.0]);
        let o = tree_build(&TreeScenario { r: 2, root }).unwrap();
        prop_assert!(o.diameter_bound_holds);
        prop_assert!(o.max_diameter >= (o.leaves.len() as f64).powf(-0.5) - 1e-12);
        prop_assert!(o.witness_ball_mass < 1.0);
        let sv: f64 = o.leaves.iter().map(|l| l.volume).sum();
        prop_assert!((sv - 1.0).abs() < 1e-12);
    }
}

fn spike(atoms: Vec<f64>, delta: f64, weights: Vec<f64>) -> SpikeScenario {
    SpikeScenario {
        atoms,
        delta,
        weights,
    }
}

#[test]
fn single_spike() {
    let s = spike(vec![0.5], 1e-3, vec![0.5, 0.5]);
    let o = spike_posterior(&s).unwrap();
    assert_eq!(o.lambda, vec![0.0]);
    assert!(o.max_gap() <= 1e-3);
    // Z = 2 − δ and P(A) = 1/Z
    assert!((o.z - (2.0 - 1e-3)).abs() < 1e-15);
    assert!((o.gaps[0] - (1.0 / (2.0 - 1e-3) - 0.5)).abs() < 1e-15);
    assert!(o.gibbs_tv().unwrap() < 1e-12);
    assert!(o.generic_fit_tv(&s).unwrap() <= 1e-8);
}

#[test]
fn spike_gaps_shrink_linearly() {
    let gap = |d: f64| {
        spike_posterior(&spike(vec![0.2, 0.7], d, vec![0.3, 0.5, 0.2]))
            .unwrap()
            .max_gap()
    };
    let g: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&d| gap(d)).collect();
    for w in g.windows(2) {
        let ratio = w[0] / w[1];
        assert!((8.0..=12.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn spike_without_atom_weight_is_uniform() {
    let s = spike(vec![0.4], 1e-2, vec![1.0, 0.0]);
    let o = spike_posterior(&s).unwrap();
    assert_eq!(o.lambda, vec![-SPIKE_CAP]);
    let u = BeliefMeasure::uniform(&WorldSpace::cube(1).unwrap());
    assert!(tv_distance(&u, &o.posterior).unwrap() < 0.011);
    let a = TruthSet::rect(&[(0.395, 0.405)]).unwrap();
    assert!(o.posterior.measure_of(&a).unwrap() < 1e-20);
}

#[test]
fn spike_validation() {
    let e = spike_posterior(&spike(vec![0.3, 0.305], 1e-2, vec![0.4, 0.3, 0.3])).unwrap_err();
    assert_eq!(e, LkaError::AtomsTooClose(0, 1));
    assert!(spike_posterior(&spike(vec![0.5], 1e-2, vec![0.4, 0.5])).is_err());
    assert!(spike_posterior(&spike(vec![0.001], 1e-2, vec![0.5, 0.5])).is_err());
}

#[test]
fn spike_cross_checks() {
    let cases = [
        spike(vec![0.1, 0.5, 0.9], 1e-2, vec![0.1, 0.3, 0.4, 0.2]),
        spike(vec![0.25, 0.75], 1e-3, vec![0.6, 0.2, 0.2]),
        spike(vec![0.5], 1e-4, vec![0.01, 0.99]),
    ];
    for s in &cases {
        let o = spike_posterior(s).unwrap();
        assert!(o.gibbs_tv().unwrap() < 1e-12);
        assert!(o.generic_fit_tv(s).unwrap() <= 1e-8);
    }
}

#[test]
fn scenario_configs_run_deterministically() {
    let docs = [
        r#"{"scenario": "poll", "d": 10, "h": 6, "eps": 0.1, "x0": 8, "biasedAgent": {"delta": 0.1}, "N": 30, "replicates": 4}"#,
        r#"{"scenario": "coin", "r": 2, "featuresPerCoord": 2, "x0": [0.3, 0.7], "N": 1000, "replicates": 3}"#,
        r#"{"scenario": "decimal", "n": 10, "x0": 0.5503, "N": 100000, "replicates": 2}"#,
        r#"{"scenario": "tree", "r": 1, "root": {"kind": "split", "coord": 0, "point": 0.5, "prob": 0.7, "left": {"kind": "leaf"}, "right": {"kind": "leaf"}}}"#,
        r#"{"scenario": "spike", "atoms": [0.5], "delta": 0.001, "weights": [0.5, 0.5]}"#,
    ];
    for doc in docs {
        let cfg: ScenarioConfig = serde_json::from_str(doc).unwrap();
        let a = run_scenario(&cfg, 9, true).unwrap();
        let b = run_scenario(&cfg, 9, true).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.results.len(), cfg.replicates);
        assert!(
            a.cross_check_tv.unwrap() <= 1e-8,
            "{doc}: {:?}",
            a.cross_check_tv
        );
        let c = run_scenario(&cfg, 10, false).unwrap();
        assert!(c.cross_check_tv.is_none());
    }
}
