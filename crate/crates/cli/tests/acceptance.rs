//! Acceptance suite: one line per criterion with its measured value, the
//! tolerance it is held to, and the wall time against its budget.
//!
//! Exits 0 once every criterion has been evaluated; set
//! `LKA_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use lka_cli::RunOptions;
use lka_core::asymptotics::{
    clt_check, primary_convergence, synthetic_replicates, SyntheticScenario,
};
use lka_core::lka::{
    active_info, fundamental_limit_features, lambda_for_world, pigeonhole_certificate,
};
use lka_core::maxent::{fit_lambda, moments, FeatureSet, GibbsPosterior, SolverOptions};
use lka_core::rng::{stream_id, StreamRng};
use lka_core::scenarios::*;
use lka_core::secondary::{expansion_verify, plugin_replicates};
use lka_core::worlds::{ball, tv_to_point, BeliefMeasure, Metric, TruthSet, World, WorldSpace};
use rand::Rng;

type Verdict = Result<(bool, String), String>;

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: &str, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) {
        let t = Instant::now();
        let out = f();
        let el = t.elapsed();
        let (ok, detail) = match out {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = budget.is_none_or(|b| el <= b);
        let pass = ok && in_time;
        let time = match budget {
            Some(b) => format!(
                "{:.2}s, budget {}s{}",
                el.as_secs_f64(),
                b.as_secs(),
                if in_time { "" } else { " EXCEEDED" }
            ),
            None => format!("{:.2}s", el.as_secs_f64()),
        };
        println!(
            "{} {id:>3} {name}: {detail} [{time}]",
            if pass { "PASS" } else { "FAIL" }
        );
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }

    fn info(&self, id: &str, name: &str, detail: String) {
        println!("INFO {id:>3} {name}: {detail}");
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn weights(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.05..1.0)).collect()
}

// 1
fn moment_matching() -> Verdict {
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    let mut most_iter = 0;
    for i in 0..500u64 {
        let mut rng = StreamRng::new(1, stream_id("acceptance/fit"), i);
        let d = rng.random_range(2..=50);
        let n = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let prior = BeliefMeasure::finite_from_weights(&weights(&mut rng, d)).map_err(err)?;
        let f = FeatureSet::from_rows(&rows).map_err(err)?;
        let target = moments(
            &BeliefMeasure::finite_from_weights(&weights(&mut rng, d)).map_err(err)?,
            &f,
        )
        .map_err(err)?;
        let fit =
            fit_lambda(&prior, &f, &target, &opts).map_err(|e| format!("fixture {i}: {e}"))?;
        let got = fit.posterior.moments();
        let e = got
            .mu
            .iter()
            .zip(&target.mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(e);
        most_iter = most_iter.max(fit.report.iterations);
    }
    Ok((
        worst <= 1e-9 && most_iter <= 200,
        format!("500 fixtures, max |mu - target| = {worst:.2e} (tol 1e-9), max iterations {most_iter} (cap 200)"),
    ))
}

// 2
fn i_projection_oracle() -> Verdict {
    const GRID: usize = 1_000_000;
    let opts = SolverOptions::default();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let mut rng = StreamRng::new(2, stream_id("acceptance/kl"), i);
        let mut f: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        f.sort_by(f64::total_cmp);
        let p0 = BeliefMeasure::finite_from_weights(&weights(&mut rng, 3)).map_err(err)?;
        let fs =
            FeatureSet::from_rows(&f.iter().map(|&v| vec![v]).collect::<Vec<_>>()).map_err(err)?;
        let mu = moments(
            &BeliefMeasure::finite_from_weights(&weights(&mut rng, 3)).map_err(err)?,
            &fs,
        )
        .map_err(err)?;
        let fit = fit_lambda(&p0, &fs, &mu, &opts).map_err(err)?;
        let q0 = p0.probs().unwrap();
        let fitted = kl(&fit.posterior.measure().map_err(err)?.probs().unwrap(), &q0);
        // the constraint set is a segment; walk it by p1
        let t = mu.mu[0];
        let mut best = f64::INFINITY;
        for k in 0..GRID {
            let p1 = k as f64 / (GRID - 1) as f64;
            let p2 = (t - f[1] * p1 - f[0] * (1.0 - p1)) / (f[2] - f[0]);
            let p0v = 1.0 - p1 - p2;
            if p2 < 0.0 || p0v < 0.0 {
                continue;
            }
            best = best.min(kl(&[p0v, p1, p2], &q0));
        }
        worst = worst.max(fitted - best);
    }
    Ok((
        worst <= 1e-6,
        format!("20 fixtures, max (fitted KL - grid min) = {worst:.2e} (tol 1e-6)"),
    ))
}

// 3
fn fundamental_limits() -> Verdict {
    let mut min_p = 1.0f64;
    let mut max_bound = 0.0f64;
    for d in 2..=16 {
        let f = fundamental_limit_features(d).map_err(err)?;
        let n = f.n();
        let prior = BeliefMeasure::uniform(&WorldSpace::finite(d).map_err(err)?);
        for x0 in 0..d {
            let g = GibbsPosterior::new(
                prior.clone(),
                f.clone(),
                lambda_for_world(d, x0, 40.0).map_err(err)?,
            )
            .map_err(err)?;
            min_p = min_p.min(g.measure().map_err(err)?.point_mass_at(&World::Index(x0)));
        }
        let fewer = if n > 1 {
            let rows: Vec<Vec<f64>> = f
                .values()
                .unwrap()
                .chunks(n)
                .map(|c| c[..n - 1].to_vec())
                .collect();
            Some(FeatureSet::from_rows(&rows).map_err(err)?)
        } else {
            None
        };
        match pigeonhole_certificate(&prior, fewer.as_ref()).map_err(err)? {
            Some(c) => max_bound = max_bound.max(c.bound),
            None => {
                return Ok((
                    false,
                    format!("d={d}: no certificate with {} features", n - 1),
                ))
            }
        }
    }
    Ok((
        min_p >= 1.0 - 1e-9 && max_bound <= 0.5,
        format!("d in 2..=16: min P(x0) = 1 - {:.2e} (tol 1e-9), max pigeonhole bound {max_bound} (<= 0.5)", 1.0 - min_p),
    ))
}

// 4
fn monotonicity() -> Verdict {
    let mut worst_lo = 0.0f64;
    let mut worst_hi = 0.0f64;
    let mut flat = 0;
    for seed in 0..100u64 {
        let mut rng = StreamRng::new(seed, stream_id("acceptance/monotone"), 0);
        let d = rng.random_range(3..=20);
        let n = rng.random_range(1..=3);
        // feature 0 takes at least the values 0 and 1
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        if k < 2 && i == 0 {
                            k as f64
                        } else {
                            rng.random_range(0..4) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let hi = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
        let f0 = rng.random_range(0.0..hi.max(1.0)).max(0.5);
        let t = TruthSet::from_mask(rows.iter().map(|r| r[0] >= f0).collect()).map_err(err)?;
        let tc = t.complement().map_err(err)?;
        let prior = BeliefMeasure::finite_from_weights(&weights(&mut rng, d)).map_err(err)?;
        let others: Vec<f64> = (1..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let base = GibbsPosterior::new(
            prior,
            FeatureSet::from_rows(&rows).map_err(err)?,
            vec![0.0; n],
        )
        .map_err(err)?;
        let mut last_odds = f64::NEG_INFINITY;
        let mut last_p = -1.0;
        for j in 0..50 {
            let mut lam = vec![-40.0 + 80.0 * j as f64 / 49.0];
            lam.extend(&others);
            let g = base.with_lambda(lam).map_err(err)?;
            // log-odds stay resolvable after P(T) rounds to 1
            let odds = g.log_partition(&t).map_err(err)? - g.log_partition(&tc).map_err(err)?;
            if odds.is_nan() || odds <= last_odds {
                return Ok((
                    false,
                    format!("seed {seed}: log-odds not increasing at grid point {j}"),
                ));
            }
            let p = g.measure().map_err(err)?.measure_of(&t).map_err(err)?;
            if p <= last_p {
                flat += 1;
            }
            if j == 0 {
                worst_lo = worst_lo.max(p);
            }
            if j == 49 {
                worst_hi = worst_hi.max(1.0 - p);
            }
            last_odds = odds;
            last_p = p;
        }
    }
    Ok((
        worst_lo < 1e-6 && worst_hi < 1e-6,
        format!(
            "100 fixtures, log-odds of T strictly increasing on all 50-point grids; P(T) at -40 <= {worst_lo:.1e}, \
             1 - P(T) at +40 <= {worst_hi:.1e} (tol 1e-6); {flat} steps where P(T) is already 1 in f64"
        ),
    ))
}

// 5
fn poll_closed_forms() -> Verdict {
    let (d, h) = (10usize, 6usize);
    let mut worst_gen = 0.0f64;
    let mut worst_26 = 0.0f64;
    let mut worst_28 = 0.0f64;
    let mut p_x0 = f64::NAN;
    let cases = [
        (8usize, vec![0u8, 0, 0, 0], 0.4, 0.4),
        (2, vec![1, 0, 1], 0.0, 0.1),
        (8, vec![2, 2, 0], 1.0, 0.9),
    ];
    for (x0, data, mu_want, mu_tilde_want) in cases {
        let s = PollScenario {
            d,
            h,
            eps: 0.1,
            x0,
            biased_agent: Some(BiasedAgent { delta: 0.1 }),
        };
        let o = poll_from_data(&s, data).map_err(err)?;
        if o.mu_hat != mu_want {
            return Ok((false, format!("muHat {} for case {mu_want}", o.mu_hat)));
        }
        let b = o.biased.as_ref().ok_or("no biased agent")?;
        if (b.mu_tilde - mu_tilde_want).abs() > 1e-15 {
            return Ok((
                false,
                format!("muTilde {} for case {mu_tilde_want}", b.mu_tilde),
            ));
        }
        worst_gen = worst_gen.max(o.generic_fit_tv(&s).map_err(err)?);
        let p = o.posterior.probs().unwrap();
        let pt = b.posterior.probs().unwrap();
        let (hf, nf) = (h as f64, (d - h) as f64);
        for k in 0..d {
            let kk = (k + 1) as f64;
            let (e26, e28) = if k < h {
                (
                    (1.0 - mu_want) / hf,
                    2.0 * kk * (1.0 - mu_tilde_want) / (hf * (hf + 1.0)),
                )
            } else {
                (
                    mu_want / nf,
                    2.0 * kk * mu_tilde_want / (nf * (d as f64 + hf + 1.0)),
                )
            };
            worst_26 = worst_26.max((p[k] - e26).abs());
            worst_28 = worst_28.max((pt[k] - e28).abs());
        }
        if mu_want == 1.0 {
            p_x0 = o.report.raw_values.p_x0;
        }
    }
    Ok((
        worst_gen <= 1e-12 && worst_26 <= 1e-12 && worst_28 <= 1e-12 && (p_x0 - 0.25).abs() <= 1e-12,
        format!(
            "3 cases: generic-fit TV {worst_gen:.1e}, default agent max err {worst_26:.1e}, biased agent max err \
             {worst_28:.1e} (tol 1e-12); P(x0) at muHat=1 = {p_x0}"
        ),
    ))
}

// 6
fn decimal_example() -> Verdict {
    let t2 = second_decimal_five();
    let mut exact_zero = true;
    let mut generic = 0.0f64;
    let mut ball_ok = true;
    let mut checked = 0;
    for i in 0..10u64 {
        for x0 in [0.0, 0.03, 0.05, 0.099] {
            let x0 = i as f64 / 10.0 + x0;
            let s = DecimalScenario { n: 10, x0 };
            // heads placing the empirical frequency inside cell i
            let o = decimal_from_heads(&s, 1000, i * 100 + 37).map_err(err)?;
            exact_zero &= o.second_decimal.active_info == 0.0;
            let p0 = BeliefMeasure::uniform(o.posterior.space());
            generic = generic.max(active_info(&p0, &o.posterior, &t2).map_err(err)?.abs());
            for k in 1..50 {
                let eps = 0.05 * k as f64 / 50.0;
                let b = ball(
                    o.posterior.space(),
                    Metric::SupNorm,
                    &World::Point(vec![x0]),
                    eps,
                    true,
                )
                .map_err(err)?;
                let m = o.posterior.measure_of(&b).map_err(err)?;
                ball_ok &= m <= 0.5 + 10.0 * eps + 1e-12;
                checked += 1;
            }
        }
    }
    let s = DecimalScenario { n: 100, x0: 0.2553 };
    let wins = (0..100u64)
        .filter(|&seed| {
            decimal_posterior(&s, 1_000_000, seed).is_ok_and(|o| o.second_decimal.full_learning)
        })
        .count();
    let rate = wins as f64 / 100.0;
    Ok((
        exact_zero && ball_ok && rate >= 0.99,
        format!(
            "n=10: I+(second decimal) == 0 in all 10 cells: {exact_zero} (generic path max {generic:.1e}); \
             ball bound held on {checked} (x0, eps) pairs: {ball_ok}; n=100, N=1e6: success rate {rate} (>= 0.99)"
        ),
    ))
}

// 7
fn convergence_rate() -> Verdict {
    let s = ScenarioKind::Coin(CoinCubeScenario {
        r: 2,
        features_per_coord: 1,
        x0: vec![0.3, 0.7],
        truth: None,
    });
    let rep = primary_convergence(&s, &[100, 1_000, 10_000, 100_000], 200, 7).map_err(err)?;
    Ok((
        (-0.6..=-0.4).contains(&rep.slope),
        format!(
            "slope {:.4} (band [-0.6, -0.4]), bootstrap 95% CI [{:.4}, {:.4}], medians {:?}",
            rep.slope,
            rep.slope_ci[0],
            rep.slope_ci[1],
            rep.medians
                .iter()
                .map(|m| format!("{m:.3e}"))
                .collect::<Vec<_>>()
        ),
    ))
}

// 8
fn clt_variance() -> Verdict {
    let s = ScenarioKind::Coin(CoinCubeScenario {
        r: 1,
        features_per_coord: 1,
        x0: vec![0.3],
        truth: None,
    });
    let a = TruthSet::rect(&[(0.0, 0.5)]).map_err(err)?;
    let rep = clt_check(&s, &a, 10_000, 5_000, 17, None).map_err(err)?;
    let z = rep.empirical_mean / rep.mean_stderr;
    Ok((
        (0.9..=1.1).contains(&rep.ratio),
        format!(
            "empiricalVar/predictedVar = {:.4} (band [0.9, 1.1]); empirical {:.4e}, predicted {:.4e}; mean deviation \
             {:.2} SE from 0",
            rep.ratio, rep.empirical_var, rep.predicted_var, z
        ),
    ))
}

fn coin4() -> (BeliefMeasure, FeatureSet, TruthSet) {
    let prior = BeliefMeasure::uniform(&WorldSpace::finite(4).unwrap());
    let f = FeatureSet::from_rows(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]]).unwrap();
    (prior, f, TruthSet::finite(4, &[2, 3]).unwrap())
}

// 9
fn secondary_expansion(suite: &Suite) -> Verdict {
    let (prior, f, t) = coin4();
    let rep = expansion_verify(&prior, &f, &t, &[1.0], &[50, 100, 200, 400, 800], 2000, 3)
        .map_err(err)?;
    let ratio = rep.fitted_slope / rep.c;
    suite.info(
        "9",
        "secondary expansion, full constant",
        format!(
            "fittedSlope/C_full = {:.4} (C_full {:.4} adds the MLE bias term); fittedSlope {:.4} +- {:.4}",
            rep.fitted_slope / rep.c_full,
            rep.c_full,
            rep.fitted_slope,
            rep.slope_stderr
        ),
    );
    Ok((
        (0.8..=1.2).contains(&ratio) && rep.max_identity_error <= 1e-12,
        format!(
            "fittedSlope/C = {ratio:.4} (band [0.8, 1.2], C = {:.4} from centred J); identity error {:.1e} (tol 1e-12)",
            rep.c, rep.max_identity_error
        ),
    ))
}

// 10
fn secondary_ceiling() -> Verdict {
    let x0 = [0.3];
    let coin = CoinCubeScenario {
        r: 1,
        features_per_coord: 1,
        x0: x0.to_vec(),
        truth: None,
    };
    let mut synth_margin = f64::INFINITY;
    for rep in synthetic_replicates(&SyntheticScenario::Coin(coin.clone()), 5, 10_000, 20, 10)
        .map_err(err)?
    {
        let floor = rep.gen0_floor();
        for g in &rep.generations {
            synth_margin = synth_margin.min(g.tv_to_delta - (floor - 0.05));
        }
    }
    // plug-in secondary agents fed from the limiting primary posterior
    let (lam, _) = one_tilt_for_mean(x0[0], 60.0);
    let space = WorldSpace::cube(1).map_err(err)?;
    let g = GibbsPosterior::new(
        BeliefMeasure::uniform(&space),
        FeatureSet::coordinate_linear(1).map_err(err)?,
        vec![lam],
    )
    .map_err(err)?;
    let x = World::Point(x0.to_vec());
    let floor = tv_to_point(&g.measure().map_err(err)?, &x, 0.05).map_err(err)?;
    let t = TruthSet::rect(&[(0.25, 0.35)]).map_err(err)?;
    let mut plug_margin = f64::INFINITY;
    let mut fits = 0;
    for m in [100usize, 1_000, 10_000] {
        for r in plugin_replicates(
            &g,
            &t,
            m,
            20,
            10,
            stream_id(&format!("acceptance/plugin/{m}")),
        )
        .map_err(err)?
        {
            let r = r.ok_or("boundary plug-in fit")?;
            let q = g
                .with_lambda(r.lambda_hat)
                .map_err(err)?
                .measure()
                .map_err(err)?;
            plug_margin = plug_margin.min(tv_to_point(&q, &x, 0.05).map_err(err)? - (floor - 0.05));
            fits += 1;
        }
    }
    Ok((
        synth_margin >= 0.0 && plug_margin >= 0.0,
        format!(
            "x0=0.3, eta=0.05, floor {floor:.4}: synthetic loop (20 reps x 5 gens, N=1e4) min margin {synth_margin:.4}; \
             plug-in ({fits} fits, m up to 1e4) min margin {plug_margin:.4} (both >= 0)"
        ),
    ))
}

// 11
fn cross_check() -> Verdict {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..50u64 {
        let mut rng = StreamRng::new(seed, stream_id("acceptance/cross"), 0);
        let d = rng.random_range(3..=12);
        let poll = PollScenario {
            d,
            h: rng.random_range(1..d),
            eps: rng.random_range(0.05..0.5),
            x0: rng.random_range(0..d),
            biased_agent: Some(BiasedAgent {
                delta: rng.random_range(0.01..0.3),
            }),
        };
        let r = rng.random_range(1..=2);
        let coin = CoinCubeScenario {
            r,
            features_per_coord: rng.random_range(1..=2),
            x0: (0..r).map(|_| rng.random_range(0.1..0.9)).collect(),
            truth: None,
        };
        let n = if rng.random_bool(0.5) { 10 } else { 100 };
        let decimal = DecimalScenario {
            n,
            x0: rng.random_range(0.0..1.0),
        };
        let tr = rng.random_range(1..=2);
        let tree = TreeScenario {
            r: tr,
            root: TreeNode::balanced(
                tr,
                rng.random_range(1..=3),
                rng.random_range(0.2..0.8),
                rng.random_range(0.1..0.9),
            ),
        };
        let k = rng.random_range(1..=3);
        let atoms: Vec<f64> = (0..k)
            .map(|i| (i as f64 + rng.random_range(0.2..0.8)) / k as f64)
            .collect();
        let w = weights(&mut rng, k + 1);
        let total: f64 = w.iter().sum();
        let spike = SpikeScenario {
            atoms,
            delta: if rng.random_bool(0.5) { 1e-2 } else { 1e-3 },
            weights: w.iter().map(|v| v / total).collect(),
        };
        let runs = [
            (ScenarioKind::Poll(poll), Some(rng.random_range(1..40))),
            (
                ScenarioKind::Coin(coin),
                Some(rng.random_range(100..10_000)),
            ),
            (
                ScenarioKind::Decimal(decimal),
                Some(rng.random_range(1_000..100_000)),
            ),
            (ScenarioKind::Tree(tree), None),
            (ScenarioKind::Spike(spike), None),
        ];
        for (kind, n) in runs {
            let name = kind.name();
            let cfg = ScenarioConfig {
                kind,
                n,
                replicates: 1,
            };
            let run =
                run_scenario(&cfg, seed, true).map_err(|e| format!("seed {seed} {name}: {e}"))?;
            if let Some(tv) = run.cross_check_tv {
                worst = worst.max(tv);
                checked += 1;
            }
        }
    }
    Ok((
        worst <= 1e-8,
        format!("50 seeds x 5 scenarios ({checked} interior fits compared): max TV {worst:.2e} (tol 1e-8)"),
    ))
}

// 12
fn determinism() -> Verdict {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/cookbook");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let scratch = std::env::temp_dir().join(format!("lka-acceptance-{}", std::process::id()));
    let mut files = 0;
    for path in &names {
        let text = std::fs::read_to_string(path).map_err(err)?;
        let mut outputs = Vec::new();
        for k in 0..2 {
            let opts = RunOptions {
                seed: None,
                out: Some(scratch.join(k.to_string())),
                no_timestamp: true,
            };
            let (_, written) =
                lka_cli::run_text(&text, &opts).map_err(|e| format!("{}: {e}", path.display()))?;
            outputs.push(
                written
                    .iter()
                    .map(|p| std::fs::read(p).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        if outputs[0] != outputs[1] {
            return Ok((false, format!("{} differs between runs", path.display())));
        }
        files += outputs[0].len();
    }
    let _ = std::fs::remove_dir_all(&scratch);
    Ok((
        true,
        format!(
            "{} cookbook experiments run twice, {files} result files byte-identical",
            names.len()
        ),
    ))
}

fn main() {
    let mut s = Suite {
        passed: 0,
        failed: 0,
    };
    let start = Instant::now();
    s.run("1", "moment matching", secs(10), moment_matching);
    s.run(
        "2",
        "I-projection grid oracle",
        secs(30),
        i_projection_oracle,
    );
    s.run("3", "fundamental limits", secs(5), fundamental_limits);
    s.run("4", "monotonicity in lambda_i", secs(5), monotonicity);
    s.run("5", "poll closed forms", None, poll_closed_forms);
    s.run("6", "decimal example", None, decimal_example);
    s.run("7", "primary convergence rate", secs(60), convergence_rate);
    s.run("8", "CLT variance", secs(60), clt_variance);
    let info = Suite {
        passed: 0,
        failed: 0,
    };
    s.run("9", "secondary expansion", secs(180), || {
        secondary_expansion(&info)
    });
    s.run("10", "secondary ceiling", None, secondary_ceiling);
    s.run("11", "scenario/solver cross-check", None, cross_check);
    s.run("12", "determinism", None, determinism);
    println!(
        "acceptance: {} passed, {} failed [{:.1}s]",
        s.passed,
        s.failed,
        start.elapsed().as_secs_f64()
    );
    if s.failed > 0 && std::env::var("LKA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
