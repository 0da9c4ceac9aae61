//! One function per command. Inputs are built and checked first; only then
//! does any simulation start.

use lka_core::asymptotics::{
    clt_check, clt_default_sets, primary_convergence, synthetic_replicates, AsymRecord, Rate,
};
use lka_core::lka::{
    bias, fundamental_limit_features, lambda_for_world, lka_verdict, pigeonhole_certificate,
};
use lka_core::maxent::{fit_lambda, FeatureSet, GibbsPosterior, MomentVector};
use lka_core::rng::stream_id;
use lka_core::scenarios::{run_scenario, ScenarioKind};
use lka_core::secondary::{bayesian_secondary, expansion_verify, plugin_replicates};
use lka_core::worlds::{BeliefMeasure, Metric, TruthSet, World, WorldSpace};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    AsymptoticsPayload, BeliefSpec, FitPayload, LimitsPayload, LkaPayload, ScenarioPayload,
    SecondaryPayload,
};
use crate::table::Table;
use crate::{CliError, Outcome, Payload};

/// Largest moment error `fit` accepts beyond the solver's own tolerance.
const FIT_SLACK: f64 = 1e-12;
const CROSS_CHECK_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-12;
const LIMIT_TOL: f64 = 1e-9;

const ASYM_HEADER: [&str; 5] = ["experiment", "N", "replicate", "quantity", "value"];

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run(payload: &Payload, seed: u64) -> Result<Outcome, CliError> {
    match payload {
        Payload::Fit(p) => fit(p),
        Payload::Lka(p) => lka(p),
        Payload::Scenario(p) => scenario(p, seed),
        Payload::Secondary(p) => secondary(p, seed),
        Payload::Asymptotics(p) => asymptotics(p, seed),
        Payload::Limits(p) => limits(p),
    }
}

fn fit(p: &FitPayload) -> Result<Outcome, CliError> {
    let (prior, f) = p.model.build()?;
    p.solver
        .validate()
        .map_err(|e| CliError::field("solver", e))?;
    if p.target.len() != f.n() {
        return Err(CliError::config(format!(
            "target: expected {} moments, got {}",
            f.n(),
            p.target.len()
        )));
    }
    let fit = fit_lambda(&prior, &f, &MomentVector::new(p.target.clone()), &p.solver)?;
    let err = fit
        .report
        .achieved_moments
        .iter()
        .zip(&p.target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let tol = p.solver.gradient_tolerance + FIT_SLACK;
    let summary = format!(
        "fit: feasibility={:?} iterations={} maxMomentError={err:.3e} (tol {tol:.0e}) {}",
        fit.report.feasibility,
        fit.report.iterations,
        verdict(err <= tol)
    );
    let mut table = Table::new(&["quantity", "index", "value"]);
    for (i, v) in fit.report.lambda.iter().enumerate() {
        table.push(vec!["lambda".into(), i.into(), (*v).into()]);
    }
    for (i, v) in fit.report.achieved_moments.iter().enumerate() {
        table.push(vec!["achieved".into(), i.into(), (*v).into()]);
    }
    Ok(Outcome {
        command: "fit",
        result: json!({
            "report": to_json(&fit.report),
            "posterior": to_json(&fit.posterior.measure()?),
        }),
        table: Some(table),
        summary,
    })
}

fn belief(spec: &BeliefSpec, prior: &BeliefMeasure, what: &str) -> Result<BeliefMeasure, CliError> {
    match (&spec.probs, &spec.features, &spec.lambda) {
        (Some(p), None, None) => {
            BeliefMeasure::finite(p.clone()).map_err(|e| CliError::field(what, e))
        }
        (None, Some(rows), Some(lam)) => {
            let f = FeatureSet::from_rows(rows).map_err(|e| CliError::field(what, e))?;
            let g = GibbsPosterior::new(prior.clone(), f, lam.clone())
                .map_err(|e| CliError::field(what, e))?;
            Ok(g.measure()?)
        }
        _ => Err(CliError::config(format!(
            "{what}: give probs, or features with lambda"
        ))),
    }
}

fn lka(p: &LkaPayload) -> Result<Outcome, CliError> {
    let p0 =
        BeliefMeasure::finite_from_weights(&p.prior).map_err(|e| CliError::field("prior", e))?;
    let post = belief(&p.posterior, &p0, "posterior")?;
    let tilde = p
        .p_tilde
        .as_ref()
        .map(|s| belief(s, &p0, "pTilde"))
        .transpose()?;
    let t = TruthSet::finite(p.prior.len(), &p.truth).map_err(|e| CliError::field("truth", e))?;
    if p.x0 >= p.prior.len() {
        return Err(CliError::config("x0: must index a world"));
    }
    let report = lka_verdict(
        &p0,
        &post,
        &t,
        &World::Index(p.x0),
        Metric::Discrete,
        p.eps_grid.as_deref(),
    )
    .map_err(|e| CliError::field("lka", e))?;
    let bias_report = tilde.map(|pt| bias(&t, &post, &pt)).transpose()?;
    let summary = format!(
        "lka: I+={:.6} learned={} knowledgeAcquired={} fullKnowledge={}",
        report.active_info, report.learned, report.knowledge_acquired, report.full_knowledge
    );
    let mut result = json!({ "report": to_json(&report) });
    if let Some(b) = bias_report {
        result["bias"] = to_json(&b);
    }
    Ok(Outcome {
        command: "lka",
        result,
        table: None,
        summary,
    })
}

fn scenario(p: &ScenarioPayload, seed: u64) -> Result<Outcome, CliError> {
    let cfgs = p.configs()?;
    for (k, c) in cfgs.iter().enumerate() {
        let at = if cfgs.len() == 1 {
            "scenario".to_string()
        } else {
            format!("runs[{k}]")
        };
        c.kind.validate().map_err(|e| CliError::field(&at, e))?;
        if c.replicates == 0 {
            return Err(CliError::config(format!("{at}.replicates: must be >= 1")));
        }
    }
    let mut runs = Vec::new();
    let mut table = Table::new(&[
        "run",
        "scenario",
        "seed",
        "N_or_m",
        "replicate",
        "quantity",
        "value",
    ]);
    let mut worst: Option<f64> = None;
    for (k, c) in cfgs.iter().enumerate() {
        let run = run_scenario(c, seed, p.cross_check)?;
        for r in &run.records {
            table.push(vec![
                k.into(),
                r.scenario.as_str().into(),
                r.seed.into(),
                r.n_or_m.into(),
                r.replicate.into(),
                r.quantity.as_str().into(),
                r.value.into(),
            ]);
        }
        if let Some(tv) = run.cross_check_tv {
            worst = Some(worst.map_or(tv, |w: f64| w.max(tv)));
        }
        runs.push(run);
    }
    // by (run, replicate, N_or_m), keeping quantity order
    table.sort_by_columns(&[0, 4, 3]);
    let names: Vec<&str> = runs.iter().map(|r| r.scenario.as_str()).collect();
    let reps: usize = cfgs.iter().map(|c| c.replicates).sum();
    let summary = match worst {
        Some(tv) => format!(
            "scenario {}: {reps} replicates; crossCheckTv={tv:.3e} (tol {CROSS_CHECK_TOL:.0e}) {}",
            names.join("+"),
            verdict(tv <= CROSS_CHECK_TOL)
        ),
        None => format!("scenario {}: {reps} replicates", names.join("+")),
    };
    let result = if runs.len() == 1 {
        to_json(&runs[0])
    } else {
        json!({ "runs": to_json(&runs) })
    };
    Ok(Outcome {
        command: "scenario",
        result,
        table: Some(table),
        summary,
    })
}

fn push_asym(table: &mut Table, rec: &AsymRecord) {
    table.push(vec![
        rec.experiment.as_str().into(),
        rec.n.into(),
        rec.replicate.into(),
        rec.quantity.as_str().into(),
        rec.value.into(),
    ]);
}

fn require_increasing(v: &[usize], name: &str) -> Result<(), CliError> {
    if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!(
            "{name}: must be positive and strictly increasing"
        )));
    }
    Ok(())
}

fn secondary(p: &SecondaryPayload, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new(&ASYM_HEADER);
    match p {
        SecondaryPayload::Plugin {
            model,
            truth,
            lambda,
            m_list,
            r,
        } => {
            let (prior, f) = model.build()?;
            let t = truth.build(prior.space())?;
            require_increasing(m_list, "mList")?;
            if *r == 0 {
                return Err(CliError::config("R: must be >= 1"));
            }
            let g = GibbsPosterior::new(prior, f, lambda.clone())
                .map_err(|e| CliError::field("lambda", e))?;
            let mut points = Vec::new();
            let mut worst: f64 = 0.0;
            for &m in m_list {
                let reps =
                    plugin_replicates(&g, &t, m, *r, seed, stream_id(&format!("plugin/{m}")))?;
                for (i, rep) in reps.iter().enumerate() {
                    let Some(rep) = rep else { continue };
                    worst = worst.max(rep.identity_error);
                    for (q, v) in [
                        ("IhatPlus", rep.ihat_plus),
                        ("IPlus", rep.i_plus),
                        ("bias", rep.bias),
                    ] {
                        table.push(vec![
                            "plugin".into(),
                            m.into(),
                            i.into(),
                            q.into(),
                            v.into(),
                        ]);
                    }
                    for (k, l) in rep.lambda_hat.iter().enumerate() {
                        table.push(vec![
                            "plugin".into(),
                            m.into(),
                            i.into(),
                            format!("lambdaHat[{k}]").into(),
                            (*l).into(),
                        ]);
                    }
                }
                let boundary = reps.iter().filter(|x| x.is_none()).count();
                points.push(
                    json!({ "m": m, "boundaryCount": boundary, "replicates": to_json(&reps) }),
                );
            }
            table.sort_by_columns(&[2, 1]);
            Ok(Outcome {
                command: "secondary",
                result: json!({ "mode": "plugin", "points": points }),
                table: Some(table),
                summary: format!(
                    "secondary plugin: maxIdentityError={worst:.3e} (tol {IDENTITY_TOL:.0e}) {}",
                    verdict(worst <= IDENTITY_TOL)
                ),
            })
        }
        SecondaryPayload::Expansion {
            model,
            truth,
            lambda,
            m_list,
            r,
        } => {
            let (prior, f) = model.build()?;
            let t = truth.build(prior.space())?;
            require_increasing(m_list, "mList")?;
            let rep = expansion_verify(&prior, &f, &t, lambda, m_list, *r, seed)?;
            for pt in &rep.empirical {
                for (q, v) in [
                    ("meanGap", pt.mean_gap),
                    ("stderr", pt.stderr),
                    ("excludedRate", pt.excluded_rate),
                ] {
                    table.push(vec![
                        "expansion".into(),
                        pt.m.into(),
                        0usize.into(),
                        q.into(),
                        v.into(),
                    ]);
                }
            }
            let ratio = rep.fitted_slope / rep.c;
            let pass = (0.8..=1.2).contains(&ratio) && rep.max_identity_error <= IDENTITY_TOL;
            Ok(Outcome {
                command: "secondary",
                result: json!({ "mode": "expansion", "report": to_json(&rep) }),
                table: Some(table),
                summary: format!(
                    "secondary expansion: fittedSlope/C={ratio:.3} (band [0.8, 1.2]); fittedSlope/C_full={:.3}; maxIdentityError={:.1e} {}",
                    rep.fitted_slope / rep.c_full,
                    rep.max_identity_error,
                    verdict(pass)
                ),
            })
        }
        SecondaryPayload::Bayesian {
            model,
            truth,
            lambda,
            m,
            grid,
        } => {
            let (prior, f) = model.build()?;
            let t = truth.build(prior.space())?;
            grid.validate().map_err(|e| CliError::field("grid", e))?;
            let rep = bayesian_secondary(&prior, &f, &t, lambda, *m, grid, seed)?;
            Ok(Outcome {
                command: "secondary",
                result: json!({ "mode": "bayesian", "report": to_json(&rep) }),
                table: None,
                summary: format!(
                    "secondary bayesian: I~+={:.6} edgeMass={:.2e} (limit 1e-2) PASS",
                    rep.i_tilde_plus, rep.edge_mass
                ),
            })
        }
    }
}

fn asymptotics(p: &AsymptoticsPayload, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new(&ASYM_HEADER);
    match p {
        AsymptoticsPayload::Convergence { fixture, ns, r } => {
            fixture
                .validate()
                .map_err(|e| CliError::field("fixture", e))?;
            require_increasing(ns, "Ns")?;
            let rep = primary_convergence(fixture, ns, *r, seed)?;
            for rec in rep.records() {
                push_asym(&mut table, &rec);
            }
            table.sort_by_columns(&[2, 1]);
            let last = rep.medians.last().copied().unwrap_or(f64::NAN);
            let summary = match rep.rate {
                Rate::RootN => format!(
                    "asymptotics convergence: slope={:.3} CI [{:.3}, {:.3}] (band [-0.6, -0.4]) {}",
                    rep.slope,
                    rep.slope_ci[0],
                    rep.slope_ci[1],
                    verdict((-0.6..=-0.4).contains(&rep.slope))
                ),
                Rate::Exponential => format!(
                    "asymptotics convergence: exponential rate; mismatch rate at largest N={:.3e}",
                    rep.mismatch_rate.as_ref().and_then(|v| v.last()).copied().unwrap_or(f64::NAN)
                ),
                Rate::PointMass => format!(
                    "asymptotics convergence: median tv_to_delta at largest N={last:.3e} (tol 1e-2) {}",
                    verdict(last <= 0.01)
                ),
            };
            Ok(Outcome {
                command: "asymptotics",
                result: json!({ "experiment": "convergence", "report": to_json(&rep) }),
                table: Some(table),
                summary,
            })
        }
        AsymptoticsPayload::Clt {
            fixture,
            a,
            n,
            r,
            fd_step,
        } => {
            let ScenarioKind::Coin(coin) = fixture else {
                return Err(CliError::config(
                    "fixture: the CLT check needs a coin scenario",
                ));
            };
            fixture
                .validate()
                .map_err(|e| CliError::field("fixture", e))?;
            let sets = match a {
                Some(v) if !v.is_empty() => v.clone(),
                Some(_) => return Err(CliError::config("A: must not be empty")),
                None => clt_default_sets(coin, seed)?,
            };
            let cube = WorldSpace::cube(coin.r)?;
            for (k, s) in sets.iter().enumerate() {
                s.space
                    .expect_same(&cube)
                    .map_err(|e| CliError::field(&format!("A[{k}]"), e))?;
            }
            let mut reports = Vec::new();
            for (k, s) in sets.iter().enumerate() {
                let rep = clt_check(fixture, s, *n, *r, seed, *fd_step)
                    .map_err(|e| CliError::field(&format!("A[{k}]"), e))?;
                for rec in rep.records() {
                    push_asym(
                        &mut table,
                        &AsymRecord {
                            experiment: format!("clt/A{k}"),
                            ..rec
                        },
                    );
                }
                reports.push(rep);
            }
            let first = &reports[0];
            let summary = format!(
                "asymptotics clt: empiricalVar/predictedVar={:.3} on A[0] (band [0.9, 1.1]) {}",
                first.ratio,
                verdict((0.9..=1.1).contains(&first.ratio))
            );
            Ok(Outcome {
                command: "asymptotics",
                result: json!({ "experiment": "clt", "reports": to_json(&reports) }),
                table: Some(table),
                summary,
            })
        }
        AsymptoticsPayload::Synthetic {
            fixture,
            generations,
            n_per_gen,
            r,
        } => {
            if *generations == 0 || *n_per_gen == 0 || *r == 0 {
                return Err(CliError::config("generations, NPerGen and R must be >= 1"));
            }
            let reps = synthetic_replicates(fixture, *generations, *n_per_gen, *r, seed)?;
            let mut margin = f64::INFINITY;
            for (i, rep) in reps.iter().enumerate() {
                for rec in rep.records(i) {
                    push_asym(&mut table, &rec);
                }
                let floor = rep.gen0_floor();
                for g in &rep.generations {
                    margin = margin.min(g.tv_to_delta - floor);
                }
            }
            table.sort_by_columns(&[2, 1]);
            Ok(Outcome {
                command: "asymptotics",
                result: json!({ "experiment": "synthetic", "replicates": to_json(&reps) }),
                table: Some(table),
                summary: format!(
                    "asymptotics synthetic: min(tv_to_delta - gen0 floor)={margin:.4} (bound -0.05) {}",
                    verdict(margin >= -0.05)
                ),
            })
        }
    }
}

fn limits(p: &LimitsPayload) -> Result<Outcome, CliError> {
    let ds: Vec<usize> = match (p.d, p.d_list.is_empty()) {
        (Some(d), true) => vec![d],
        (None, false) => p.d_list.clone(),
        _ => return Err(CliError::config("d: give exactly one of d or dList")),
    };
    if ds.iter().any(|&d| d < 2) {
        return Err(CliError::config("d: must be >= 2"));
    }
    if !p.magnitude.is_finite() || p.magnitude <= 0.0 {
        return Err(CliError::config("magnitude: must be positive"));
    }
    let mut table = Table::new(&["d", "x0", "quantity", "value"]);
    let mut out = Vec::new();
    let mut all = true;
    for &d in &ds {
        let f = fundamental_limit_features(d)?;
        let n = f.n();
        let prior = BeliefMeasure::uniform(&WorldSpace::finite(d)?);
        let base = GibbsPosterior::new(prior.clone(), f.clone(), vec![0.0; n])?;
        let mut p_x0 = Vec::with_capacity(d);
        for x0 in 0..d {
            let g = base.with_lambda(lambda_for_world(d, x0, p.magnitude)?)?;
            let v = g.measure()?.point_mass_at(&World::Index(x0));
            table.push(vec![d.into(), x0.into(), "P_x0".into(), v.into()]);
            p_x0.push(v);
        }
        let min_p = p_x0.iter().copied().fold(1.0, f64::min);
        // the first n − 1 bits cannot separate all worlds
        let fewer = if n > 1 {
            let rows: Vec<Vec<f64>> = f
                .values()
                .unwrap()
                .chunks(n)
                .map(|c| c[..n - 1].to_vec())
                .collect();
            Some(FeatureSet::from_rows(&rows)?)
        } else {
            None
        };
        let cert = pigeonhole_certificate(&prior, fewer.as_ref())?;
        let cert_ok = cert.as_ref().is_some_and(|c| c.bound <= 0.5);
        all &= min_p >= 1.0 - LIMIT_TOL && cert_ok;
        out.push(json!({
            "d": d,
            "n_required": n,
            "magnitude": p.magnitude,
            "P_x0": p_x0,
            "minP_x0": min_p,
            "pigeonhole": to_json(&cert),
        }));
    }
    let summary = if ds.len() == 1 {
        format!(
            "limits d={}: n_required={} minP(x0)={:.12} (tol 1-1e-9) {}",
            ds[0],
            out[0]["n_required"],
            out[0]["minP_x0"].as_f64().unwrap(),
            verdict(all)
        )
    } else {
        format!("limits d in {ds:?}: all certified {}", verdict(all))
    };
    let result = if ds.len() == 1 {
        out.remove(0)
    } else {
        json!({ "limits": out })
    };
    Ok(Outcome {
        command: "limits",
        result,
        table: Some(table),
        summary,
    })
}
