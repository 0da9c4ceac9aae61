//! Damped Newton on the dual `ψ(λ) = log Z_λ − λ·μ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::model::Model;
use super::{Feasibility, FeatureSet, FitReport, GibbsPosterior, MomentVector, SolverOptions};
use crate::error::{invalid, LkaError, Result};
use crate::worlds::{BeliefMeasure, World};

/// Eigenvalues below this fraction of the largest span the gauge null space.
const NULL_REL: f64 = 1e-12;
/// Gap below which a capped, non-converged fit counts as a boundary target.
const BOUNDARY_GAP: f64 = 1e-6;
/// Boundary targets are only approached; push the gap this far before stopping.
const BOUNDARY_TOL: f64 = 1e-14;
/// Largest change of `λ·f` (in nats) a single step may make from a small `λ`.
const MAX_STEP_NATS: f64 = 30.0;
const MAX_HALVINGS: usize = 60;
/// How far the retry for a stalled capped fit may push `|λ|`, relative to the cap.
const WIDE_CAP_FACTOR: f64 = 100.0;

/// A fitted posterior and how the fit went.
#[derive(Debug, Clone)]
pub struct Fit {
    pub posterior: GibbsPosterior,
    pub report: FitReport,
}

impl Fit {
    /// Promote a boundary fit to a `BoundaryTarget` error.
    pub fn require_interior(self) -> Result<Fit> {
        match self.report.feasibility {
            Feasibility::Interior => Ok(self),
            _ => Err(LkaError::BoundaryTarget {
                gap: self.report.final_grad_norm,
                achieved: self.report.achieved_moments,
            }),
        }
    }

    pub fn lambda(&self) -> &[f64] {
        self.posterior.lambda()
    }

    pub fn is_interior(&self) -> bool {
        self.report.feasibility == Feasibility::Interior
    }
}

/// Fit `λ` so that the Gibbs measure matches `target`.
///
/// Boundary targets are returned as `Ok` with `feasibility = Boundary` and
/// coefficients capped at `lambda_cap`; see [`Fit::require_interior`].
pub fn fit_lambda(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    target: &MomentVector,
    opts: &SolverOptions,
) -> Result<Fit> {
    fit_lambda_from(prior, features, target, opts, None)
}

/// [`fit_lambda`] from a given starting point.
pub fn fit_lambda_from(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    target: &MomentVector,
    opts: &SolverOptions,
    initial: Option<&[f64]>,
) -> Result<Fit> {
    opts.validate()?;
    let model = Arc::new(Model::build(prior, features)?);
    fit_with_model(prior, features, model, target, opts, initial)
}

/// Maximum likelihood `λ` from a sample: the fit to the empirical moments.
pub fn mle_lambda(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    sample: &[World],
    opts: &SolverOptions,
) -> Result<Fit> {
    if sample.is_empty() {
        return invalid("sample must not be empty");
    }
    let n = features.n();
    let mut mu = vec![0.0; n];
    for x in sample {
        for (m, v) in mu.iter_mut().zip(features.eval(x)?) {
            *m += v;
        }
    }
    let m = sample.len() as f64;
    mu.iter_mut().for_each(|v| *v /= m);
    fit_lambda(prior, features, &MomentVector::new(mu), opts)
}

struct Gauge {
    /// Orthonormal basis of the identifiable directions (n × k).
    range: DMatrix<f64>,
    null: Vec<DVector<f64>>,
    label: String,
}

fn gauge_of(cov0: &DMatrix<f64>) -> Gauge {
    let n = cov0.nrows();
    let eig = SymmetricEigen::new(cov0.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut range_cols = Vec::new();
    let mut null = Vec::new();
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i).into_owned();
        if top > 0.0 && ev > NULL_REL * top {
            range_cols.push(v);
        } else {
            null.push(v);
        }
    }
    let label = match null.len() {
        0 => "none".to_string(),
        1 if {
            let v = &null[0];
            let s = 1.0 / (n as f64).sqrt();
            v.iter().all(|x| (x.abs() - s).abs() < 1e-8)
        } =>
        {
            "zero-mean".to_string()
        }
        k => format!("orthogonal-complement({k})"),
    };
    let range = if range_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&range_cols)
    };
    Gauge { range, null, label }
}

impl Gauge {
    fn project(&self, lam: &mut [f64]) {
        for v in &self.null {
            let c: f64 = v.iter().zip(lam.iter()).map(|(a, b)| a * b).sum();
            for (l, a) in lam.iter_mut().zip(v.iter()) {
                *l -= c * a;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton direction restricted to the identifiable subspace.
fn newton_direction(cov: &DMatrix<f64>, grad: &[f64], gauge: &Gauge) -> Option<Vec<f64>> {
    let b = &gauge.range;
    if b.ncols() == 0 {
        return None;
    }
    let g = DVector::from_column_slice(grad);
    let hr = b.transpose() * cov * b;
    let gr = b.transpose() * &g;
    let y = match hr.clone().cholesky() {
        Some(ch) => ch.solve(&(-&gr)),
        None => {
            let eig = SymmetricEigen::new(hr);
            let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
            if !(top > 0.0) {
                return None;
            }
            let mut y = DVector::zeros(gr.len());
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                if ev > NULL_REL * top {
                    let v = eig.eigenvectors.column(i);
                    y -= v * (v.dot(&gr) / ev);
                }
            }
            y
        }
    };
    let d = b * y;
    let d: Vec<f64> = d.iter().copied().collect();
    (d.iter().all(|x| x.is_finite()) && dot(&d, grad) < 0.0).then_some(d)
}

pub(crate) fn fit_with_model(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    model: Arc<Model>,
    target: &MomentVector,
    opts: &SolverOptions,
    initial: Option<&[f64]>,
) -> Result<Fit> {
    let n = model.n();
    if target.len() != n {
        return invalid(format!(
            "target has {} entries, expected n = {n}",
            target.len()
        ));
    }
    if target.mu.iter().any(|v| !v.is_finite()) {
        return invalid("target must be finite");
    }
    let mu = &target.mu;
    let known = model.classify(mu, &features.ranges());
    let zero = vec![0.0; n];
    let e0 = model.eval(&zero);
    if known == Some(Feasibility::Infeasible) {
        let gap = inf_norm(&sub(&e0.mean, mu));
        return Err(LkaError::Infeasible {
            achieved: e0.mean,
            gap,
        });
    }
    let gauge = gauge_of(&e0.cov);
    // along a null direction v, v·f is constant; the target must agree
    for v in &gauge.null {
        let vs: Vec<f64> = v.iter().copied().collect();
        let off = (dot(&vs, mu) - dot(&vs, &e0.mean)).abs();
        if off > 1e-9 * (1.0 + inf_norm(mu)) {
            return Err(LkaError::Infeasible {
                achieved: e0.mean.clone(),
                gap: off,
            });
        }
    }

    let mut lam: Vec<f64> = match initial {
        Some(x) if x.len() == n => x.to_vec(),
        Some(_) => return invalid("initial lambda has the wrong length"),
        None => model.warm_start(mu),
    };
    let tol = if known == Some(Feasibility::Boundary) {
        opts.gradient_tolerance.min(BOUNDARY_TOL)
    } else {
        opts.gradient_tolerance
    };
    let span = features
        .ranges()
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let newton = Newton {
        model: &model,
        mu,
        gauge: &gauge,
        tol,
        span,
        opts,
    };
    let mut cap = opts.lambda_cap;
    let (mut e, mut grad, mut iterations) = newton.run(&mut lam, cap, opts.max_iterations);
    // An interior target of an ill-conditioned family can need |λ| beyond the
    // cap; a capped run that stalls far from the target gets one wider retry.
    let stalled = |lam: &[f64], grad: &[f64], cap: f64| {
        inf_norm(grad) > BOUNDARY_GAP && lam.iter().any(|v| v.abs() >= cap * (1.0 - 1e-12))
    };
    if known != Some(Feasibility::Boundary)
        && stalled(&lam, &grad, cap)
        && iterations < opts.max_iterations
    {
        let wide = cap * WIDE_CAP_FACTOR;
        let mut trial = lam.clone();
        let (e2, g2, it2) = newton.run(&mut trial, wide, opts.max_iterations - iterations);
        iterations += it2;
        if inf_norm(&g2) <= tol && !trial.iter().any(|v| v.abs() >= wide * (1.0 - 1e-12)) {
            (lam, e, grad, cap) = (trial, e2, g2, wide);
        }
    }

    let gap = inf_norm(&grad);
    let capped = lam.iter().any(|v| v.abs() >= cap * (1.0 - 1e-12));
    let converged = gap <= tol;
    let feasibility = match (converged, known) {
        (true, Some(Feasibility::Boundary)) => Feasibility::Boundary,
        (true, _) if capped => Feasibility::Boundary,
        (true, _) => Feasibility::Interior,
        (false, Some(Feasibility::Boundary)) => Feasibility::Boundary,
        (false, None) if capped && gap <= BOUNDARY_GAP => Feasibility::Boundary,
        (false, None) if capped => Feasibility::Infeasible,
        (false, _) => {
            return Err(LkaError::NotConverged {
                iterations,
                grad_norm: gap,
            })
        }
    };
    if feasibility == Feasibility::Infeasible {
        return Err(LkaError::Infeasible {
            achieved: e.mean,
            gap,
        });
    }
    let report = FitReport {
        lambda: lam.clone(),
        gauge: gauge.label.clone(),
        iterations,
        final_grad_norm: gap,
        feasibility,
        achieved_moments: e.mean.clone(),
    };
    let posterior = GibbsPosterior::with_model(
        prior.clone(),
        features.clone(),
        lam,
        Some(gauge.label),
        model,
    )?;
    Ok(Fit { posterior, report })
}

struct Newton<'a> {
    model: &'a Model,
    mu: &'a [f64],
    gauge: &'a Gauge,
    tol: f64,
    span: f64,
    opts: &'a SolverOptions,
}

impl Newton<'_> {
    /// Damped Newton from `lam` with `|λ_i| <= cap`; returns the evaluation at
    /// the final point, its gradient and the iterations used.
    fn run(
        &self,
        lam: &mut Vec<f64>,
        cap: f64,
        max_iterations: usize,
    ) -> (super::model::Eval, Vec<f64>, usize) {
        let (model, mu, gauge, opts) = (self.model, self.mu, self.gauge, self.opts);
        let clamp = |lam: &mut [f64]| lam.iter_mut().for_each(|v| *v = v.clamp(-cap, cap));
        gauge.project(lam);
        clamp(lam);
        let psi = |lam: &[f64], log_z: f64| log_z - dot(lam, mu);
        let mut e = model.eval(lam);
        let mut iterations = 0;
        let mut grad = sub(&e.mean, mu);
        while inf_norm(&grad) > self.tol && iterations < max_iterations {
            iterations += 1;
            let mut dir = newton_direction(&e.cov, &grad, gauge).unwrap_or_else(|| {
                let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
                gauge.project(&mut d);
                d
            });
            // near-degenerate covariances give steps that overshoot a saturated
            // tilt and leave nothing for backtracking to recover
            let limit = (MAX_STEP_NATS / self.span).max(0.5 * inf_norm(lam));
            let len = inf_norm(&dir);
            if len > limit {
                dir.iter_mut().for_each(|d| *d *= limit / len);
            }
            let f0 = psi(lam, e.log_z);
            let slack = 4.0 * f64::EPSILON * (1.0 + f0.abs());
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let mut cand: Vec<f64> = lam.iter().zip(&dir).map(|(l, d)| l + t * d).collect();
                gauge.project(&mut cand);
                clamp(&mut cand);
                let step = sub(&cand, lam);
                if inf_norm(&step) == 0.0 {
                    break;
                }
                let lz = model.log_z(&cand);
                if lz.is_finite() && psi(&cand, lz) <= f0 + opts.armijo * dot(&grad, &step) + slack
                {
                    accepted = Some(cand);
                    break;
                }
                t *= opts.backtrack;
            }
            match accepted {
                Some(c) => {
                    *lam = c;
                    e = model.eval(lam);
                    grad = sub(&e.mean, mu);
                }
                None => break,
            }
        }
        (e, grad, iterations)
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
