//! The `1/m` bias of the plug-in estimate `Î⁺(T)` and its Monte Carlo check.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{log_mass, plugin_replicates};
use crate::error::{invalid, LkaError, Result};
use crate::maxent::{FeatureSet, GibbsPosterior};
use crate::rng::stream_id;
use crate::worlds::{BeliefMeasure, TruthSet};

pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Relative eigenvalue floor below which `J` counts as singular.
const SINGULAR_REL: f64 = 1e-12;

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConstant {
    /// `Cov_{Q_λ}(f)`.
    #[serde(rename = "J")]
    pub j: Matrix,
    /// `E_{Q_λ}[f fᵀ]`.
    #[serde(rename = "J_uncentered")]
    pub j_uncentered: Matrix,
    /// Hessian of `λ′ ↦ Bias(T; λ, λ′)` at `λ′ = λ`.
    #[serde(rename = "H")]
    pub h: Matrix,
    /// `tr(J⁻¹H)/2` with the centred `J`.
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_uncentered")]
    pub c_uncentered: f64,
    /// Gradient of the bias in `λ′`, `E_{Q|T}[f] − E_Q[f]`.
    #[serde(rename = "biasGradient")]
    pub bias_gradient: Vec<f64>,
    /// The `1/m` coefficient of `E[λ̂ − λ]`, `−½ J⁻¹ κ(J⁻¹)`.
    #[serde(rename = "mleBias")]
    pub mle_bias: Vec<f64>,
    /// `C` plus the first-order term from the MLE bias: `∇Bias · b + tr(J⁻¹H)/2`.
    #[serde(rename = "C_full")]
    pub c_full: f64,
    #[serde(rename = "fdStep")]
    pub fd_step: f64,
    /// `max |H(h) − H(h/2)|`.
    #[serde(rename = "hStepError")]
    pub h_step_error: f64,
}

fn to_dm(a: &Matrix) -> DMatrix<f64> {
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| a[i][j])
}

fn to_rows(a: &DMatrix<f64>) -> Matrix {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(top > 0.0) || eig.eigenvalues.iter().any(|&v| v <= SINGULAR_REL * top) {
        return Err(LkaError::SingularJ);
    }
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    Ok(&eig.eigenvectors * inv * eig.eigenvectors.transpose())
}

fn shifted(lam: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut l = lam.to_vec();
    for &(i, d) in moves {
        l[i] += d;
    }
    l
}

/// Central second differences of `f` at `lam`, symmetrized.
fn fd_hessian(f: &dyn Fn(&[f64]) -> Result<f64>, lam: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = lam.len();
    let f0 = f(lam)?;
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        let up = f(&shifted(lam, &[(a, h)]))?;
        let dn = f(&shifted(lam, &[(a, -h)]))?;
        out[(a, a)] = (up - 2.0 * f0 + dn) / (h * h);
        for b in 0..a {
            let pp = f(&shifted(lam, &[(a, h), (b, h)]))?;
            let pm = f(&shifted(lam, &[(a, h), (b, -h)]))?;
            let mp = f(&shifted(lam, &[(a, -h), (b, h)]))?;
            let mm = f(&shifted(lam, &[(a, -h), (b, -h)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// `∂/∂λ′ Bias(T; λ, λ′)` at `λ′ = λ` by Richardson-extrapolated central differences.
pub fn bias_gradient(g: &GibbsPosterior, t: &TruthSet, h: f64) -> Result<Vec<f64>> {
    let f = |l: &[f64]| log_mass(&g.with_lambda(l.to_vec())?, t);
    let lam = g.lambda();
    (0..lam.len())
        .map(|a| {
            let d = |s: f64| -> Result<f64> {
                Ok((f(&shifted(lam, &[(a, s)]))? - f(&shifted(lam, &[(a, -s)]))?) / (2.0 * s))
            };
            Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
        })
        .collect()
}

/// Third cumulants `κ_{bcd}` as derivatives of the covariance, `[d][b][c]`.
fn third_cumulants(g: &GibbsPosterior, h: f64) -> Result<Vec<DMatrix<f64>>> {
    let lam = g.lambda();
    let cov = |l: Vec<f64>| -> Result<DMatrix<f64>> { Ok(to_dm(&g.with_lambda(l)?.covariance())) };
    (0..lam.len())
        .map(|d| {
            let diff = |s: f64| -> Result<DMatrix<f64>> {
                Ok((cov(shifted(lam, &[(d, s)]))? - cov(shifted(lam, &[(d, -s)]))?) / (2.0 * s))
            };
            Ok((diff(0.5 * h)? * 4.0 - diff(h)?) / 3.0)
        })
        .collect()
}

/// `J`, `H` and `C = tr(J⁻¹H)/2` at `λ`, plus the uncentred and bias-corrected variants.
pub fn expansion_constant(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    t: &TruthSet,
    lambda_true: &[f64],
    fd_step: Option<f64>,
) -> Result<ExpansionConstant> {
    let h = fd_step.unwrap_or(DEFAULT_FD_STEP);
    if !(h > 0.0 && h.is_finite()) {
        return invalid("fd_step must be positive");
    }
    let g = GibbsPosterior::new(prior.clone(), features.clone(), lambda_true.to_vec())?;
    if !(g.measure()?.measure_of(t)? > 0.0) {
        return invalid("T must have positive mass under Q_λ");
    }
    let n = features.n();
    let j = to_dm(&g.covariance());
    let mu = g.moments().mu;
    let j_unc = DMatrix::from_fn(n, n, |a, b| j[(a, b)] + mu[a] * mu[b]);
    let j_inv = inverse_spd(&j)?;
    let j_unc_inv = inverse_spd(&j_unc)?;

    let bias = |l: &[f64]| log_mass(&g.with_lambda(l.to_vec())?, t);
    let lam = g.lambda().to_vec();
    let hm = fd_hessian(&bias, &lam, h)?;
    let hm_half = fd_hessian(&bias, &lam, 0.5 * h)?;
    let h_step_error = (&hm - &hm_half).abs().max();

    let c = 0.5 * (&j_inv * &hm).trace();
    let c_uncentered = 0.5 * (&j_unc_inv * &hm).trace();

    let grad = bias_gradient(&g, t, h)?;
    let kappa = third_cumulants(&g, h)?;
    // b^a = −½ J^{ab} κ_{bcd} J^{cd}
    let contracted: Vec<f64> = (0..n)
        .map(|b| {
            (0..n)
                .map(|d| (kappa[d].row(b) * j_inv.column(d))[(0, 0)])
                .sum()
        })
        .collect();
    let mle_bias: Vec<f64> = (0..n)
        .map(|a| -0.5 * (0..n).map(|b| j_inv[(a, b)] * contracted[b]).sum::<f64>())
        .collect();
    let c_full = c + grad.iter().zip(&mle_bias).map(|(x, y)| x * y).sum::<f64>();

    Ok(ExpansionConstant {
        j: to_rows(&j),
        j_uncentered: to_rows(&j_unc),
        h: to_rows(&hm),
        c,
        c_uncentered,
        bias_gradient: grad,
        mle_bias,
        c_full,
        fd_step: h,
        h_step_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionPoint {
    pub m: usize,
    /// Mean of `Î⁺ − I⁺` over the included replicates.
    pub mean_gap: f64,
    pub stderr: f64,
    /// Fraction of replicates with a boundary `λ̂`.
    pub excluded_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    #[serde(rename = "J")]
    pub j: Matrix,
    #[serde(rename = "H")]
    pub h: Matrix,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_centered")]
    pub c_centered: f64,
    #[serde(rename = "C_uncentered")]
    pub c_uncentered: f64,
    #[serde(rename = "C_full")]
    pub c_full: f64,
    pub empirical: Vec<ExpansionPoint>,
    /// Weighted least-squares slope of `meanGap` against `1/m` through the origin.
    #[serde(rename = "fittedSlope")]
    pub fitted_slope: f64,
    #[serde(rename = "slopeStderr")]
    pub slope_stderr: f64,
    /// Largest per-replicate `|(Î⁺ − I⁺) − Bias(T; λ, λ̂)|`.
    #[serde(rename = "maxIdentityError")]
    pub max_identity_error: f64,
    #[serde(rename = "R")]
    pub r: usize,
}

/// Monte Carlo check of `E[Î⁺(T)] = I⁺(T) + C/m`.
pub fn expansion_verify(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    t: &TruthSet,
    lambda_true: &[f64],
    m_list: &[usize],
    r: usize,
    seed: u64,
) -> Result<ExpansionReport> {
    if m_list.is_empty() || m_list[0] == 0 || m_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("mList must be positive and strictly increasing");
    }
    if r < 500 {
        return invalid("R must be >= 500");
    }
    let k = expansion_constant(prior, features, t, lambda_true, None)?;
    let g = GibbsPosterior::new(prior.clone(), features.clone(), lambda_true.to_vec())?;
    let mut empirical = Vec::new();
    let mut max_identity_error: f64 = 0.0;
    for (idx, &m) in m_list.iter().enumerate() {
        let reps = plugin_replicates(&g, t, m, r, seed, stream_id(&format!("expansion/{m}")))?;
        let gaps: Vec<f64> = reps
            .iter()
            .flatten()
            .map(|rep| {
                max_identity_error = max_identity_error.max(rep.identity_error);
                rep.ihat_plus - rep.i_plus
            })
            .collect();
        let excluded_rate = 1.0 - gaps.len() as f64 / r as f64;
        if idx == 0 && excluded_rate > 0.2 {
            return Err(LkaError::ExcessBoundaryRate {
                rate: excluded_rate,
            });
        }
        let kept = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / kept;
        let var = gaps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kept - 1.0).max(1.0);
        empirical.push(ExpansionPoint {
            m,
            mean_gap: mean,
            stderr: (var / kept).sqrt(),
            excluded_rate,
        });
    }
    let (fitted_slope, slope_stderr) = slope_through_origin(&empirical);
    Ok(ExpansionReport {
        j: k.j,
        h: k.h,
        c: k.c,
        c_centered: k.c,
        c_uncentered: k.c_uncentered,
        c_full: k.c_full,
        empirical,
        fitted_slope,
        slope_stderr,
        max_identity_error,
        r,
    })
}

/// Weighted least squares of `mean` on `1/m` with weights `1/stderr²`;
/// unit weights when some stderr is zero.
fn slope_through_origin(pts: &[ExpansionPoint]) -> (f64, f64) {
    let weighted = pts.iter().all(|p| p.stderr > 0.0);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in pts {
        let x = 1.0 / p.m as f64;
        let w = if weighted {
            1.0 / (p.stderr * p.stderr)
        } else {
            1.0
        };
        sxy += w * x * p.mean_gap;
        sxx += w * x * x;
    }
    let se = if weighted { (1.0 / sxx).sqrt() } else { 0.0 };
    (sxy / sxx, se)
}
