//! A secondary agent that keeps a posterior over `λ` on a grid instead of a
//! point estimate.

use serde::{Deserialize, Serialize};

use super::{active_info_lambda, sample_with};
use crate::error::{invalid, LkaError, Result};
use crate::lka::log_ratio;
use crate::maxent::{FeatureSet, GibbsPosterior};
use crate::numeric::logsumexp;
use crate::rng::{stream_id, StreamRng};
use crate::worlds::{BeliefMeasure, TruthSet, World};

/// Largest feature count the grid quadrature accepts.
pub const MAX_GRID_DIM: usize = 3;
/// Posterior mass allowed on the grid's outer shell.
const EDGE_MASS_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct BayesianSecondaryConfig {
    /// Std of the independent zero-mean Gaussian prior on each `λ_i`.
    pub prior_std: f64,
    /// Grid half-width `L`.
    pub half_width: f64,
    /// Grid points per component, odd.
    pub points: usize,
}

impl Default for BayesianSecondaryConfig {
    fn default() -> Self {
        BayesianSecondaryConfig {
            prior_std: 2.0,
            half_width: 8.0,
            points: 41,
        }
    }
}

impl BayesianSecondaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_multiple_of(2) || self.points < 3 {
            return invalid("grid points must be odd and >= 3");
        }
        if !(self.prior_std > 0.0) || !(self.half_width >= 3.0 * self.prior_std) {
            return invalid("need prior_std > 0 and half_width >= 3 prior_std");
        }
        Ok(())
    }

    fn axis(&self) -> Vec<f64> {
        let g = self.points;
        (0..g)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (g - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BayesianSecondaryReport {
    /// Grid points `λ`, row-major over components.
    pub grid: Vec<Vec<f64>>,
    #[serde(rename = "posteriorOverLambda")]
    pub posterior_over_lambda: Vec<f64>,
    #[serde(rename = "priorOverLambda")]
    pub prior_over_lambda: Vec<f64>,
    /// `P̃(T̃)` with `T̃ = {λ : I⁺(T; λ) > 0}`.
    #[serde(rename = "P_tilde_T_tilde")]
    pub p_tilde_t_tilde: f64,
    #[serde(rename = "P0_T_tilde")]
    pub p0_t_tilde: f64,
    #[serde(rename = "I_tilde_plus", with = "crate::serde_util")]
    pub i_tilde_plus: f64,
    /// `Σ_λ P̃(λ) Q_λ`.
    #[serde(rename = "mixedPosterior")]
    pub mixed_posterior: BeliefMeasure,
    #[serde(rename = "edgeMass")]
    pub edge_mass: f64,
    pub m: usize,
}

/// Draw `m` worlds from `Q_{λ_true}` (stream `(seed, "bayesian", 0)`) and run [`bayesian_from_sample`].
pub fn bayesian_secondary(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    t: &TruthSet,
    lambda_true: &[f64],
    m: usize,
    cfg: &BayesianSecondaryConfig,
    seed: u64,
) -> Result<BayesianSecondaryReport> {
    let g = GibbsPosterior::new(prior.clone(), features.clone(), lambda_true.to_vec())?;
    let mut rng = StreamRng::new(seed, stream_id("bayesian"), 0);
    let sample = sample_with(&g.measure()?, m, &mut rng);
    bayesian_from_sample(prior, features, t, &sample, cfg)
}

fn normalized(logw: &[f64]) -> Vec<f64> {
    let z = logsumexp(logw);
    logw.iter().map(|l| (l - z).exp()).collect()
}

/// Grid posterior over `λ` given a sample; `m = 0` returns the prior.
pub fn bayesian_from_sample(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    t: &TruthSet,
    sample: &[World],
    cfg: &BayesianSecondaryConfig,
) -> Result<BayesianSecondaryReport> {
    cfg.validate()?;
    let n = features.n();
    if n == 0 || n > MAX_GRID_DIM {
        return Err(LkaError::Unsupported(format!(
            "grid quadrature handles 1 to {MAX_GRID_DIM} features, got {n}"
        )));
    }
    if !prior.space().is_finite() {
        return Err(LkaError::Unsupported(
            "the mixed posterior needs a finite space".into(),
        ));
    }
    let mut s = vec![0.0; n];
    for x in sample {
        for (acc, v) in s.iter_mut().zip(features.eval(x)?) {
            *acc += v;
        }
    }
    let m = sample.len() as f64;

    let axis = cfg.axis();
    let g_pts = axis.len();
    let total = g_pts.pow(n as u32);
    let base = GibbsPosterior::new(prior.clone(), features.clone(), vec![0.0; n])?;
    let mut grid = Vec::with_capacity(total);
    let mut log_prior = Vec::with_capacity(total);
    let mut log_post = Vec::with_capacity(total);
    let mut in_t = Vec::with_capacity(total);
    let mut on_edge = Vec::with_capacity(total);
    let mut measures = Vec::with_capacity(total);
    let var = cfg.prior_std * cfg.prior_std;
    for idx in 0..total {
        let mut rest = idx;
        let mut lam = vec![0.0; n];
        let mut edge = false;
        for l in lam.iter_mut().rev() {
            let k = rest % g_pts;
            rest /= g_pts;
            *l = axis[k];
            edge |= k == 0 || k == g_pts - 1;
        }
        let g = base.with_lambda(lam.clone())?;
        let lp = -lam.iter().map(|l| l * l).sum::<f64>() / (2.0 * var);
        let ll = lam.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() - m * g.log_normalizer();
        log_prior.push(lp);
        log_post.push(lp + ll);
        in_t.push(active_info_lambda(&g, t)? > 0.0);
        on_edge.push(edge);
        measures.push(g.measure()?.probs().unwrap());
        grid.push(lam);
    }
    let prior_w = normalized(&log_prior);
    let post_w = normalized(&log_post);
    let edge_mass: f64 = post_w
        .iter()
        .zip(&on_edge)
        .filter(|(_, &e)| e)
        .map(|(w, _)| w)
        .sum();
    if edge_mass > EDGE_MASS_LIMIT {
        return Err(LkaError::GridTooCoarse { edge_mass });
    }
    let mass_on = |w: &[f64]| -> f64 {
        w.iter()
            .zip(&in_t)
            .filter(|(_, &b)| b)
            .map(|(w, _)| w)
            .sum()
    };
    let p_tilde = mass_on(&post_w);
    let p0_tilde = mass_on(&prior_w);
    let d = measures[0].len();
    let mut mixed = vec![0.0; d];
    for (w, q) in post_w.iter().zip(&measures) {
        for (acc, p) in mixed.iter_mut().zip(q) {
            *acc += w * p;
        }
    }
    Ok(BayesianSecondaryReport {
        grid,
        posterior_over_lambda: post_w,
        prior_over_lambda: prior_w,
        p_tilde_t_tilde: p_tilde,
        p0_t_tilde: p0_tilde,
        i_tilde_plus: log_ratio(p_tilde, p0_tilde),
        mixed_posterior: BeliefMeasure::finite_from_weights(&mixed)?,
        edge_mass,
        m: sample.len(),
    })
}
