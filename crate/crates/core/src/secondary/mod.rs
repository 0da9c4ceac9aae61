//! Secondary learning: an agent that only sees samples from a primary
//! agent's Gibbs posterior and re-estimates its coefficients.

mod bayes;
mod expansion;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bayes::{
    bayesian_from_sample, bayesian_secondary, BayesianSecondaryConfig, BayesianSecondaryReport,
};
pub use expansion::{
    bias_gradient, expansion_constant, expansion_verify, ExpansionConstant, ExpansionPoint,
    ExpansionReport, DEFAULT_FD_STEP,
};

use crate::error::{invalid, LkaError, Result};
use crate::lka::log_ratio;
use crate::maxent::{mle_lambda, FeatureSet, GibbsPosterior, SolverOptions};
use crate::rng::{stream_id, StreamRng};
use crate::worlds::{BeliefMeasure, TruthSet, World};

/// `m` i.i.d. draws from `p`, from stream `(seed, "sample", 0)`.
pub fn sample_posterior(p: &BeliefMeasure, m: usize, seed: u64) -> Vec<World> {
    let mut rng = StreamRng::new(seed, stream_id("sample"), 0);
    sample_with(p, m, &mut rng)
}

pub fn sample_with(p: &BeliefMeasure, m: usize, rng: &mut StreamRng) -> Vec<World> {
    let s = p.sampler();
    (0..m).map(|_| s.draw(rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SecondaryReport {
    pub lambda_hat: Vec<f64>,
    #[serde(rename = "IhatPlus", with = "crate::serde_util")]
    pub ihat_plus: f64,
    #[serde(rename = "IPlus", with = "crate::serde_util")]
    pub i_plus: f64,
    pub m: usize,
    /// `Bias(T; λ, λ̂) = log Q_λ̂(T) − log Q_λ(T)`.
    #[serde(with = "crate::serde_util")]
    pub bias: f64,
    /// `|(Î⁺ − I⁺) − Bias|`.
    pub identity_error: f64,
}

/// `I⁺(T; P0, Q_λ)` from log partitions.
pub fn active_info_lambda(g: &GibbsPosterior, t: &TruthSet) -> Result<f64> {
    let p0_t = g.prior().measure_of(t)?;
    let log_q = g.log_partition(t)? - g.log_normalizer();
    Ok(if p0_t > 0.0 {
        log_q - p0_t.ln()
    } else {
        log_ratio(0.0, 0.0)
    })
}

/// `log Q_λ(T)`.
pub(crate) fn log_mass(g: &GibbsPosterior, t: &TruthSet) -> Result<f64> {
    Ok(g.log_partition(t)? - g.log_normalizer())
}

/// Plug-in secondary agent: sample `m` worlds from `Q_λ`, fit `λ̂` by maximum likelihood.
pub fn plugin_secondary(
    prior: &BeliefMeasure,
    features: &FeatureSet,
    t: &TruthSet,
    lambda_true: &[f64],
    m: usize,
    seed: u64,
) -> Result<SecondaryReport> {
    let g = GibbsPosterior::new(prior.clone(), features.clone(), lambda_true.to_vec())?;
    let mut rng = StreamRng::new(seed, stream_id("secondary"), 0);
    plugin_with(&g, t, m, &mut rng)
}

pub(crate) fn plugin_with(
    g: &GibbsPosterior,
    t: &TruthSet,
    m: usize,
    rng: &mut StreamRng,
) -> Result<SecondaryReport> {
    if m == 0 {
        return invalid("m must be >= 1");
    }
    let sample = sample_with(&g.measure()?, m, rng);
    plugin_from_sample(g, t, &sample)
}

/// The plug-in estimate for a given sample; boundary MLEs are `BoundaryTarget` errors.
pub fn plugin_from_sample(
    g: &GibbsPosterior,
    t: &TruthSet,
    sample: &[World],
) -> Result<SecondaryReport> {
    let fit = mle_lambda(g.prior(), g.features(), sample, &SolverOptions::default())?
        .require_interior()?;
    let gh = fit.posterior;
    let i_plus = active_info_lambda(g, t)?;
    let ihat_plus = active_info_lambda(&gh, t)?;
    let bias = log_mass(&gh, t)? - log_mass(g, t)?;
    let identity_error = if ihat_plus.is_finite() && i_plus.is_finite() {
        ((ihat_plus - i_plus) - bias).abs()
    } else {
        0.0
    };
    Ok(SecondaryReport {
        lambda_hat: gh.lambda().to_vec(),
        ihat_plus,
        i_plus,
        m: sample.len(),
        bias,
        identity_error,
    })
}

/// Outcomes of `r` independent plug-in replicates at sample size `m`; replicate
/// `i` uses stream `(seed, label, i)`. Boundary fits come back as `None`.
pub fn plugin_replicates(
    g: &GibbsPosterior,
    t: &TruthSet,
    m: usize,
    r: usize,
    seed: u64,
    label: u64,
) -> Result<Vec<Option<SecondaryReport>>> {
    let measure = g.measure()?;
    (0..r)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::new(seed, label, i as u64);
            let sample = sample_with(&measure, m, &mut rng);
            match plugin_from_sample(g, t, &sample) {
                Ok(rep) => Ok(Some(rep)),
                Err(LkaError::BoundaryTarget { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}
