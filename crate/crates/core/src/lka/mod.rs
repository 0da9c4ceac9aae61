//! Active information, learning and knowledge-acquisition verdicts.
//!
//! All logarithms are natural; divide by `ln 2` for bits.

mod discernment;
mod limits;

use serde::{Deserialize, Serialize};

pub use discernment::{
    discernment_check, theorem_partition_conditions, DiscernmentReport, DiscernmentViolation,
    PartitionCase, PartitionConditionsReport,
};
pub use limits::{
    feature_cells, fundamental_limit_features, lambda_for_world, pigeonhole_certificate,
    PigeonholeCertificate,
};

use crate::error::{LkaError, Result};
use crate::maxent::{FeatureSet, GibbsPosterior};
use crate::worlds::{ball, BeliefMeasure, Metric, TruthSet, World, WorldSpace};

/// `P(T)` at or above `1 − FULL_TOL` (or at most `FULL_TOL` when p is false)
/// counts as full learning.
pub const FULL_TOL: f64 = 1e-9;
/// Largest TV distance to `δ_{x0}` still counted as full knowledge.
pub const POINT_MASS_TOL: f64 = 1e-9;
pub const DEFAULT_EPS_COUNT: usize = 12;
pub const DEFAULT_EPS_MIN: f64 = 1e-4;

/// `log a − log b` with `0/0 = 0` and signed infinities when one side is zero.
pub fn log_ratio(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => a.ln() - b.ln(),
        (false, false) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
    }
}

/// `I⁺(T) = log P(T) − log P₀(T)` in nats.
pub fn active_info(p0: &BeliefMeasure, p: &BeliefMeasure, t: &TruthSet) -> Result<f64> {
    p0.space().expect_same(p.space())?;
    Ok(log_ratio(p.measure_of(t)?, p0.measure_of(t)?))
}

/// `n` log-spaced radii from `1e-4` to the diameter of `space`.
pub fn default_eps_grid(space: &WorldSpace) -> Vec<f64> {
    let hi = space.diameter().max(DEFAULT_EPS_MIN);
    let (a, b) = (DEFAULT_EPS_MIN.ln(), hi.ln());
    let n = DEFAULT_EPS_COUNT;
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawValues {
    #[serde(rename = "P_T")]
    pub p_t: f64,
    #[serde(rename = "P0_T")]
    pub p0_t: f64,
    #[serde(rename = "P_x0")]
    pub p_x0: f64,
}

/// Verdicts K1–K3 on a grid of ball radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LkaReport {
    #[serde(with = "crate::serde_util")]
    pub active_info: f64,
    pub truth_value: bool,
    pub learned: bool,
    pub full_learning: bool,
    #[serde(rename = "k2_supportContains_x0")]
    pub k2_support_contains_x0: bool,
    #[serde(rename = "k3_ballInfoNonneg")]
    pub k3_ball_info_nonneg: bool,
    /// A radius with strictly positive ball information, when one exists.
    pub k3_epsilon: Option<f64>,
    pub knowledge_acquired: bool,
    pub full_knowledge: bool,
    /// K2 and K3 are certified on these radii only.
    pub eps_grid: Vec<f64>,
    pub raw_values: RawValues,
}

/// Learning and knowledge verdicts for agent `p` against the ignorant `p0`.
///
/// `eps_grid = None` uses [`default_eps_grid`].
pub fn lka_verdict(
    p0: &BeliefMeasure,
    p: &BeliefMeasure,
    t: &TruthSet,
    x0: &World,
    metric: Metric,
    eps_grid: Option<&[f64]>,
) -> Result<LkaReport> {
    let space = p0.space();
    space.expect_same(p.space())?;
    space.expect_same(&t.space)?;
    space.check_world(x0)?;
    let grid = match eps_grid {
        Some(g) => g.to_vec(),
        None => default_eps_grid(space),
    };
    if grid.is_empty() {
        return Err(LkaError::EmptyEpsGrid);
    }
    if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(LkaError::InvalidInput(
            "epsGrid must be positive and sorted".into(),
        ));
    }

    let p_t = p.measure_of(t)?;
    let p0_t = p0.measure_of(t)?;
    verdict_from_masses(p0, p, t, x0, metric, grid, p_t, p0_t)
}

/// [`lka_verdict`] with `P(T)` and `P₀(T)` supplied by a caller that can
/// compute them exactly.
#[allow(clippy::too_many_arguments)]
pub(crate) fn verdict_from_masses(
    p0: &BeliefMeasure,
    p: &BeliefMeasure,
    t: &TruthSet,
    x0: &World,
    metric: Metric,
    grid: Vec<f64>,
    p_t: f64,
    p0_t: f64,
) -> Result<LkaReport> {
    let space = p0.space();
    let ain = log_ratio(p_t, p0_t);
    let truth = t.contains(x0);
    let learned = (ain > 0.0 && truth) || (ain < 0.0 && !truth);
    let full_learning = if truth {
        p_t >= 1.0 - FULL_TOL
    } else {
        p_t <= FULL_TOL
    };

    let mut k2 = true;
    let mut k3 = true;
    let mut witness = None;
    for &eps in &grid {
        let open = ball(space, metric, x0, eps, false)?;
        if !(p.measure_of(&open)? > 0.0) {
            k2 = false;
        }
        let closed = ball(space, metric, x0, eps, true)?;
        let info = log_ratio(p.measure_of(&closed)?, p0.measure_of(&closed)?);
        if info < 0.0 {
            k3 = false;
        } else if info > 0.0 && witness.is_none() {
            witness = Some(eps);
        }
    }
    let k3 = k3 && witness.is_some();
    let p_x0 = p.point_mass_at(x0);
    Ok(LkaReport {
        active_info: ain,
        truth_value: truth,
        learned,
        full_learning,
        k2_support_contains_x0: k2,
        k3_ball_info_nonneg: k3,
        k3_epsilon: witness,
        knowledge_acquired: learned && k2 && k3,
        full_knowledge: 1.0 - p_x0 <= POINT_MASS_TOL,
        eps_grid: grid,
        raw_values: RawValues { p_t, p0_t, p_x0 },
    })
}

/// `I⁺(T; P₀, P̃) − I⁺(T; P₀, P)`, both terms kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decomposition {
    #[serde(with = "crate::serde_util")]
    pub active_info_p: f64,
    #[serde(with = "crate::serde_util")]
    pub active_info_p_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BiasReport {
    /// `log P̃(T) − log P(T)`; signed infinity when exactly one side is zero.
    #[serde(with = "crate::serde_util")]
    pub bias: f64,
    pub p_t: f64,
    pub p_tilde_t: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decomposition: Option<Decomposition>,
}

/// Bias of agent `p_tilde` relative to agent `p` on `t`.
pub fn bias(t: &TruthSet, p: &BeliefMeasure, p_tilde: &BeliefMeasure) -> Result<BiasReport> {
    p.space().expect_same(p_tilde.space())?;
    let a = p.measure_of(t)?;
    let b = p_tilde.measure_of(t)?;
    Ok(BiasReport {
        bias: log_ratio(b, a),
        p_t: a,
        p_tilde_t: b,
        decomposition: None,
    })
}

/// [`bias`] together with both active informations relative to `p0`.
pub fn bias_decomposed(
    t: &TruthSet,
    p0: &BeliefMeasure,
    p: &BeliefMeasure,
    p_tilde: &BeliefMeasure,
) -> Result<BiasReport> {
    let mut rep = bias(t, p, p_tilde)?;
    rep.decomposition = Some(Decomposition {
        active_info_p: active_info(p0, p, t)?,
        active_info_p_tilde: active_info(p0, p_tilde, t)?,
    });
    Ok(rep)
}

/// Bias between two Gibbs posteriors of one family, from log-partition ratios.
pub fn bias_lambda(
    t: &TruthSet,
    prior: &BeliefMeasure,
    features: &FeatureSet,
    lam: &[f64],
    lam_tilde: &[f64],
) -> Result<BiasReport> {
    let g = GibbsPosterior::new(prior.clone(), features.clone(), lam.to_vec())?;
    let gt = g.with_lambda(lam_tilde.to_vec())?;
    bias_between(t, &g, &gt)
}

/// [`bias_lambda`] for two already built posteriors.
pub fn bias_between(t: &TruthSet, g: &GibbsPosterior, gt: &GibbsPosterior) -> Result<BiasReport> {
    let lt = g.log_partition(t)?;
    let ltt = gt.log_partition(t)?;
    let lx = g.log_normalizer();
    let ltx = gt.log_normalizer();
    // log P(T) = log Z(T) − log Z(X); -inf when T carries no mass
    let log_p = lt - lx;
    let log_pt = ltt - ltx;
    let bias = match (log_p.is_finite(), log_pt.is_finite()) {
        (true, true) => (ltt + lx) - (lt + ltx),
        (false, false) => 0.0,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
    };
    Ok(BiasReport {
        bias,
        p_t: log_p.exp(),
        p_tilde_t: log_pt.exp(),
        decomposition: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_ratio_conventions() {
        assert_eq!(log_ratio(0.0, 0.0), 0.0);
        assert_eq!(log_ratio(0.5, 0.0), f64::INFINITY);
        assert_eq!(log_ratio(0.0, 0.5), f64::NEG_INFINITY);
        assert!((log_ratio(0.5, 0.25) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn default_grid_spans_to_diameter() {
        let g = default_eps_grid(&WorldSpace::cube(2).unwrap());
        assert_eq!(g.len(), 12);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert!((g[11] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sentinels_serialize_as_strings() {
        let r = BiasReport {
            bias: f64::NEG_INFINITY,
            p_t: 0.5,
            p_tilde_t: 0.0,
            decomposition: None,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"-inf\""), "{s}");
        let back: BiasReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.bias, f64::NEG_INFINITY);
    }
}
