//! Narrow indicator ("spike") features around atoms `x_i`, which approximate a
//! mixture of the uniform density and point masses as the width shrinks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LkaError, Result};
use crate::maxent::{
    fit_lambda, CubeFeature, FeatureSet, GibbsPosterior, MomentVector, SolverOptions,
};
use crate::worlds::{tv_distance, BeliefMeasure, Partition, Rect};

/// Clamp on `λ_i = log(p_i/p_0)` when a weight is zero.
pub const SPIKE_CAP: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpikeScenario {
    pub atoms: Vec<f64>,
    pub delta: f64,
    /// `(p_0, p_1, …, p_n)`: uniform weight first, then one weight per atom.
    pub weights: Vec<f64>,
}

impl SpikeScenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.atoms.len();
        if n == 0 {
            return invalid("need at least one atom");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        if self.weights.len() != n + 1 {
            return invalid("weights need p0 followed by one entry per atom");
        }
        if self.weights.iter().any(|w| !(*w >= 0.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return invalid("weights must be nonnegative and sum to 1");
        }
        let h = 0.5 * self.delta;
        for (i, &x) in self.atoms.iter().enumerate() {
            if !(x - h >= 0.0 && x + h <= 1.0) {
                return invalid(format!("spike around atom {i} leaves [0, 1]"));
            }
            for (j, &y) in self.atoms.iter().enumerate().skip(i + 1) {
                if (x - y).abs() <= self.delta {
                    return Err(LkaError::AtomsTooClose(i, j));
                }
            }
        }
        Ok(())
    }

    fn spike(&self, i: usize) -> Rect {
        let h = 0.5 * self.delta;
        Rect::from_bounds(&[(self.atoms[i] - h, self.atoms[i] + h)]).unwrap()
    }

    pub fn features(&self) -> Result<FeatureSet> {
        let scale = -self.delta.ln();
        let specs = (0..self.atoms.len())
            .map(|i| CubeFeature::IntervalIndicator {
                intervals: self.spike(i),
                scale,
            })
            .collect();
        FeatureSet::cube(1, specs)
    }

    /// `λ_i = log(p_i/p_0)`, clamped to `±SPIKE_CAP`.
    pub fn lambda(&self) -> Vec<f64> {
        let p0 = self.weights[0];
        self.weights[1..]
            .iter()
            .map(|&p| {
                let l = match (p > 0.0, p0 > 0.0) {
                    (true, true) => (p / p0).ln(),
                    (false, _) => -SPIKE_CAP,
                    (true, false) => SPIKE_CAP,
                };
                l.clamp(-SPIKE_CAP, SPIKE_CAP)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpikeOutcome {
    pub lambda: Vec<f64>,
    /// Coefficients on the features `1_{A_i} log δ⁻¹`: `1 + λ_i / log δ⁻¹`.
    pub feature_lambda: Vec<f64>,
    pub z: f64,
    /// Closed-form piecewise constant density.
    pub posterior: BeliefMeasure,
    /// The `δ → 0` limit `p_0·U + Σ p_i δ_{x_i}`.
    pub limit: BeliefMeasure,
    /// `|P(A_i(δ)) − p_i|` per atom.
    pub gaps: Vec<f64>,
    /// `|P(C(δ)) − p_0|`.
    pub gap0: f64,
    #[serde(skip)]
    pub gibbs: GibbsPosterior,
}

pub fn spike_posterior(s: &SpikeScenario) -> Result<SpikeOutcome> {
    s.validate()?;
    let n = s.atoms.len();
    let lambda = s.lambda();
    let log_inv = -s.delta.ln();
    let feature_lambda: Vec<f64> = lambda.iter().map(|l| 1.0 + l / log_inv).collect();
    let sum_e: f64 = lambda.iter().map(|l| l.exp()).sum();
    let z = 1.0 - n as f64 * s.delta + sum_e;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.atoms[a].total_cmp(&s.atoms[b]));
    let h = 0.5 * s.delta;
    let mut breaks = vec![0.0];
    let mut probs = Vec::new();
    let mut last = 0.0;
    for &i in &order {
        let (lo, hi) = (s.atoms[i] - h, s.atoms[i] + h);
        if lo > last {
            breaks.push(lo);
            probs.push((lo - last) / z);
        }
        breaks.push(hi);
        probs.push(lambda[i].exp() / z);
        last = hi;
    }
    if last < 1.0 {
        breaks.push(1.0);
        probs.push((1.0 - last) / z);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let posterior = BeliefMeasure::piecewise(Partition::grid(&[breaks])?, probs)?;

    let atoms: Vec<(Vec<f64>, f64)> = s
        .atoms
        .iter()
        .zip(&s.weights[1..])
        .map(|(&x, &w)| (vec![x], w))
        .collect();
    let limit = BeliefMeasure::atom_mixture(1, s.weights[0], atoms)?;

    let gaps: Vec<f64> = (0..n)
        .map(|i| (lambda[i].exp() / z - s.weights[i + 1]).abs())
        .collect();
    let gap0 = ((1.0 - n as f64 * s.delta) / z - s.weights[0]).abs();
    let gibbs = GibbsPosterior::new(
        BeliefMeasure::uniform(posterior.space()),
        s.features()?,
        feature_lambda.clone(),
    )?;
    Ok(SpikeOutcome {
        lambda,
        feature_lambda,
        z,
        posterior,
        limit,
        gaps,
        gap0,
        gibbs,
    })
}

impl SpikeOutcome {
    /// Largest gap between the spike masses and the target weights.
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(self.gap0, f64::max)
    }

    /// TV between the closed form and the induced Gibbs measure of `feature_lambda`.
    pub fn gibbs_tv(&self) -> Result<f64> {
        tv_distance(&self.gibbs.measure()?, &self.posterior)
    }

    pub fn generic_fit_tv(&self, s: &SpikeScenario) -> Result<f64> {
        let f = s.features()?;
        let log_inv = -s.delta.ln();
        let mu: Vec<f64> = self
            .lambda
            .iter()
            .map(|l| l.exp() / self.z * log_inv)
            .collect();
        let prior = BeliefMeasure::uniform(self.posterior.space());
        let fit = fit_lambda(
            &prior,
            &f,
            &MomentVector::new(mu),
            &SolverOptions::default(),
        )?;
        tv_distance(&fit.posterior.measure()?, &self.posterior)
    }
}
