//! Maximum-entropy Gibbs posteriors fitted to feature moments.
//!
//! The posterior minimizing `KL(P ‖ P0)` subject to `E_P[f] = μ` is the Gibbs
//! measure `P0 e^{λ·f}/Z_λ`; `λ` minimizes the convex dual
//! `ψ(λ) = log Z_λ − λ·μ`, whose gradient is `E_λ[f] − μ` and whose Hessian is
//! `Cov_λ(f)`.

mod features;
mod model;
mod solver;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use features::{moments, CubeFeature, FeatureSet, MomentVector};
pub(crate) use model::Model;
pub use solver::{fit_lambda, fit_lambda_from, mle_lambda, Fit};

use crate::error::{LkaError, Result};
use crate::worlds::{BeliefMeasure, TruthSet, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Interior,
    Boundary,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Tolerance on `‖∇ψ‖∞`, the largest moment error.
    pub gradient_tolerance: f64,
    pub lambda_cap: f64,
    pub backtrack: f64,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            lambda_cap: 60.0,
            backtrack: 0.5,
            armijo: 1e-4,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.lambda_cap > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0;
        if ok {
            Ok(())
        } else {
            Err(LkaError::InvalidInput(
                "solver options must be positive (backtrack and armijo below 1)".into(),
            ))
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.lambda_cap = cap;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    pub lambda: Vec<f64>,
    pub gauge: String,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub feasibility: Feasibility,
    pub achieved_moments: Vec<f64>,
}

/// Prior, features and coefficients `λ` of a Gibbs measure.
#[derive(Debug, Clone)]
pub struct GibbsPosterior {
    prior: BeliefMeasure,
    features: FeatureSet,
    lambda: Vec<f64>,
    gauge: Option<String>,
    model: Arc<Model>,
}

impl GibbsPosterior {
    pub fn new(prior: BeliefMeasure, features: FeatureSet, lambda: Vec<f64>) -> Result<Self> {
        let model = Arc::new(Model::build(&prior, &features)?);
        GibbsPosterior::with_model(prior, features, lambda, None, model)
    }

    pub(crate) fn with_model(
        prior: BeliefMeasure,
        features: FeatureSet,
        lambda: Vec<f64>,
        gauge: Option<String>,
        model: Arc<Model>,
    ) -> Result<Self> {
        if lambda.len() != features.n() {
            return Err(LkaError::InvalidInput(format!(
                "lambda has {} entries, expected n = {}",
                lambda.len(),
                features.n()
            )));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(LkaError::InvalidInput("lambda must be finite".into()));
        }
        Ok(GibbsPosterior {
            prior,
            features,
            lambda,
            gauge,
            model,
        })
    }

    /// Same prior and features, new coefficients.
    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        GibbsPosterior::with_model(
            self.prior.clone(),
            self.features.clone(),
            lambda,
            None,
            self.model.clone(),
        )
    }

    pub fn prior(&self) -> &BeliefMeasure {
        &self.prior
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gauge(&self) -> Option<&str> {
        self.gauge.as_deref()
    }

    /// `log Z_λ(𝒳)`, zero at `λ = 0`.
    pub fn log_normalizer(&self) -> f64 {
        self.model.log_z(&self.lambda)
    }

    /// `log Z_λ(subset)`; `-inf` when the subset carries no prior mass.
    pub fn log_partition(&self, subset: &TruthSet) -> Result<f64> {
        self.prior.space().expect_same(&subset.space)?;
        Ok(self.model.log_z_on(&self.lambda, subset))
    }

    /// The induced measure `P0 e^{λ·f}/Z_λ`.
    pub fn measure(&self) -> Result<BeliefMeasure> {
        self.model.measure(&self.lambda)
    }

    pub fn moments(&self) -> MomentVector {
        MomentVector::new(self.model.eval(&self.lambda).mean)
    }

    /// `Cov_λ(f)`, the Hessian of `log Z_λ`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let c = self.model.eval(&self.lambda).cov;
        (0..c.nrows())
            .map(|i| (0..c.ncols()).map(|j| c[(i, j)]).collect())
            .collect()
    }

    /// `log Q_λ(x) − log P0(x)` for a finite world or the log density ratio on the cube.
    pub fn log_likelihood_ratio(&self, x: &World) -> Result<f64> {
        let f = self.features.eval(x)?;
        Ok(f.iter().zip(&self.lambda).map(|(a, b)| a * b).sum::<f64>() - self.log_normalizer())
    }
}

/// `log Z_λ(subset)` for a Gibbs posterior.
pub fn log_partition(g: &GibbsPosterior, subset: &TruthSet) -> Result<f64> {
    g.log_partition(subset)
}
