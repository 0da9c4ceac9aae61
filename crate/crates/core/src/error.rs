use thiserror::Error;

/// Every failure the library reports.
///
/// Validation problems (bad shapes, out-of-range parameters) and numerical
/// failures are kept apart so callers can map them to different exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LkaError {
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("block {block} has zero mass; conditional expectation undefined")]
    ZeroBlockMass { block: usize },
    #[error("epsilon grid is empty")]
    EmptyEpsGrid,
    #[error("target lies on the moment polytope boundary (gap {gap:e})")]
    BoundaryTarget { achieved: Vec<f64>, gap: f64 },
    #[error("target is outside the moment polytope (gap {gap:e})")]
    Infeasible { achieved: Vec<f64>, gap: f64 },
    #[error("solver stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("feature covariance is singular")]
    SingularHessian,
    #[error("density is not constant on block {block}")]
    NotMeasurable { block: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("atoms {0} and {1} are closer than the spike width")]
    AtomsTooClose(usize, usize),
    #[error("Fisher information J is singular")]
    SingularJ,
    #[error("posterior mass {edge_mass:e} on the lambda grid edge exceeds 1%")]
    GridTooCoarse { edge_mass: f64 },
    #[error("{rate:.3} of replicates hit the boundary at the smallest m")]
    ExcessBoundaryRate { rate: f64 },
    #[error("set A is degenerate for the delta method")]
    DegenerateA,
    #[error("data violate the model: {0}")]
    ModelViolation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl LkaError {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LkaError::SpaceMismatch(_)
                | LkaError::InvalidInput(_)
                | LkaError::EmptyEpsGrid
                | LkaError::InvalidTree(_)
                | LkaError::AtomsTooClose(..)
                | LkaError::ModelViolation(_)
                | LkaError::Unsupported(_)
                | LkaError::NotMeasurable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LkaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LkaError::InvalidInput(msg.into()))
}
