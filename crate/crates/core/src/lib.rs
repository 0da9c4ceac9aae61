//! Learning and knowledge acquisition with maximum-entropy Gibbs posteriors.
//!
//! An agent starts from a prior `P0` over a space of worlds, observes data
//! summarised by feature moments, and adopts the Gibbs posterior
//! `P(x) ∝ P0(x) exp(λ·f(x))` that matches those moments. The crate fits such
//! posteriors, measures what they have learned about a proposition through
//! active information, decides the knowledge-acquisition conditions, and runs
//! the Monte Carlo studies of primary, synthetic and secondary learning.

// `!(x > 0.0)` is how validation rejects NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod lka;
pub mod maxent;
pub mod numeric;
pub mod rng;
pub mod scenarios;
pub mod secondary;
pub mod worlds;

mod serde_util;

pub use error::{LkaError, Result};
