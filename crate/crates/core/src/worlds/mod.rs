//! World spaces, truth sets, partitions and belief measures.

mod measure;
mod partition;
mod space;
mod truth;
mod tv;

pub use measure::{
    conditional_block_expectation, measure_of, tilted_marginal_cdf, BeliefMeasure, Marginal,
    MeasureForm, Sampler, TiltedMarginal,
};
pub use partition::Partition;
pub use space::{ball, Metric, World, WorldSpace};
pub use truth::{Interval, Rect, TruthBody, TruthSet};
pub use tv::{tv_distance, tv_to_point, TV_GRID};
