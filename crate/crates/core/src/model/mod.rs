//! Ground set, randomness, and the rate and query distributions.

mod keys;
mod query;
mod rates;
mod rng;

pub use keys::{GroundSet, Iter as KeyIter, KeySet};
pub use query::{fill_bernoulli, sample_bernoulli_subset, sample_query, thin, Side, ThresholdPair};
pub use rates::{
    validate_rate_breakpoints, BreakpointCheck, RateBreakpoints, RateDistribution, CDF_CELLS, DEFAULT_SEPARATION,
};
pub use rng::RngHandle;
