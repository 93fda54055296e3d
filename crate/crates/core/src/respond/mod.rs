//! Query responders: threshold estimators, robust multi-copy wrappers,
//! posterior responders and natural (statistic-restricted) responders.

mod bayes;
mod estimators;
mod natural;
mod robust;

pub use bayes::{BasisBayesResponder, PoolBayesResponder, RatePosterior, SmallKeyBayesResponder, POSTERIOR_KNOTS};
pub use estimators::{CardinalityEstimator, LinearOccupancy, ThresholdResponder};
pub use natural::{wrap_natural, BasisExtractor, Identity, NaturalResponder, SmallKeyExtractor, SmallKeyStat, StatisticExtractor};
pub use robust::{robust_respond, CopyStrategy, CopyThresholdResponder, CopyView, RobustWrapper};

use crate::error::Result;
use crate::system::QueryResponder;

/// Always gives the same answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantResponder(pub bool);

impl<V: ?Sized> QueryResponder<V> for ConstantResponder {
    fn respond(&mut self, _view: &V, _round: u64) -> Result<bool> {
        Ok(self.0)
    }
}
