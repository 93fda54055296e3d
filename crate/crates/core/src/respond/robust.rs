use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::estimators::CardinalityEstimator;
use crate::composable::ComposableMap;
use crate::error::{invalid, Error, Result};
use crate::model::{KeySet, RngHandle, ThresholdPair};
use crate::system::{Observation, Query, QueryResponder, SketchingSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyStrategy {
    /// Copy `t` answers query `t`; the wrapper fails once every copy is used.
    FreshCopy,
    /// A uniformly random copy answers each query.
    RandomCopy,
}

/// What the responder sees from a wrapped system: which copy answered and its sketch.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CopyView<S> {
    pub copy: usize,
    pub sketch: S,
}

/// `c` independent copies of a map behind a copy-selection rule.
///
/// The selection stream is private to the wrapper, so the attacker's seed
/// does not determine which copy answers.
#[derive(Debug, Clone)]
pub struct RobustWrapper<M> {
    copies: Vec<M>,
    strategy: CopyStrategy,
    used: usize,
    rng: ChaCha8Rng,
}

impl<M: ComposableMap> RobustWrapper<M> {
    pub fn new(copies: Vec<M>, strategy: CopyStrategy, selection: RngHandle) -> Result<Self> {
        let Some(first) = copies.first() else {
            return Err(invalid("copies", "need at least one copy"));
        };
        let n = first.n();
        if let Some(bad) = copies.iter().find(|m| m.n() != n) {
            return Err(Error::UniverseMismatch { expected: n, got: bad.n() });
        }
        Ok(Self {
            copies,
            strategy,
            used: 0,
            rng: selection.rng(),
        })
    }

    pub fn copies(&self) -> &[M] {
        &self.copies
    }

    pub fn strategy(&self) -> CopyStrategy {
        self.strategy
    }

    /// Queries answered so far.
    pub fn used(&self) -> usize {
        self.used
    }

    fn pick(&mut self) -> Result<usize> {
        let c = self.copies.len();
        let idx = match self.strategy {
            CopyStrategy::FreshCopy if self.used >= c => return Err(Error::Exhausted(c)),
            CopyStrategy::FreshCopy => self.used,
            CopyStrategy::RandomCopy => self.rng.random_range(0..c),
        };
        self.used += 1;
        Ok(idx)
    }

    pub fn sketch(&mut self, set: &KeySet) -> Result<CopyView<M::Sketch>> {
        let copy = self.pick()?;
        Ok(CopyView {
            copy,
            sketch: self.copies[copy].sketch(set)?,
        })
    }
}

impl<M: ComposableMap> SketchingSystem for RobustWrapper<M> {
    type View = CopyView<M::Sketch>;

    fn n(&self) -> u32 {
        self.copies[0].n()
    }

    fn observe(&mut self, query: &Query<'_>, _rng: &mut ChaCha8Rng) -> Result<Observation<Self::View>> {
        Ok(Observation {
            view: self.sketch(query.full)?,
            task_size: query.full.len() as u64,
        })
    }
}

/// Threshold responder that applies the answering copy's own estimator.
#[derive(Debug, Clone)]
pub struct CopyThresholdResponder<E> {
    copies: Vec<E>,
    cut: f64,
}

impl<E> CopyThresholdResponder<E> {
    pub fn new(copies: Vec<E>, thresholds: &ThresholdPair) -> Self {
        Self {
            copies,
            cut: thresholds.geometric_mid(),
        }
    }
}

impl<E: CardinalityEstimator> QueryResponder<CopyView<E::Sketch>> for CopyThresholdResponder<E> {
    fn respond(&mut self, view: &CopyView<E::Sketch>, _round: u64) -> Result<bool> {
        let est = self
            .copies
            .get(view.copy)
            .ok_or_else(|| invalid("copy", format!("copy {} of {}", view.copy, self.copies.len())))?;
        Ok(est.estimate(&view.sketch) >= self.cut)
    }
}

/// One standalone answer: pick a copy, sketch `set`, compare its estimate to `sqrt(A B)`.
pub fn robust_respond<M>(wrapper: &mut RobustWrapper<M>, set: &KeySet, thresholds: &ThresholdPair) -> Result<bool>
where
    M: ComposableMap + CardinalityEstimator<Sketch = <M as ComposableMap>::Sketch>,
{
    let view = wrapper.sketch(set)?;
    Ok(wrapper.copies[view.copy].estimate(&view.sketch) >= thresholds.geometric_mid())
}
