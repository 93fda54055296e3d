//! Composable sketching maps, core calculus, core peeling and determining pools.

mod axioms;
mod bottomk;
mod boolean;
mod fixture;
mod kpartition;
mod peeling;
mod sample;

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{sample_bernoulli_subset, KeySet};

pub use axioms::{brute_force_axioms, AxiomCheck, AxiomReport, DEFAULT_AXIOM_N_MAX};
pub use bottomk::BottomKSketchMap;
pub use boolean::BooleanLinearSketchMap;
pub use fixture::{BlockChainMap, BlockChainSketch, BrokenCompose, ProductMap};
pub use kpartition::KPartitionSketchMap;
pub use peeling::{
    check_termination, empirical_pool_prefix, general_prefix_len, monotone_prefix_len, peel, pool_from_peeling,
    verify_pool, CorePeeling, DeterminingPool, PoolCell, PoolProvenance,
};
pub use sample::SampleSketchMap;

/// A map `S` from subsets of `0..n` to sketches with `S(U ∪ V) = S(U) ⊕ S(V)`.
pub trait ComposableMap: Send + Sync {
    type Sketch: Clone + Eq + Hash + Debug + Send + Sync;

    /// Ground set size.
    fn n(&self) -> u32;

    fn family(&self) -> &'static str;

    fn sketch(&self, set: &KeySet) -> Result<Self::Sketch>;

    fn compose(&self, a: &Self::Sketch, b: &Self::Sketch) -> Result<Self::Sketch>;

    /// Canonical byte encoding; equal sketches encode identically.
    fn encode(&self, sketch: &Self::Sketch) -> Vec<u8>;

    /// Declared upper bound on core sizes.
    fn rank_bound(&self) -> usize;

    /// Whether the map claims that core size is monotone under inclusion.
    fn is_monotone(&self) -> bool;

    fn empty_sketch(&self) -> Self::Sketch {
        self.sketch(&KeySet::empty(self.n())).expect("empty set is in range")
    }

    /// A minimal `C ⊆ U` with `S(C) = S(U)`.
    ///
    /// The default drops keys greedily in ascending order and repeats until
    /// no single removal preserves the sketch.
    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        greedy_in_core(self, set)
    }
}

pub(crate) fn check_universe(n: u32, set: &KeySet) -> Result<()> {
    if set.universe() != n {
        return Err(Error::UniverseMismatch {
            expected: n,
            got: set.universe(),
        });
    }
    Ok(())
}

/// Greedy single-key removal in ascending key order, repeated to a fixpoint.
pub fn greedy_in_core<M: ComposableMap + ?Sized>(map: &M, set: &KeySet) -> Result<KeySet> {
    let target = map.sketch(set)?;
    let mut core = set.clone();
    loop {
        let mut changed = false;
        for key in set.iter() {
            if !core.contains(key) {
                continue;
            }
            core.remove(key);
            if map.sketch(&core)? == target {
                changed = true;
            } else {
                core.insert(key);
            }
        }
        if !changed {
            return Ok(core);
        }
    }
}

/// Largest observed in-core size over `samples` random sets plus the empty and
/// full sets; errors if it exceeds the declared bound.
pub fn rank_of<M: ComposableMap + ?Sized, R: Rng + ?Sized>(map: &M, samples: usize, rng: &mut R) -> Result<usize> {
    let n = map.n();
    let mut observed = map.in_core(&KeySet::full(n))?.len();
    for i in 0..samples {
        let q = if i % 2 == 0 { rng.random::<f64>() } else { (i as f64 / samples as f64).max(1e-3) };
        let set = sample_bernoulli_subset(n, q, rng);
        observed = observed.max(map.in_core(&set)?.len());
        if observed > map.rank_bound() {
            break;
        }
    }
    if observed > map.rank_bound() {
        return Err(Error::RankBoundViolated {
            observed,
            bound: map.rank_bound(),
        });
    }
    Ok(observed)
}
