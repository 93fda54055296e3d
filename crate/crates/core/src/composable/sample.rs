use rand::seq::index::sample as sample_indices;
use rand::Rng;

use super::{check_universe, ComposableMap};
use crate::error::{Error, Result};
use crate::model::KeySet;

/// `S(U) = U ∩ R` for a fixed sample `R`.
#[derive(Debug, Clone)]
pub struct SampleSketchMap {
    sample: KeySet,
}

impl SampleSketchMap {
    pub fn new(sample: KeySet) -> Self {
        Self { sample }
    }

    /// A uniformly random sample of `k` keys.
    pub fn random<R: Rng + ?Sized>(n: u32, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k > n as usize {
            return Err(crate::error::invalid("k", format!("sample size {k} not in 1..={n}")));
        }
        let keys = sample_indices(rng, n as usize, k).into_iter().map(|i| i as u32);
        Ok(Self::new(KeySet::from_keys(n, keys)?))
    }

    pub fn sample(&self) -> &KeySet {
        &self.sample
    }

    /// `|W| n / k`.
    pub fn estimate(&self, sketch: &KeySet) -> f64 {
        let k = self.sample.len();
        if k == 0 {
            return 0.0;
        }
        sketch.len() as f64 * self.sample.universe() as f64 / k as f64
    }
}

impl ComposableMap for SampleSketchMap {
    type Sketch = KeySet;

    fn n(&self) -> u32 {
        self.sample.universe()
    }

    fn family(&self) -> &'static str {
        "sample"
    }

    fn sketch(&self, set: &KeySet) -> Result<KeySet> {
        check_universe(self.n(), set)?;
        Ok(set.intersection(&self.sample))
    }

    fn compose(&self, a: &KeySet, b: &KeySet) -> Result<KeySet> {
        for s in [a, b] {
            if s.universe() != self.n() || !s.is_subset(&self.sample) {
                return Err(Error::SketchMismatch(format!("{s:?} is not a subset of the sample")));
            }
        }
        Ok(a.union(b))
    }

    fn encode(&self, sketch: &KeySet) -> Vec<u8> {
        sketch.iter().flat_map(|k| k.to_le_bytes()).collect()
    }

    fn rank_bound(&self) -> usize {
        self.sample.len()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        self.sketch(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngHandle;

    #[test]
    fn intersection_example() {
        let map = SampleSketchMap::new(KeySet::from_keys(8, [2, 5]).unwrap());
        let u = KeySet::from_keys(8, [1, 2, 3]).unwrap();
        assert_eq!(map.sketch(&u).unwrap().to_vec(), vec![2]);
        assert_eq!(map.in_core(&u).unwrap().to_vec(), vec![2]);
    }

    #[test]
    fn foreign_sketch_rejected() {
        let map = SampleSketchMap::new(KeySet::from_keys(8, [2, 5]).unwrap());
        let bogus = KeySet::from_keys(8, [3]).unwrap();
        assert!(map.compose(&bogus, &map.empty_sketch()).is_err());
        assert!(map.sketch(&KeySet::empty(9)).is_err());
    }

    #[test]
    fn random_sample_size() {
        let map = SampleSketchMap::random(100, 8, &mut RngHandle::new(0, 0).rng()).unwrap();
        assert_eq!(map.rank_bound(), 8);
        assert_eq!(map.estimate(&map.empty_sketch()), 0.0);
        let two = KeySet::from_keys(100, map.sample().iter().take(2)).unwrap();
        assert_eq!(map.estimate(&two), 25.0);
    }
}
