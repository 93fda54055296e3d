use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_universe, ComposableMap};
use crate::error::{invalid, Error, Result};
use crate::model::KeySet;

const EMPTY: u32 = u32::MAX;

/// Keys are hashed into `k` buckets; the sketch keeps the best-ranked member of
/// each bucket (`u32::MAX` marks an empty bucket).
#[derive(Debug, Clone)]
pub struct KPartitionSketchMap {
    k: usize,
    bucket: Vec<u32>,
    rank: Vec<u32>,
    by_rank: Vec<u32>,
}

impl KPartitionSketchMap {
    pub fn new(k: usize, bucket: Vec<u32>, by_rank: Vec<u32>) -> Result<Self> {
        let n = bucket.len();
        if k == 0 {
            return Err(invalid("k", "k-partition needs k >= 1"));
        }
        if by_rank.len() != n || bucket.iter().any(|&b| b as usize >= k) {
            return Err(invalid("buckets", "bucket ids must be < k and cover the ground set"));
        }
        let mut rank = vec![u32::MAX; n];
        for (r, &key) in by_rank.iter().enumerate() {
            if key as usize >= n || rank[key as usize] != u32::MAX {
                return Err(invalid("priorities", "not a permutation of the ground set"));
            }
            rank[key as usize] = r as u32;
        }
        Ok(Self { k, bucket, rank, by_rank })
    }

    pub fn random<R: Rng + ?Sized>(n: u32, k: usize, rng: &mut R) -> Result<Self> {
        let bucket = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
        let mut order: Vec<u32> = (0..n).collect();
        order.shuffle(rng);
        Self::new(k, bucket, order)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bucket_of(&self, key: u32) -> u32 {
        self.bucket[key as usize]
    }

    pub fn rank_of(&self, key: u32) -> u32 {
        self.rank[key as usize]
    }

    /// `k (k - 1) / sum_b u_b` with `u_b = (rank + 1)/(n + 1)` and `u_b = 1` for
    /// empty buckets.
    pub fn estimate(&self, sketch: &[u32]) -> f64 {
        if sketch.iter().all(|&r| r == EMPTY) {
            return 0.0;
        }
        let n = self.bucket.len() as f64;
        let total: f64 = sketch
            .iter()
            .map(|&r| if r == EMPTY { 1.0 } else { (r as f64 + 1.0) / (n + 1.0) })
            .sum();
        let k = self.k as f64;
        k * (k - 1.0).max(1.0) / total
    }
}

impl ComposableMap for KPartitionSketchMap {
    type Sketch = Vec<u32>;

    fn n(&self) -> u32 {
        self.bucket.len() as u32
    }

    fn family(&self) -> &'static str {
        "k-partition"
    }

    fn sketch(&self, set: &KeySet) -> Result<Vec<u32>> {
        check_universe(self.n(), set)?;
        let mut out = vec![EMPTY; self.k];
        let size = set.len();
        if size * size >= 2 * self.k * self.bucket.len() {
            let mut filled = 0;
            for (r, &key) in self.by_rank.iter().enumerate() {
                if set.contains(key) {
                    let slot = &mut out[self.bucket[key as usize] as usize];
                    if *slot == EMPTY {
                        *slot = r as u32;
                        filled += 1;
                        if filled == self.k {
                            break;
                        }
                    }
                }
            }
        } else {
            for key in set.iter() {
                let slot = &mut out[self.bucket[key as usize] as usize];
                *slot = (*slot).min(self.rank[key as usize]);
            }
        }
        Ok(out)
    }

    fn compose(&self, a: &Vec<u32>, b: &Vec<u32>) -> Result<Vec<u32>> {
        if a.len() != self.k || b.len() != self.k {
            return Err(Error::SketchMismatch(format!("expected {} buckets", self.k)));
        }
        Ok(a.iter().zip(b).map(|(x, y)| *x.min(y)).collect())
    }

    fn encode(&self, sketch: &Vec<u32>) -> Vec<u8> {
        sketch.iter().flat_map(|r| r.to_le_bytes()).collect()
    }

    fn rank_bound(&self) -> usize {
        self.k
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        let s = self.sketch(set)?;
        KeySet::from_keys(self.n(), s.iter().filter(|&&r| r != EMPTY).map(|&r| self.by_rank[r as usize]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_bernoulli_subset, RngHandle};
    use proptest::prelude::*;

    fn brute(map: &KPartitionSketchMap, set: &KeySet) -> Vec<u32> {
        (0..map.k() as u32)
            .map(|b| set.iter().filter(|&x| map.bucket_of(x) == b).map(|x| map.rank_of(x)).min().unwrap_or(EMPTY))
            .collect()
    }

    #[test]
    fn estimator_tracks_size() {
        let mut rng = RngHandle::new(12, 0).rng();
        let n = 4096;
        let map = KPartitionSketchMap::random(n, 16, &mut rng).unwrap();
        let mut ratio = 0.0;
        let trials = 4000;
        for _ in 0..trials {
            let u = sample_bernoulli_subset(n, 0.3, &mut rng);
            ratio += map.estimate(&map.sketch(&u).unwrap()) / u.len() as f64;
        }
        let mean = ratio / trials as f64;
        assert!((mean - 1.0).abs() < 0.15, "mean ratio {mean}");
    }

    proptest! {
        #[test]
        fn sketch_matches_per_bucket_min(seed in 0u64..500, q in 0.0f64..1.0) {
            let mut rng = RngHandle::new(seed, 2).rng();
            let map = KPartitionSketchMap::random(200, 5, &mut rng).unwrap();
            let u = sample_bernoulli_subset(200, q, &mut rng);
            let v = sample_bernoulli_subset(200, q * q, &mut rng);
            prop_assert_eq!(map.sketch(&u).unwrap(), brute(&map, &u));
            prop_assert_eq!(map.sketch(&v).unwrap(), brute(&map, &v));
            prop_assert_eq!(
                map.compose(&map.sketch(&u).unwrap(), &map.sketch(&v).unwrap()).unwrap(),
                map.sketch(&u.union(&v)).unwrap()
            );
            let core = map.in_core(&u).unwrap();
            prop_assert!(core.is_subset(&u));
            prop_assert_eq!(map.sketch(&core).unwrap(), map.sketch(&u).unwrap());
        }
    }
}
