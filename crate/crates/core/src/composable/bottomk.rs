use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_universe, ComposableMap};
use crate::error::{invalid, Error, Result};
use crate::model::KeySet;

/// Keeps the `k` highest-priority keys of a set.
///
/// Priorities are a permutation of the keys; rank 0 is the highest priority.
/// A sketch is the ascending list of the kept ranks.
#[derive(Debug, Clone)]
pub struct BottomKSketchMap {
    k: usize,
    rank: Vec<u32>,
    by_rank: Vec<u32>,
}

impl BottomKSketchMap {
    /// `by_rank[i]` is the key with rank `i`.
    pub fn from_order(k: usize, by_rank: Vec<u32>) -> Result<Self> {
        let n = by_rank.len();
        if k == 0 {
            return Err(invalid("k", "bottom-k needs k >= 1"));
        }
        let mut rank = vec![u32::MAX; n];
        for (r, &key) in by_rank.iter().enumerate() {
            if key as usize >= n || rank[key as usize] != u32::MAX {
                return Err(invalid("priorities", "not a permutation of the ground set"));
            }
            rank[key as usize] = r as u32;
        }
        Ok(Self { k, rank, by_rank })
    }

    /// Lower key index means higher priority.
    pub fn identity(n: u32, k: usize) -> Result<Self> {
        Self::from_order(k, (0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: u32, k: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<u32> = (0..n).collect();
        order.shuffle(rng);
        Self::from_order(k, order)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank_of(&self, key: u32) -> u32 {
        self.rank[key as usize]
    }

    pub fn key_at(&self, rank: u32) -> u32 {
        self.by_rank[rank as usize]
    }

    /// Keys whose rank is below `ranks`.
    pub fn top(&self, ranks: usize) -> KeySet {
        let n = self.by_rank.len() as u32;
        KeySet::from_keys(n, self.by_rank[..ranks.min(self.by_rank.len())].iter().copied()).unwrap()
    }

    /// `(k - 1) n / (r_k + 1)` where `r_k` is the k-th smallest rank; exact count
    /// below capacity.
    pub fn estimate(&self, sketch: &[u32]) -> f64 {
        if sketch.len() < self.k {
            return sketch.len() as f64;
        }
        let kth = *sketch.last().unwrap() as f64;
        (self.k as f64 - 1.0) * self.by_rank.len() as f64 / (kth + 1.0)
    }

    fn check_sketch(&self, s: &[u32]) -> Result<()> {
        let n = self.by_rank.len() as u32;
        if s.len() > self.k || s.windows(2).any(|w| w[0] >= w[1]) || s.iter().any(|&r| r >= n) {
            return Err(Error::SketchMismatch(format!("not a bottom-{} sketch: {s:?}", self.k)));
        }
        Ok(())
    }
}

impl ComposableMap for BottomKSketchMap {
    type Sketch = Vec<u32>;

    fn n(&self) -> u32 {
        self.by_rank.len() as u32
    }

    fn family(&self) -> &'static str {
        "bottom-k"
    }

    fn sketch(&self, set: &KeySet) -> Result<Vec<u32>> {
        check_universe(self.n(), set)?;
        let mut out = Vec::with_capacity(self.k);
        let size = set.len();
        if size == 0 {
            return Ok(out);
        }
        // Walking ranks is cheap for dense sets; sparse sets are scanned directly.
        if size * size >= self.k * self.by_rank.len() {
            for (r, &key) in self.by_rank.iter().enumerate() {
                if set.contains(key) {
                    out.push(r as u32);
                    if out.len() == self.k {
                        break;
                    }
                }
            }
        } else {
            let mut ranks: Vec<u32> = set.iter().map(|key| self.rank[key as usize]).collect();
            ranks.sort_unstable();
            ranks.truncate(self.k);
            out = ranks;
        }
        Ok(out)
    }

    fn compose(&self, a: &Vec<u32>, b: &Vec<u32>) -> Result<Vec<u32>> {
        self.check_sketch(a)?;
        self.check_sketch(b)?;
        let mut out = Vec::with_capacity(self.k);
        let (mut i, mut j) = (0, 0);
        while out.len() < self.k && (i < a.len() || j < b.len()) {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            out.push(next);
        }
        Ok(out)
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
        KeySet::from_keys(self.n(), s.iter().map(|&r| self.by_rank[r as usize]))
    }
}
