use rand::Rng;

use super::{check_universe, ComposableMap};
use crate::error::{invalid, Result};
use crate::model::KeySet;
use crate::stats::occupancy_mle;

/// `S(U)` is the OR of the 0/1 columns indexed by `U`; rows are bits of a `u64`.
///
/// This map is composable but not monotone in general: with columns
/// `{1,2,3}, {1}, {2}, {3}` the full set has cores of sizes 1 and 3.
#[derive(Debug, Clone)]
pub struct BooleanLinearSketchMap {
    k: usize,
    cols: Vec<u64>,
}

impl BooleanLinearSketchMap {
    pub fn new(k: usize, cols: Vec<u64>) -> Result<Self> {
        if k == 0 || k > 64 {
            return Err(invalid("k", format!("boolean sketch rows must be in 1..=64, got {k}")));
        }
        let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        if cols.iter().any(|c| c & !mask != 0) {
            return Err(invalid("matrix", "column has bits above row k"));
        }
        Ok(Self { k, cols })
    }

    /// Each entry is 1 independently with probability `density`.
    pub fn random<R: Rng + ?Sized>(n: u32, k: usize, density: f64, rng: &mut R) -> Result<Self> {
        let cols = (0..n)
            .map(|_| (0..k).fold(0u64, |acc, j| if rng.random_bool(density) { acc | 1 << j } else { acc }))
            .collect();
        Self::new(k, cols)
    }

    pub fn column(&self, key: u32) -> u64 {
        self.cols[key as usize]
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    /// Number of ones in each row.
    pub fn row_weights(&self) -> Vec<u32> {
        (0..self.k).map(|j| self.cols.iter().filter(|c| *c >> j & 1 == 1).count() as u32).collect()
    }

    /// Maximum-likelihood set size from which rows are lit.
    pub fn estimate(&self, sketch: u64) -> f64 {
        let n = self.cols.len() as f64;
        let miss: Vec<f64> = self.row_weights().iter().map(|&w| 1.0 - w as f64 / n).collect();
        let lit: Vec<bool> = (0..self.k).map(|j| sketch >> j & 1 == 1).collect();
        occupancy_mle(&miss, &lit, n)
    }
}

impl ComposableMap for BooleanLinearSketchMap {
    type Sketch = u64;

    fn n(&self) -> u32 {
        self.cols.len() as u32
    }

    fn family(&self) -> &'static str {
        "boolean-linear"
    }

    fn sketch(&self, set: &KeySet) -> Result<u64> {
        check_universe(self.n(), set)?;
        Ok(set.iter().fold(0, |acc, key| acc | self.cols[key as usize]))
    }

    fn compose(&self, a: &u64, b: &u64) -> Result<u64> {
        Ok(a | b)
    }

    fn encode(&self, sketch: &u64) -> Vec<u8> {
        sketch.to_le_bytes().to_vec()
    }

    fn rank_bound(&self) -> usize {
        self.k
    }

    fn is_monotone(&self) -> bool {
        false
    }

    /// Same result as greedy ascending removal, using per-row cover counts.
    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        check_universe(self.n(), set)?;
        let mut cover = vec![0u32; self.k];
        for key in set.iter() {
            let c = self.cols[key as usize];
            for (j, slot) in cover.iter_mut().enumerate() {
                *slot += (c >> j & 1) as u32;
            }
        }
        let mut core = set.clone();
        for key in set.iter() {
            let c = self.cols[key as usize];
            let removable = (0..self.k).all(|j| c >> j & 1 == 0 || cover[j] >= 2);
            if removable {
                core.remove(key);
                for (j, slot) in cover.iter_mut().enumerate() {
                    *slot -= (c >> j & 1) as u32;
                }
            }
        }
        Ok(core)
    }
}
