//! Adversarial fixtures: a long thin peeling, products of maps, and a
//! deliberately broken composition.

use super::{check_universe, ComposableMap};
use crate::error::{invalid, Error, Result};
use crate::model::KeySet;

/// Sketch of a [`BlockChainMap`]: the first fully covered block (or the block
/// count when none is) and the covered parts of all earlier blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockChainSketch {
    pub first_full: u32,
    pub partial: Vec<u64>,
}

/// Disjoint blocks `R_0, R_1, ...`; the sketch records the smallest `i` with
/// `R_i ⊆ U` together with `U ∩ R_j` for every `j < i`. Keys outside all blocks
/// are invisible. Core peeling of this map is `R_0, R_1, ...`.
#[derive(Debug, Clone)]
pub struct BlockChainMap {
    n: u32,
    blocks: Vec<Vec<u32>>,
    slot: Vec<Option<(u32, u32)>>,
}

impl BlockChainMap {
    pub fn new(n: u32, blocks: Vec<Vec<u32>>) -> Result<Self> {
        let mut slot = vec![None; n as usize];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() || block.len() > 64 {
                return Err(invalid("blocks", "each block needs 1..=64 keys"));
            }
            for (bit, &key) in block.iter().enumerate() {
                if key >= n {
                    return Err(Error::KeyOutOfRange { key, n });
                }
                if slot[key as usize].is_some() {
                    return Err(invalid("blocks", format!("key {key} appears in two blocks")));
                }
                slot[key as usize] = Some((b as u32, bit as u32));
            }
        }
        Ok(Self { n, blocks, slot })
    }

    /// `count` consecutive blocks of `width` keys covering `0..count*width`.
    pub fn consecutive(count: usize, width: usize) -> Result<Self> {
        let n = (count * width) as u32;
        let blocks = (0..count)
            .map(|b| ((b * width) as u32..((b + 1) * width) as u32).collect())
            .collect();
        Self::new(n, blocks)
    }

    /// Block width `ceil(log2(10 k / delta))`, small enough that a rate-1/2
    /// sample covers a given block with probability at most `delta / (10 k)`.
    pub fn tight_width(k: usize, delta: f64) -> usize {
        (10.0 * k as f64 / delta).log2().ceil() as usize
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    fn full_mask(&self, b: usize) -> u64 {
        let w = self.blocks[b].len();
        if w == 64 {
            u64::MAX
        } else {
            (1u64 << w) - 1
        }
    }
}

impl ComposableMap for BlockChainMap {
    type Sketch = BlockChainSketch;

    fn n(&self) -> u32 {
        self.n
    }

    fn family(&self) -> &'static str {
        "block-chain"
    }

    fn sketch(&self, set: &KeySet) -> Result<BlockChainSketch> {
        check_universe(self.n, set)?;
        let mut masks = vec![0u64; self.blocks.len()];
        for key in set.iter() {
            if let Some((b, bit)) = self.slot[key as usize] {
                masks[b as usize] |= 1 << bit;
            }
        }
        let first = (0..self.blocks.len()).find(|&b| masks[b] == self.full_mask(b)).unwrap_or(self.blocks.len());
        masks.truncate(first);
        Ok(BlockChainSketch {
            first_full: first as u32,
            partial: masks,
        })
    }

    fn compose(&self, a: &BlockChainSketch, b: &BlockChainSketch) -> Result<BlockChainSketch> {
        for s in [a, b] {
            if s.first_full as usize > self.blocks.len() || s.partial.len() != s.first_full as usize {
                return Err(Error::SketchMismatch(format!("malformed block-chain sketch {s:?}")));
            }
        }
        let bound = a.first_full.min(b.first_full) as usize;
        let mut partial = Vec::with_capacity(bound);
        for j in 0..bound {
            let m = a.partial[j] | b.partial[j];
            if m == self.full_mask(j) {
                return Ok(BlockChainSketch {
                    first_full: j as u32,
                    partial,
                });
            }
            partial.push(m);
        }
        Ok(BlockChainSketch {
            first_full: bound as u32,
            partial,
        })
    }

    fn encode(&self, sketch: &BlockChainSketch) -> Vec<u8> {
        let mut out = sketch.first_full.to_le_bytes().to_vec();
        for m in &sketch.partial {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out
    }

    fn rank_bound(&self) -> usize {
        let mut best = 0;
        let mut prefix = 0;
        for block in &self.blocks {
            best = best.max(prefix + block.len());
            prefix += block.len() - 1;
        }
        best.max(prefix)
    }

    fn is_monotone(&self) -> bool {
        false
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        let s = self.sketch(set)?;
        let mut core = KeySet::empty(self.n);
        for (j, m) in s.partial.iter().enumerate() {
            for (bit, &key) in self.blocks[j].iter().enumerate() {
                if m >> bit & 1 == 1 {
                    core.insert(key);
                }
            }
        }
        if let Some(block) = self.blocks.get(s.first_full as usize) {
            block.iter().for_each(|&key| {
                core.insert(key);
            });
        }
        Ok(core)
    }
}

/// Two maps on disjoint ground sets: keys `0..a.n()` go to `a`, the rest to `b`.
#[derive(Debug, Clone)]
pub struct ProductMap<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: ComposableMap, B: ComposableMap> ProductMap<A, B> {
    pub fn new(a: A, b: B) -> Self {
        Self { a, b }
    }

    fn split(&self, set: &KeySet) -> Result<(KeySet, KeySet)> {
        check_universe(self.n(), set)?;
        let na = self.a.n();
        let mut left = KeySet::empty(na);
        let mut right = KeySet::empty(self.b.n());
        for key in set.iter() {
            if key < na {
                left.insert(key);
            } else {
                right.insert(key - na);
            }
        }
        Ok((left, right))
    }
}

impl<A: ComposableMap, B: ComposableMap> ComposableMap for ProductMap<A, B> {
    type Sketch = (A::Sketch, B::Sketch);

    fn n(&self) -> u32 {
        self.a.n() + self.b.n()
    }

    fn family(&self) -> &'static str {
        "product"
    }

    fn sketch(&self, set: &KeySet) -> Result<Self::Sketch> {
        let (l, r) = self.split(set)?;
        Ok((self.a.sketch(&l)?, self.b.sketch(&r)?))
    }

    fn compose(&self, x: &Self::Sketch, y: &Self::Sketch) -> Result<Self::Sketch> {
        Ok((self.a.compose(&x.0, &y.0)?, self.b.compose(&x.1, &y.1)?))
    }

    fn encode(&self, sketch: &Self::Sketch) -> Vec<u8> {
        let left = self.a.encode(&sketch.0);
        let mut out = (left.len() as u32).to_le_bytes().to_vec();
        out.extend(left);
        out.extend(self.b.encode(&sketch.1));
        out
    }

    fn rank_bound(&self) -> usize {
        self.a.rank_bound() + self.b.rank_bound()
    }

    fn is_monotone(&self) -> bool {
        self.a.is_monotone() && self.b.is_monotone()
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        let (l, r) = self.split(set)?;
        let na = self.a.n();
        let keys = self.a.in_core(&l)?.iter().chain(self.b.in_core(&r)?.iter().map(|k| k + na)).collect::<Vec<_>>();
        KeySet::from_keys(self.n(), keys)
    }
}

/// Mutation fixture: sketches like the inner map but `compose` ignores its
/// second argument.
#[derive(Debug, Clone)]
pub struct BrokenCompose<M>(pub M);

impl<M: ComposableMap> ComposableMap for BrokenCompose<M> {
    type Sketch = M::Sketch;

    fn n(&self) -> u32 {
        self.0.n()
    }

    fn family(&self) -> &'static str {
        "broken-compose"
    }

    fn sketch(&self, set: &KeySet) -> Result<M::Sketch> {
        self.0.sketch(set)
    }

    fn compose(&self, a: &M::Sketch, _b: &M::Sketch) -> Result<M::Sketch> {
        Ok(a.clone())
    }

    fn encode(&self, sketch: &M::Sketch) -> Vec<u8> {
        self.0.encode(sketch)
    }

    fn rank_bound(&self) -> usize {
        self.0.rank_bound()
    }

    fn is_monotone(&self) -> bool {
        self.0.is_monotone()
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        self.0.in_core(set)
    }
}
