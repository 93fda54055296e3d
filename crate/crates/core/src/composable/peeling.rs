use super::ComposableMap;
use crate::error::{invalid, Result};
use crate::model::{fill_bernoulli, sample_bernoulli_subset, thin, KeySet, RngHandle};
use crate::stats::binomial_sigma;

/// Disjoint layers `A_1, A_2, ...` where each layer is an in-core of
/// everything not yet peeled.
#[derive(Debug, Clone, PartialEq)]
pub struct CorePeeling {
    n: u32,
    layers: Vec<KeySet>,
}

impl CorePeeling {
    pub fn layers(&self) -> &[KeySet] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Union of the first `count` layers.
    pub fn prefix(&self, count: usize) -> KeySet {
        let mut out = KeySet::empty(self.n);
        for layer in self.layers.iter().take(count) {
            out.union_with(layer);
        }
        out
    }

    /// For each key, the index of its layer.
    pub fn layer_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.n as usize];
        for (i, layer) in self.layers.iter().enumerate() {
            for key in layer.iter() {
                idx[key as usize] = Some(i);
            }
        }
        idx
    }
}

/// Peels in-cores until the remaining keys are transparent or exhausted.
pub fn peel<M: ComposableMap + ?Sized>(map: &M) -> Result<CorePeeling> {
    let n = map.n();
    let empty = map.empty_sketch();
    let mut remaining = KeySet::full(n);
    let mut layers = Vec::new();
    while !remaining.is_empty() && map.sketch(&remaining)? != empty {
        let layer = map.in_core(&remaining)?;
        if layer.is_empty() {
            break;
        }
        remaining.difference_with(&layer);
        layers.push(layer);
    }
    Ok(CorePeeling { n, layers })
}

/// `ceil(ln(k/delta) / qmin)` layers for monotone maps.
pub fn monotone_prefix_len(k: usize, delta: f64, qmin: f64) -> usize {
    ((k as f64 / delta).ln() / qmin).ceil() as usize
}

/// `ceil((k + 4 sqrt(k ln(1/delta))) / qmin)` layers for general maps.
pub fn general_prefix_len(k: usize, delta: f64, qmin: f64) -> usize {
    let k = k as f64;
    ((k + 4.0 * (k * (1.0 / delta).ln()).sqrt()) / qmin).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub enum PoolProvenance {
    /// First `used` layers of a peeling; `requested` is the formula's length
    /// before capping at the number of layers.
    Peeling { requested: usize, used: usize },
    Explicit(String),
}

/// A candidate determining pool with its construction record.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminingPool {
    pub keys: KeySet,
    pub delta: f64,
    pub provenance: PoolProvenance,
}

impl DeterminingPool {
    pub fn explicit(keys: KeySet, delta: f64, label: impl Into<String>) -> Self {
        Self {
            keys,
            delta,
            provenance: PoolProvenance::Explicit(label.into()),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn layers_used(&self) -> Option<usize> {
        match self.provenance {
            PoolProvenance::Peeling { used, .. } => Some(used),
            PoolProvenance::Explicit(_) => None,
        }
    }
}

/// Prefix of the peeling sized by the monotone or general formula.
pub fn pool_from_peeling(peeling: &CorePeeling, rank_bound: usize, qmin: f64, delta: f64, monotone: bool) -> Result<DeterminingPool> {
    if peeling.is_empty() {
        return Err(invalid("peeling", "cannot build a pool from an empty peeling"));
    }
    if !(delta > 0.0 && delta < 1.0) || !(qmin > 0.0 && qmin <= 1.0) {
        return Err(invalid("delta", "need delta in (0,1) and qmin in (0,1]"));
    }
    let requested = if monotone {
        monotone_prefix_len(rank_bound, delta, qmin)
    } else {
        general_prefix_len(rank_bound, delta, qmin)
    };
    let used = requested.min(peeling.len());
    Ok(DeterminingPool {
        keys: peeling.prefix(used),
        delta,
        provenance: PoolProvenance::Peeling { requested, used },
    })
}

/// Failure count of one `(mask, q)` cell of [`verify_pool`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCell {
    pub mask: usize,
    pub q: f64,
    pub trials: u64,
    pub failures: u64,
}

impl PoolCell {
    pub fn rate(&self) -> f64 {
        self.failures as f64 / self.trials.max(1) as f64
    }

    /// `delta + 3 sigma` with sigma the binomial deviation at `delta`.
    pub fn limit(&self, delta: f64) -> f64 {
        delta + 3.0 * binomial_sigma(delta, self.trials.max(1))
    }

    pub fn passes(&self, delta: f64) -> bool {
        self.rate() <= self.limit(delta)
    }
}

/// Fraction of `U ~ Bern[q]` with `S((U ∩ L) ∪ M) != S(U ∪ M)` for every mask and rate.
pub fn verify_pool<M: ComposableMap + ?Sized>(
    map: &M,
    pool: &KeySet,
    masks: &[KeySet],
    q_grid: &[f64],
    trials: u64,
    rng: RngHandle,
) -> Result<Vec<PoolCell>> {
    let n = map.n();
    let mut cells = Vec::with_capacity(masks.len() * q_grid.len());
    let mut u = KeySet::empty(n);
    for (mi, mask) in masks.iter().enumerate() {
        for (qi, &q) in q_grid.iter().enumerate() {
            let mut r = rng.child(((mi as u64) << 32) | qi as u64).rng();
            let mut failures = 0;
            for _ in 0..trials {
                fill_bernoulli(&mut u, q, &mut r);
                let mut reduced = u.intersection(pool);
                reduced.union_with(mask);
                u.union_with(mask);
                if map.sketch(&reduced)? != map.sketch(&u)? {
                    failures += 1;
                }
            }
            cells.push(PoolCell { mask: mi, q, trials, failures });
        }
    }
    Ok(cells)
}

/// Fraction of layer-wise draws `Q_i ~ Bern[q]^{A_i}` for which no `i <= ell`
/// has `S(Q_{<=i}) = S(Q_{<=i} ∪ A_{i+1})`.
pub fn check_termination<M: ComposableMap + ?Sized>(
    map: &M,
    peeling: &CorePeeling,
    ell: usize,
    q: f64,
    trials: u64,
    rng: RngHandle,
) -> Result<f64> {
    if ell > peeling.len() {
        return Err(invalid("ell", format!("{ell} exceeds the {} available layers", peeling.len())));
    }
    let layer_sketches = peeling.layers().iter().map(|l| map.sketch(l)).collect::<Result<Vec<_>>>()?;
    let empty = map.empty_sketch();
    let mut r = rng.rng();
    let mut open = 0u64;
    for _ in 0..trials {
        let mut acc = empty.clone();
        let mut terminated = false;
        for i in 0..ell {
            let qi = thin(&peeling.layers()[i], q, &mut r);
            acc = map.compose(&acc, &map.sketch(&qi)?)?;
            let next = layer_sketches.get(i + 1).unwrap_or(&empty);
            if map.compose(&acc, next)? == acc {
                terminated = true;
                break;
            }
        }
        if !terminated {
            open += 1;
        }
    }
    Ok(open as f64 / trials.max(1) as f64)
}

/// Smallest peeling prefix whose empirical failure at mask `∅` and rate `q`
/// is at most `target`, together with that failure rate.
///
/// Draws are shared across prefixes; by the midpoint property failure is
/// monotone in the prefix, so each draw's minimal prefix is found by bisection.
pub fn empirical_pool_prefix<M: ComposableMap + ?Sized>(
    map: &M,
    peeling: &CorePeeling,
    q: f64,
    target: f64,
    trials: u64,
    rng: RngHandle,
) -> Result<(usize, f64)> {
    let n = map.n();
    let mut r = rng.rng();
    let prefixes: Vec<KeySet> = (0..=peeling.len()).map(|l| peeling.prefix(l)).collect();
    let mut needed = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let u = sample_bernoulli_subset(n, q, &mut r);
        let goal = map.sketch(&u)?;
        let (mut lo, mut hi) = (0usize, peeling.len());
        if map.sketch(&u.intersection(&prefixes[hi]))? != goal {
            needed.push(usize::MAX);
            continue;
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if map.sketch(&u.intersection(&prefixes[mid]))? == goal {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        needed.push(lo);
    }
    needed.sort_unstable();
    let allowed = (target * trials as f64).floor() as usize;
    let idx = (needed.len() - 1).saturating_sub(allowed).min(needed.len() - 1);
    let ell = needed[idx].min(peeling.len());
    let failures = needed.iter().filter(|&&x| x > ell).count();
    Ok((ell, failures as f64 / trials.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composable::{BlockChainMap, BooleanLinearSketchMap, BottomKSketchMap, KPartitionSketchMap, SampleSketchMap};

    #[test]
    fn prefix_formulas() {
        assert_eq!(monotone_prefix_len(8, 0.01, 0.1), 67);
        // (8 + 4 sqrt(8 ln 100)) / 0.1 = 322.78
        assert_eq!(general_prefix_len(8, 0.01, 0.1), 323);
    }

    #[test]
    fn sample_map_single_layer() {
        let r = KeySet::from_keys(50, [3, 9, 40]).unwrap();
        let map = SampleSketchMap::new(r.clone());
        let p = peel(&map).unwrap();
        assert_eq!(p.layers(), std::slice::from_ref(&r));
        let pool = pool_from_peeling(&p, map.rank_bound(), 0.1, 0.01, true).unwrap();
        assert_eq!(pool.keys, r);
        assert_eq!(pool.layers_used(), Some(1));
    }

    #[test]
    fn bottom_k_identity_layers_are_blocks() {
        let map = BottomKSketchMap::identity(20, 4).unwrap();
        let p = peel(&map).unwrap();
        assert_eq!(p.len(), 5);
        for (i, layer) in p.layers().iter().enumerate() {
            assert_eq!(layer.to_vec(), (4 * i as u32..4 * i as u32 + 4).collect::<Vec<_>>());
        }
    }

    #[test]
    fn kpartition_layers_take_best_per_bucket() {
        let mut rng = RngHandle::new(30, 0).rng();
        let map = KPartitionSketchMap::random(120, 4, &mut rng).unwrap();
        let p = peel(&map).unwrap();
        // Oracle: per bucket, keys ordered by rank; the first t layers are the t best of each bucket.
        let mut per_bucket: Vec<Vec<u32>> = vec![Vec::new(); 4];
        let mut keys: Vec<u32> = (0..120).collect();
        keys.sort_by_key(|&k| map.rank_of(k));
        for k in keys {
            per_bucket[map.bucket_of(k) as usize].push(k);
        }
        for t in 1..=p.len() {
            let oracle = KeySet::from_keys(120, per_bucket.iter().flat_map(|b| b.iter().take(t).copied())).unwrap();
            assert_eq!(p.prefix(t), oracle);
        }
    }

    #[test]
    fn layers_disjoint_and_cover_suffix() {
        let mut rng = RngHandle::new(31, 0).rng();
        let map = BooleanLinearSketchMap::random(200, 8, 0.05, &mut rng).unwrap();
        let p = peel(&map).unwrap();
        let mut seen = KeySet::empty(200);
        for (i, layer) in p.layers().iter().enumerate() {
            assert!(layer.is_disjoint(&seen));
            assert!(layer.len() <= 8);
            let suffix = KeySet::full(200).difference(&seen);
            assert_eq!(map.sketch(layer).unwrap(), map.sketch(&suffix).unwrap(), "layer {i}");
            seen.union_with(layer);
        }
        let rest = KeySet::full(200).difference(&seen);
        assert_eq!(map.sketch(&rest).unwrap(), 0);
    }

    #[test]
    fn trivial_and_empty_pools() {
        let mut rng = RngHandle::new(32, 0).rng();
        let map = BottomKSketchMap::random(256, 8, &mut rng).unwrap();
        let masks = vec![KeySet::empty(256), map.top(4)];
        let full = verify_pool(&map, &KeySet::full(256), &masks, &[0.1, 0.5], 500, RngHandle::new(1, 1)).unwrap();
        assert!(full.iter().all(|c| c.failures == 0));
        let none = verify_pool(&map, &KeySet::empty(256), &masks[..1], &[0.3], 500, RngHandle::new(1, 2)).unwrap();
        assert!(none[0].rate() > 0.99);
    }

    #[test]
    fn full_sampling_terminates_immediately() {
        let map = BottomKSketchMap::identity(64, 4).unwrap();
        let p = peel(&map).unwrap();
        assert_eq!(check_termination(&map, &p, 3, 1.0, 100, RngHandle::new(2, 0)).unwrap(), 0.0);
    }

    #[test]
    fn block_chain_resists_termination() {
        let map = BlockChainMap::consecutive(8, BlockChainMap::tight_width(8, 0.01)).unwrap();
        let p = peel(&map).unwrap();
        let open = check_termination(&map, &p, 7, 0.5, 2000, RngHandle::new(3, 0)).unwrap();
        assert!(open >= 0.99, "{open}");
    }

    #[test]
    fn empirical_prefix_is_minimal() {
        let map = BottomKSketchMap::identity(400, 4).unwrap();
        let p = peel(&map).unwrap();
        let (ell, rate) = empirical_pool_prefix(&map, &p, 0.2, 0.05, 2000, RngHandle::new(4, 0)).unwrap();
        assert!(rate <= 0.05);
        let pool = p.prefix(ell);
        let shorter = p.prefix(ell - 1);
        let cells = verify_pool(&map, &shorter, &[KeySet::empty(400)], &[0.2], 2000, RngHandle::new(4, 0).child(9)).unwrap();
        assert!(cells[0].rate() > 0.02, "prefix {ell} should be nearly tight");
        let cells = verify_pool(&map, &pool, &[KeySet::empty(400)], &[0.2], 2000, RngHandle::new(4, 1)).unwrap();
        assert!(cells[0].rate() < 0.08);
    }
}
