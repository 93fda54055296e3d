//! The two parties of an interaction: a sketching system that turns a query
//! into whatever the responder is allowed to see, and the responder itself.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::composable::ComposableMap;
use crate::error::{invalid, Error, Result};
use crate::linear::{aux_fp, aux_real_small, log_magnitude_ratio, Echelon, Fp, IntegerSketcher, Matrix, RealAuxParams, Rationals};
use crate::model::KeySet;

/// One query: `fresh = U ∖ M`, the mask `M`, their union, and the rate `q`
/// used to draw `U`.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub fresh: &'a KeySet,
    pub mask: &'a KeySet,
    pub full: &'a KeySet,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<V> {
    pub view: V,
    /// Cardinality the responder's own task refers to (`‖v‖₀` for `F_p`
    /// vectors, `|U ∪ M|` otherwise).
    pub task_size: u64,
}

pub trait SketchingSystem {
    type View;

    fn n(&self) -> u32;

    fn observe(&mut self, query: &Query<'_>, rng: &mut ChaCha8Rng) -> Result<Observation<Self::View>>;
}

pub trait QueryResponder<V: ?Sized> {
    fn respond(&mut self, view: &V, round: u64) -> Result<bool>;
}

impl<V: ?Sized, R: QueryResponder<V> + ?Sized> QueryResponder<V> for Box<R> {
    fn respond(&mut self, view: &V, round: u64) -> Result<bool> {
        (**self).respond(view, round)
    }
}

impl<V: ?Sized, R: QueryResponder<V> + ?Sized> QueryResponder<V> for &mut R {
    fn respond(&mut self, view: &V, round: u64) -> Result<bool> {
        (**self).respond(view, round)
    }
}

/// A single composable map; the responder sees `S(U ∪ M)`.
#[derive(Debug, Clone)]
pub struct ComposableSystem<M> {
    pub map: M,
}

impl<M: ComposableMap> SketchingSystem for ComposableSystem<M> {
    type View = M::Sketch;

    fn n(&self) -> u32 {
        self.map.n()
    }

    fn observe(&mut self, query: &Query<'_>, _rng: &mut ChaCha8Rng) -> Result<Observation<M::Sketch>> {
        Ok(Observation {
            view: self.map.sketch(query.full)?,
            task_size: query.full.len() as u64,
        })
    }
}

/// White-box view of a pool: `|W|` with `W = U ∩ (L ∖ M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolView {
    pub hits: u32,
    pub free: u32,
    pub mask_len: u32,
}

/// Exposes only `U ∩ (L ∖ M)` through its size; used by the omniscient
/// responder, which is handed the true pool.
#[derive(Debug, Clone)]
pub struct PoolOracleSystem {
    pool: KeySet,
}

impl PoolOracleSystem {
    pub fn new(pool: KeySet) -> Self {
        Self { pool }
    }
}

impl SketchingSystem for PoolOracleSystem {
    type View = PoolView;

    fn n(&self) -> u32 {
        self.pool.universe()
    }

    fn observe(&mut self, query: &Query<'_>, _rng: &mut ChaCha8Rng) -> Result<Observation<PoolView>> {
        let free = self.pool.len() - self.pool.intersection_len(query.mask);
        Ok(Observation {
            view: PoolView {
                hits: query.fresh.intersection_len(&self.pool) as u32,
                free: free as u32,
                mask_len: query.mask.len() as u32,
            },
            task_size: query.full.len() as u64,
        })
    }
}

/// Structure of the greedy basis `B` of `U ∪ M`: `selected = |B ∖ M|`, and
/// `skipped` counts keys outside `M` that were absent although their column
/// was independent of the basis built so far.
///
/// The likelihood of the pair under rate `q` is `q^selected (1-q)^skipped`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisStatistic {
    pub selected: u32,
    pub skipped: u32,
    pub mask_len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FpView {
    pub sketch: Vec<u64>,
    pub basis: BasisStatistic,
}

/// `F_p` linear sketch with uniform auxiliary values on `U ∪ M`.
#[derive(Debug, Clone)]
pub struct FpSystem {
    matrix: Matrix<Fp>,
}

impl FpSystem {
    pub fn new(matrix: Matrix<Fp>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix<Fp> {
        &self.matrix
    }

    pub fn basis_statistic(&self, full: &KeySet, mask: &KeySet) -> BasisStatistic {
        let mut ech = Echelon::new(*self.matrix.field(), self.matrix.k());
        let (mut selected, mut skipped) = (0, 0);
        for key in 0..self.matrix.n() {
            if ech.is_full() {
                break;
            }
            let col = self.matrix.column(key);
            if full.contains(key) {
                if ech.insert(col) && !mask.contains(key) {
                    selected += 1;
                }
            } else if !ech.contains(col) {
                skipped += 1;
            }
        }
        BasisStatistic {
            selected,
            skipped,
            mask_len: mask.len() as u32,
        }
    }
}

impl SketchingSystem for FpSystem {
    type View = FpView;

    fn n(&self) -> u32 {
        self.matrix.n()
    }

    fn observe(&mut self, query: &Query<'_>, rng: &mut ChaCha8Rng) -> Result<Observation<FpView>> {
        let v = aux_fp(query.mask, query.fresh, *self.matrix.field(), rng)?;
        let sketch = self.matrix.sketch_vector(&v)?;
        Ok(Observation {
            view: FpView {
                sketch,
                basis: self.basis_statistic(query.full, query.mask),
            },
            task_size: v.l0() as u64,
        })
    }
}

/// Measurements scaled by `2^64` plus the mask size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RealView {
    pub scaled: Vec<i128>,
    pub mask_len: u32,
}

/// Real linear sketch with small-magnitude auxiliary values.
#[derive(Debug, Clone)]
pub struct RealSmallSystem {
    matrix: Matrix<Rationals>,
    sketcher: IntegerSketcher,
    params: RealAuxParams,
    max_log_ratio: f64,
}

impl RealSmallSystem {
    pub fn new(matrix: Matrix<Rationals>, params: RealAuxParams) -> Result<Self> {
        let sketcher = IntegerSketcher::new(&matrix)?;
        Ok(Self {
            matrix,
            sketcher,
            params,
            max_log_ratio: 0.0,
        })
    }

    pub fn params(&self) -> &RealAuxParams {
        &self.params
    }

    pub fn matrix(&self) -> &Matrix<Rationals> {
        &self.matrix
    }

    /// Largest `ln(max |v_i| / min |v_i|)` seen so far.
    pub fn max_log_ratio(&self) -> f64 {
        self.max_log_ratio
    }
}

impl SketchingSystem for RealSmallSystem {
    type View = RealView;

    fn n(&self) -> u32 {
        self.matrix.n()
    }

    fn observe(&mut self, query: &Query<'_>, rng: &mut ChaCha8Rng) -> Result<Observation<RealView>> {
        let (v, _) = aux_real_small(query.mask, query.fresh, query.q, &self.params, rng)?;
        if let Some(r) = log_magnitude_ratio(&v, self.params.beta) {
            self.max_log_ratio = self.max_log_ratio.max(r);
        }
        let scaled = self
            .sketcher
            .sketch(&v, self.params.beta)
            .ok_or_else(|| Error::Precision("measurement overflowed 128-bit accumulation".into()))?;
        Ok(Observation {
            view: RealView {
                scaled,
                mask_len: query.mask.len() as u32,
            },
            task_size: v.len() as u64,
        })
    }
}

/// Draws `U ~ Bern[q]` over keys outside the mask into `fresh` and sets
/// `full = fresh ∪ mask`.
pub fn draw_query<R: Rng + ?Sized>(mask: &KeySet, q: f64, fresh: &mut KeySet, full: &mut KeySet, rng: &mut R) -> Result<()> {
    if fresh.universe() != mask.universe() || full.universe() != mask.universe() {
        return Err(invalid("query", "buffers and mask must share a universe"));
    }
    crate::model::fill_bernoulli(fresh, q, rng);
    fresh.difference_with(mask);
    full.clone_from(fresh);
    full.union_with(mask);
    Ok(())
}
