use super::field::Field;
use super::matrix::{Echelon, Matrix};
use crate::composable::{check_universe, peel, pool_from_peeling, verify_pool, ComposableMap, CorePeeling, DeterminingPool, PoolCell};
use crate::error::{invalid, Error, Result};
use crate::model::{KeySet, RngHandle};

/// `S(I) = span{a_i : i ∈ I}`, represented by its reduced echelon basis.
#[derive(Debug, Clone)]
pub struct SpanMap<F: Field> {
    matrix: Matrix<F>,
}

impl<F: Field> SpanMap<F> {
    pub fn new(matrix: Matrix<F>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }
}

impl<F: Field> ComposableMap for SpanMap<F> {
    type Sketch = Vec<Vec<F::Elem>>;

    fn n(&self) -> u32 {
        self.matrix.n()
    }

    fn family(&self) -> &'static str {
        "span"
    }

    fn sketch(&self, set: &KeySet) -> Result<Self::Sketch> {
        check_universe(self.n(), set)?;
        let mut ech = Echelon::new(self.matrix.field().clone(), self.matrix.k());
        for key in set.iter() {
            if ech.is_full() {
                break;
            }
            ech.insert(self.matrix.column(key));
        }
        Ok(ech.canonical())
    }

    fn compose(&self, a: &Self::Sketch, b: &Self::Sketch) -> Result<Self::Sketch> {
        let k = self.matrix.k();
        let mut ech = Echelon::new(self.matrix.field().clone(), k);
        for row in a.iter().chain(b) {
            if row.len() != k {
                return Err(Error::SketchMismatch(format!("span row of length {} in dimension {k}", row.len())));
            }
            ech.insert(row);
        }
        Ok(ech.canonical())
    }

    fn encode(&self, sketch: &Self::Sketch) -> Vec<u8> {
        let f = self.matrix.field();
        sketch
            .iter()
            .map(|row| row.iter().map(|a| f.format(a)).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";")
            .into_bytes()
    }

    fn rank_bound(&self) -> usize {
        self.matrix.k()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        check_universe(self.n(), set)?;
        KeySet::from_keys(self.n(), self.matrix.greedy_basis_of(set.iter()))
    }
}

/// `S(I)` = the greedy basis of the columns indexed by `I`.
#[derive(Debug, Clone)]
pub struct GreedyBasisMap<F: Field> {
    matrix: Matrix<F>,
}

impl<F: Field> GreedyBasisMap<F> {
    pub fn new(matrix: Matrix<F>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }
}

impl<F: Field> ComposableMap for GreedyBasisMap<F> {
    type Sketch = Vec<u32>;

    fn n(&self) -> u32 {
        self.matrix.n()
    }

    fn family(&self) -> &'static str {
        "greedy-basis"
    }

    fn sketch(&self, set: &KeySet) -> Result<Vec<u32>> {
        check_universe(self.n(), set)?;
        Ok(self.matrix.greedy_basis_of(set.iter()))
    }

    fn compose(&self, a: &Vec<u32>, b: &Vec<u32>) -> Result<Vec<u32>> {
        let n = self.n();
        if let Some(&key) = a.iter().chain(b).find(|&&k| k >= n) {
            return Err(Error::KeyOutOfRange { key, n });
        }
        let mut merged: Vec<u32> = a.iter().chain(b).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        Ok(self.matrix.greedy_basis_of(merged))
    }

    fn encode(&self, sketch: &Vec<u32>) -> Vec<u8> {
        sketch.iter().flat_map(|k| k.to_le_bytes()).collect()
    }

    fn rank_bound(&self) -> usize {
        self.matrix.k()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn in_core(&self, set: &KeySet) -> Result<KeySet> {
        KeySet::from_keys(self.n(), self.sketch(set)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    /// Span equality: `span(U ∪ M) = span((U ∩ L) ∪ M)`.
    Basis,
    /// Greedy containment: `GreedyBasis(U ∪ M) ⊆ (U ∩ L) ∪ M`.
    GreedyBasis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisPool {
    pub pool: DeterminingPool,
    pub kind: PoolKind,
    pub peeling: CorePeeling,
}

impl BasisPool {
    pub fn keys(&self) -> &KeySet {
        &self.pool.keys
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }
}

/// Peels the span or greedy-basis map of the columns and keeps the monotone
/// prefix of `ceil(ln(k/δ)/qmin)` layers.
pub fn basis_pool<F: Field>(matrix: &Matrix<F>, qmin: f64, delta: f64, kind: PoolKind) -> Result<BasisPool> {
    let peeling = match kind {
        PoolKind::Basis => peel(&SpanMap::new(matrix.clone()))?,
        PoolKind::GreedyBasis => peel(&GreedyBasisMap::new(matrix.clone()))?,
    };
    let pool = if peeling.is_empty() {
        DeterminingPool::explicit(KeySet::empty(matrix.n()), delta, "zero matrix")
    } else {
        pool_from_peeling(&peeling, matrix.k(), qmin, delta, true)?
    };
    Ok(BasisPool { pool, kind, peeling })
}

/// Per-cell failure rates of the pool event for `kind`.
pub fn verify_linear_pool<F: Field>(
    matrix: &Matrix<F>,
    pool: &KeySet,
    kind: PoolKind,
    masks: &[KeySet],
    q_grid: &[f64],
    trials: u64,
    rng: RngHandle,
) -> Result<Vec<PoolCell>> {
    match kind {
        PoolKind::Basis => {
            if let Some(i) = masks.iter().position(|m| !m.is_subset(pool)) {
                return Err(invalid("masks", format!("mask {i} is not contained in the pool")));
            }
            verify_pool(&SpanMap::new(matrix.clone()), pool, masks, q_grid, trials, rng)
        }
        PoolKind::GreedyBasis => verify_pool(&GreedyBasisMap::new(matrix.clone()), pool, masks, q_grid, trials, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composable::brute_force_axioms;
    use crate::linear::{Fp, Rationals};
    use rand::Rng;

    fn padded_identity(k: usize, n: u32) -> Matrix<Fp> {
        let f = Fp::new(11).unwrap();
        let cols = (0..n as usize).map(|i| (0..k).map(|j| (i == j) as u64).collect()).collect();
        Matrix::from_cols(f, k, cols).unwrap()
    }

    #[test]
    fn identity_pool_is_nonzero_columns() {
        let m = padded_identity(4, 30);
        let pool = basis_pool(&m, 0.1, 0.01, PoolKind::Basis).unwrap();
        assert_eq!(pool.keys().to_vec(), vec![0, 1, 2, 3]);
        assert_eq!(pool.peeling.len(), 1);
    }

    #[test]
    fn maps_pass_axioms() {
        let mut rng = RngHandle::new(70, 0).rng();
        let f = Fp::new(3).unwrap();
        let cols = (0..10).map(|_| (0..3).map(|_| if rng.random_bool(0.5) { rng.random_range(1..3) } else { 0 }).collect()).collect();
        let m = Matrix::from_cols(f, 3, cols).unwrap();
        for report in [
            brute_force_axioms(&SpanMap::new(m.clone()), 12).unwrap(),
            brute_force_axioms(&GreedyBasisMap::new(m), 12).unwrap(),
        ] {
            assert!(report.passed(), "{}: {:?}", report.family, report.first_failure());
        }
        let r = Matrix::from_integers(&[vec![1, 0, 1, 2, 0, 1, 3, 0], vec![0, 1, 1, 0, 0, 2, 1, 1]]).unwrap();
        let report = brute_force_axioms(&SpanMap::new(r), 12).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }

    #[test]
    fn greedy_pool_contains_first_basis_layer() {
        let mut rng = RngHandle::new(71, 0).rng();
        let f = Fp::new(5).unwrap();
        let cols = (0..200).map(|_| (0..4).map(|_| if rng.random_bool(0.3) { rng.random_range(1..5) } else { 0 }).collect()).collect();
        let m = Matrix::from_cols(f, 4, cols).unwrap();
        let basis = basis_pool(&m, 0.2, 0.05, PoolKind::Basis).unwrap();
        let greedy = basis_pool(&m, 0.2, 0.05, PoolKind::GreedyBasis).unwrap();
        assert!(basis.peeling.layers()[0].is_subset(greedy.keys()));
        let cap = crate::composable::monotone_prefix_len(4, 0.05, 0.2) * 4;
        assert!(basis.len() <= cap && greedy.len() <= cap);
    }

    #[test]
    fn trivial_and_empty_pools() {
        let f = Fp::new(257).unwrap();
        let mut rng = RngHandle::new(72, 0).rng();
        let m = Matrix::random(f, 8, 300, &mut rng).unwrap();
        let all = KeySet::full(300);
        let none = KeySet::empty(300);
        let cells = verify_linear_pool(&m, &all, PoolKind::Basis, std::slice::from_ref(&none), &[0.3], 500, RngHandle::new(73, 0)).unwrap();
        assert_eq!(cells[0].failures, 0);
        let cells = verify_linear_pool(&m, &none, PoolKind::Basis, std::slice::from_ref(&none), &[0.3], 500, RngHandle::new(74, 0)).unwrap();
        assert_eq!(cells[0].failures, 500);
        let mask = KeySet::from_keys(300, [5]).unwrap();
        assert!(verify_linear_pool(&m, &none, PoolKind::Basis, &[mask], &[0.3], 10, RngHandle::new(75, 0)).is_err());
    }

    #[test]
    fn dense_fp_pool_within_delta() {
        let f = Fp::new(257).unwrap();
        let mut rng = RngHandle::new(76, 0).rng();
        let m = Matrix::random(f, 8, 2048, &mut rng).unwrap();
        let pool = basis_pool(&m, 0.1, 0.01, PoolKind::Basis).unwrap();
        assert_eq!(pool.len(), 67 * 8);
        let masks = [KeySet::empty(2048), KeySet::from_keys(2048, [0, 9, 17]).unwrap()];
        let cells = verify_linear_pool(&m, pool.keys(), PoolKind::Basis, &masks, &[0.1, 0.4], 1000, RngHandle::new(77, 0)).unwrap();
        assert!(cells.iter().all(|c| c.passes(0.01)), "{cells:?}");
    }

    #[test]
    fn real_greedy_pool_on_level_matrix() {
        // disjoint 0/1 row supports of sizes 1, 2, 4, 8
        let mut rows = vec![vec![0i64; 20]; 4];
        let mut next = 0;
        for (j, row) in rows.iter_mut().enumerate() {
            for _ in 0..1 << j {
                row[next] = 1;
                next += 1;
            }
        }
        let m = Matrix::from_integers(&rows).unwrap();
        let pool = basis_pool(&m, 0.1, 0.01, PoolKind::GreedyBasis).unwrap();
        assert_eq!(pool.keys().to_vec(), (0..15).collect::<Vec<_>>());
        let _: &Matrix<Rationals> = GreedyBasisMap::new(m).matrix();
    }
}
