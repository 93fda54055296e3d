use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use super::field::{Field, Fp, Rationals};
use super::vector::QueryVector;
use crate::error::{invalid, Error, Result};

/// A `k × n` matrix stored by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F: Field> {
    field: F,
    k: usize,
    cols: Vec<Vec<F::Elem>>,
}

impl<F: Field> Matrix<F> {
    pub fn from_cols(field: F, k: usize, cols: Vec<Vec<F::Elem>>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "matrix needs at least one row"));
        }
        if let Some(bad) = cols.iter().find(|c| c.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
        }
        Ok(Self { field, k, cols })
    }

    pub fn from_rows(field: F, rows: Vec<Vec<F::Elem>>) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        let cols = (0..n).map(|i| rows.iter().map(|r| r[i].clone()).collect()).collect();
        Self::from_cols(field, k, cols)
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.cols.len() as u32
    }

    pub fn column(&self, i: u32) -> &[F::Elem] {
        &self.cols[i as usize]
    }

    pub fn columns(&self) -> &[Vec<F::Elem>] {
        &self.cols
    }

    pub fn entry(&self, row: usize, col: u32) -> &F::Elem {
        &self.cols[col as usize][row]
    }

    pub fn rows(&self) -> Vec<Vec<F::Elem>> {
        (0..self.k).map(|j| self.cols.iter().map(|c| c[j].clone()).collect()).collect()
    }

    /// `A v`, exact.
    pub fn sketch_vector(&self, v: &QueryVector<F::Elem>) -> Result<Vec<F::Elem>> {
        if v.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n() as usize,
                got: v.n() as usize,
            });
        }
        let f = &self.field;
        let mut out = vec![f.zero(); self.k];
        for (key, value) in v.iter() {
            if f.is_zero(value) {
                continue;
            }
            for (slot, a) in out.iter_mut().zip(&self.cols[key as usize]) {
                if !f.is_zero(a) {
                    *slot = f.add(slot, &f.mul(a, value));
                }
            }
        }
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        let mut ech = Echelon::new(self.field.clone(), self.k);
        for c in &self.cols {
            if ech.is_full() {
                break;
            }
            ech.insert(c);
        }
        ech.rank()
    }

    /// Greedy basis of the given keys, scanned in ascending order.
    pub fn greedy_basis_of(&self, keys: impl IntoIterator<Item = u32>) -> Vec<u32> {
        let mut ech = Echelon::new(self.field.clone(), self.k);
        let mut out = Vec::new();
        for key in keys {
            if ech.is_full() {
                break;
            }
            if ech.insert(&self.cols[key as usize]) {
                out.push(key);
            }
        }
        out
    }

    /// Text form: header `p k n` (`p = 0` for rationals) then `k` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.field.characteristic(), self.k, self.n());
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|a| self.field.format(a)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(field: F, text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut header = || -> Result<u64> {
            tokens
                .next()
                .ok_or_else(|| Error::Fixture("truncated header".into()))?
                .parse()
                .map_err(|_| Error::Fixture("header must be three integers".into()))
        };
        let (p, k, n) = (header()?, header()? as usize, header()? as usize);
        if p != field.characteristic() {
            return Err(Error::Fixture(format!("header p = {p} but field has characteristic {}", field.characteristic())));
        }
        let entries = tokens.map(|t| field.parse(t)).collect::<Result<Vec<_>>>()?;
        if entries.len() != k * n {
            return Err(Error::Fixture(format!("expected {} entries, found {}", k * n, entries.len())));
        }
        let rows = entries.chunks(n.max(1)).map(|c| c.to_vec()).collect::<Vec<_>>();
        if n == 0 {
            return Self::from_cols(field, k, Vec::new());
        }
        Self::from_rows(field, rows)
    }
}

impl Matrix<Fp> {
    /// Entries i.i.d. uniform on `F_p`.
    pub fn random<R: Rng + ?Sized>(field: Fp, k: usize, n: u32, rng: &mut R) -> Result<Self> {
        let p = field.p();
        let cols = (0..n).map(|_| (0..k).map(|_| rng.random_range(0..p)).collect()).collect();
        Self::from_cols(field, k, cols)
    }
}

impl Matrix<Rationals> {
    pub fn from_integers(rows: &[Vec<i64>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
            .collect();
        Self::from_rows(Rationals, rows)
    }

    /// Columns as machine integers when every entry is an integer that fits.
    pub fn integer_cols(&self) -> Option<Vec<Vec<i64>>> {
        self.cols
            .iter()
            .map(|c| c.iter().map(|a| if a.is_integer() { a.numer().to_i64() } else { None }).collect())
            .collect()
    }

    pub fn scaled(&self, factor: &BigRational) -> Self {
        let cols = self.cols.iter().map(|c| c.iter().map(|a| a * factor).collect()).collect();
        Self {
            field: Rationals,
            k: self.k,
            cols,
        }
    }
}

/// Either kind of matrix read from a fixture file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    Fp(Matrix<Fp>),
    Real(Matrix<Rationals>),
}

pub fn parse_matrix(text: &str) -> Result<AnyMatrix> {
    let p: u64 = text
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Fixture("missing modulus in header".into()))?;
    if p == 0 {
        Ok(AnyMatrix::Real(Matrix::from_text(Rationals, text)?))
    } else {
        Ok(AnyMatrix::Fp(Matrix::from_text(Fp::new(p)?, text)?))
    }
}

/// Incremental reduced row echelon form of a spanning set.
#[derive(Debug, Clone)]
pub struct Echelon<F: Field> {
    field: F,
    dim: usize,
    rows: Vec<Vec<F::Elem>>,
    pivots: Vec<usize>,
}

impl<F: Field> Echelon<F> {
    pub fn new(field: F, dim: usize) -> Self {
        Self {
            field,
            dim,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.dim
    }

    fn reduce(&self, v: &mut [F::Elem]) {
        let f = &self.field;
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if f.is_zero(&v[p]) {
                continue;
            }
            let c = v[p].clone();
            for j in p..self.dim {
                if !f.is_zero(&row[j]) {
                    v[j] = f.sub(&v[j], &f.mul(&c, &row[j]));
                }
            }
        }
    }

    pub fn contains(&self, v: &[F::Elem]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|a| self.field.is_zero(a))
    }

    /// Adds `v`; returns whether it was independent of the current span.
    pub fn insert(&mut self, v: &[F::Elem]) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let f = self.field.clone();
        let mut w = v.to_vec();
        self.reduce(&mut w);
        let Some(p) = w.iter().position(|a| !f.is_zero(a)) else {
            return false;
        };
        let inv = f.inv(&w[p]).expect("nonzero pivot");
        for a in w.iter_mut().skip(p) {
            *a = f.mul(a, &inv);
        }
        for row in &mut self.rows {
            if f.is_zero(&row[p]) {
                continue;
            }
            let c = row[p].clone();
            for j in p..self.dim {
                if !f.is_zero(&w[j]) {
                    row[j] = f.sub(&row[j], &f.mul(&c, &w[j]));
                }
            }
        }
        let at = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(at, p);
        self.rows.insert(at, w);
        true
    }

    /// Canonical basis of the span: reduced rows ordered by pivot.
    pub fn canonical(&self) -> Vec<Vec<F::Elem>> {
        self.rows.clone()
    }
}

/// Indices of the lexicographically first basis among `columns`.
pub fn greedy_basis<F: Field>(field: &F, columns: &[Vec<F::Elem>]) -> Vec<usize> {
    let Some(dim) = columns.first().map(|c| c.len()) else {
        return Vec::new();
    };
    let mut ech = Echelon::new(field.clone(), dim);
    columns.iter().enumerate().filter(|(_, c)| ech.insert(c)).map(|(i, _)| i).collect()
}

/// Gauss–Jordan inverse of a square matrix given by rows.
pub fn invert<F: Field>(field: &F, m: &[Vec<F::Elem>]) -> Option<Vec<Vec<F::Elem>>> {
    let k = m.len();
    let mut a: Vec<Vec<F::Elem>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { field.one() } else { field.zero() }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).find(|&r| !field.is_zero(&a[r][col]))?;
        a.swap(col, piv);
        let inv = field.inv(&a[col][col])?;
        for x in a[col].iter_mut() {
            *x = field.mul(x, &inv);
        }
        for r in 0..k {
            if r == col || field.is_zero(&a[r][col]) {
                continue;
            }
            let c = a[r][col].clone();
            for j in 0..2 * k {
                let t = field.mul(&c, &a[col][j]);
                a[r][j] = field.sub(&a[r][j], &t);
            }
        }
    }
    Some(a.into_iter().map(|r| r[k..].to_vec()).collect())
}

/// Invertible `F_B` with `F_B a^(b_j) = e_j` for the listed basis columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeOfBasis<F: Field> {
    field: F,
    basis: Vec<u32>,
    f: Vec<Vec<F::Elem>>,
}

impl<F: Field> ChangeOfBasis<F> {
    /// The basis columns are completed with standard vectors, then inverted.
    pub fn new(matrix: &Matrix<F>, basis: &[u32]) -> Result<Self> {
        let field = matrix.field().clone();
        let k = matrix.k();
        let mut ech = Echelon::new(field.clone(), k);
        let mut cols: Vec<Vec<F::Elem>> = Vec::with_capacity(k);
        for &b in basis {
            if b >= matrix.n() {
                return Err(Error::KeyOutOfRange { key: b, n: matrix.n() });
            }
            if !ech.insert(matrix.column(b)) {
                return Err(invalid("basis", format!("column {b} is dependent on earlier basis columns")));
            }
            cols.push(matrix.column(b).to_vec());
        }
        for i in 0..k {
            if ech.is_full() {
                break;
            }
            let e: Vec<F::Elem> = (0..k).map(|j| if i == j { field.one() } else { field.zero() }).collect();
            if ech.insert(&e) {
                cols.push(e);
            }
        }
        let p: Vec<Vec<F::Elem>> = (0..k).map(|j| cols.iter().map(|c| c[j].clone()).collect()).collect();
        let f = invert(&field, &p).ok_or_else(|| Error::Precision("completed basis matrix is singular".into()))?;
        Ok(Self {
            field,
            basis: basis.to_vec(),
            f,
        })
    }

    pub fn basis(&self) -> &[u32] {
        &self.basis
    }

    /// Rows of `F_B`.
    pub fn rows(&self) -> &[Vec<F::Elem>] {
        &self.f
    }

    pub fn apply(&self, v: &[F::Elem]) -> Vec<F::Elem> {
        let fld = &self.field;
        self.f
            .iter()
            .map(|row| row.iter().zip(v).fold(fld.zero(), |acc, (a, b)| fld.add(&acc, &fld.mul(a, b))))
            .collect()
    }

    /// Exact check of `F_B a^(b_j) = e_j` for every basis position.
    pub fn verify(&self, matrix: &Matrix<F>) -> bool {
        let fld = &self.field;
        self.basis.iter().enumerate().all(|(j, &b)| {
            self.apply(matrix.column(b))
                .iter()
                .enumerate()
                .all(|(i, x)| if i == j { *x == fld.one() } else { fld.is_zero(x) })
        })
    }

    pub fn rotate(&self, matrix: &Matrix<F>) -> Matrix<F> {
        let cols = matrix.columns().iter().map(|c| self.apply(c)).collect();
        Matrix {
            field: self.field.clone(),
            k: matrix.k(),
            cols,
        }
    }
}

fn max_abs_entry(m: &Matrix<Rationals>) -> BigRational {
    m.columns().iter().flatten().map(|a| a.abs()).max().unwrap_or_else(BigRational::zero)
}

/// Largest entry magnitude of `F_B A` over column bases `B`: every basis when
/// `n <= 12`, else the greedy bases of `samples` random column orders.
///
/// The result is a lower bound on the worst case; callers pick `gamma` at or
/// above it.
pub fn gamma0_estimate<R: Rng + ?Sized>(matrix: &Matrix<Rationals>, samples: usize, rng: &mut R) -> Result<BigRational> {
    let n = matrix.n();
    let rank = matrix.rank();
    if rank == 0 {
        return Ok(BigRational::zero());
    }
    let mut best = BigRational::zero();
    let mut consider = |basis: &[u32]| -> Result<()> {
        let cob = ChangeOfBasis::new(matrix, basis)?;
        let m = max_abs_entry(&cob.rotate(matrix));
        if m > best {
            best = m;
        }
        Ok(())
    };
    if n <= 12 {
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize != rank {
                continue;
            }
            let basis: Vec<u32> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if matrix.greedy_basis_of(basis.iter().copied()).len() == rank {
                consider(&basis)?;
            }
        }
    } else {
        let mut order: Vec<u32> = (0..n).collect();
        for _ in 0..samples.max(1) {
            order.shuffle(rng);
            let mut ech = Echelon::new(Rationals, matrix.k());
            let basis: Vec<u32> = order.iter().copied().filter(|&i| !ech.is_full() && ech.insert(matrix.column(i))).collect();
            consider(&basis)?;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngHandle;
    use proptest::{prop_assert_eq, proptest};

    fn fp_rows(p: u64, rows: &[&[u64]]) -> Matrix<Fp> {
        Matrix::from_rows(Fp::new(p).unwrap(), rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    #[test]
    fn hand_product_over_f5() {
        let m = fp_rows(5, &[&[1, 2, 3], &[4, 0, 1]]);
        let v = QueryVector::from_pairs(3, vec![(0, 1u64), (1, 1)]).unwrap();
        assert_eq!(m.sketch_vector(&v).unwrap(), vec![3, 4]);
        assert_eq!(m.sketch_vector(&QueryVector::zero(3)).unwrap(), vec![0, 0]);
        assert!(m.sketch_vector(&QueryVector::zero(4)).is_err());
    }

    #[test]
    fn fp_linearity() {
        let f = Fp::new(257).unwrap();
        let mut rng = RngHandle::new(50, 0).rng();
        let m = Matrix::random(f, 8, 64, &mut rng).unwrap();
        for _ in 0..1000 {
            let u: Vec<u64> = (0..64).map(|_| rng.random_range(0..257)).collect();
            let v: Vec<u64> = (0..64).map(|_| rng.random_range(0..257)).collect();
            let w: Vec<u64> = u.iter().zip(&v).map(|(a, b)| f.add(a, b)).collect();
            let su = m.sketch_vector(&QueryVector::dense(u)).unwrap();
            let sv = m.sketch_vector(&QueryVector::dense(v)).unwrap();
            let sw = m.sketch_vector(&QueryVector::dense(w)).unwrap();
            let sum: Vec<u64> = su.iter().zip(&sv).map(|(a, b)| f.add(a, b)).collect();
            assert_eq!(sw, sum);
        }
    }

    #[test]
    fn greedy_basis_small_cases() {
        let f = Fp::new(7).unwrap();
        let e = |i: usize| -> Vec<u64> { (0..3).map(|j| (i == j) as u64).collect() };
        assert_eq!(greedy_basis(&f, &[e(0), e(1), e(2)]), vec![0, 1, 2]);
        assert_eq!(greedy_basis(&f, &[e(0), e(0), e(1)]), vec![0, 2]);
        assert!(greedy_basis::<Fp>(&f, &[]).is_empty());
    }

    /// Lexicographically first index set among all bases, by enumeration.
    fn lex_first_basis(m: &Matrix<Fp>) -> Vec<u32> {
        let n = m.n();
        let rank = m.rank();
        let mut best: Option<Vec<u32>> = None;
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize != rank {
                continue;
            }
            let idx: Vec<u32> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let mut ech = Echelon::new(*m.field(), m.k());
            if idx.iter().all(|&i| ech.insert(m.column(i))) && best.as_ref().is_none_or(|b| idx < *b) {
                best = Some(idx);
            }
        }
        best.unwrap_or_default()
    }

    #[test]
    fn greedy_basis_matches_lexicographic_oracle() {
        let f = Fp::new(7).unwrap();
        let mut rng = RngHandle::new(51, 0).rng();
        for trial in 0..100 {
            let n = 6 + trial % 5;
            // sparse entries so that dependencies actually occur
            let cols = (0..n)
                .map(|_| (0..4).map(|_| if rng.random_bool(0.4) { rng.random_range(1..7) } else { 0 }).collect())
                .collect();
            let m = Matrix::from_cols(f, 4, cols).unwrap();
            let greedy: Vec<u32> = greedy_basis(&f, m.columns()).into_iter().map(|i| i as u32).collect();
            assert_eq!(greedy, lex_first_basis(&m));
        }
    }

    #[test]
    fn change_of_basis_maps_to_unit_vectors() {
        let f = Fp::new(257).unwrap();
        let mut rng = RngHandle::new(52, 0).rng();
        let m = Matrix::random(f, 8, 40, &mut rng).unwrap();
        for _ in 0..20 {
            let keys: Vec<u32> = rand::seq::index::sample(&mut rng, 40, 5).into_iter().map(|i| i as u32).collect();
            let basis = m.greedy_basis_of(keys);
            let cob = ChangeOfBasis::new(&m, &basis).unwrap();
            assert!(cob.verify(&m));
        }
        let dup = fp_rows(5, &[&[1, 1], &[0, 0]]);
        assert!(ChangeOfBasis::new(&dup, &[0, 1]).is_err());
    }

    #[test]
    fn rational_change_of_basis() {
        let m = Matrix::from_integers(&[vec![1, 2, 3], vec![0, 1, 1]]).unwrap();
        let cob = ChangeOfBasis::new(&m, &[1, 2]).unwrap();
        assert!(cob.verify(&m));
        let rotated = cob.rotate(&m);
        // (1,0) = -(2,1) + (3,1)
        assert_eq!(rotated.column(0), &[q(-1, 1), q(1, 1)]);
    }

    /// Coordinates of every column in a 2-column basis by Cramer's rule.
    fn gamma_oracle_2x(m: &[[i64; 2]]) -> BigRational {
        let mut best = BigRational::zero();
        for a in 0..m.len() {
            for b in a + 1..m.len() {
                let det = m[a][0] * m[b][1] - m[a][1] * m[b][0];
                if det == 0 {
                    continue;
                }
                for c in m {
                    let x = q(c[0] * m[b][1] - c[1] * m[b][0], det).abs();
                    let y = q(m[a][0] * c[1] - m[a][1] * c[0], det).abs();
                    best = best.max(x).max(y);
                }
            }
        }
        best
    }

    #[test]
    fn gamma0_small_cases() {
        let mut rng = RngHandle::new(53, 0).rng();
        let id = Matrix::from_integers(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(gamma0_estimate(&id, 1, &mut rng).unwrap(), q(1, 1));
        let a = Matrix::from_integers(&[vec![1, 2], vec![0, 1]]).unwrap();
        assert_eq!(gamma0_estimate(&a, 1, &mut rng).unwrap(), q(1, 1));
        let cols = [[1, 0], [2, 1], [3, 1], [1, 5]];
        let m = Matrix::from_integers(&[cols.iter().map(|c| c[0]).collect(), cols.iter().map(|c| c[1]).collect()]).unwrap();
        let g = gamma0_estimate(&m, 1, &mut rng).unwrap();
        assert_eq!(g, gamma_oracle_2x(&cols));
        let scaled = m.scaled(&q(10, 1));
        assert_eq!(gamma0_estimate(&scaled, 1, &mut rng).unwrap(), g);
    }

    #[test]
    fn text_roundtrip() {
        let m = fp_rows(5, &[&[1, 2, 3], &[4, 0, 1]]);
        let text = m.to_text();
        assert!(text.starts_with("5 2 3\n"));
        assert_eq!(parse_matrix(&text).unwrap(), AnyMatrix::Fp(m));
        let r = Matrix::from_rows(Rationals, vec![vec![q(1, 2), q(-3, 1)]]).unwrap();
        let text = r.to_text();
        assert_eq!(text, "0 1 2\n1/2 -3\n");
        assert_eq!(parse_matrix(&text).unwrap(), AnyMatrix::Real(r));
        assert!(parse_matrix("5 2 3\n1 2 3\n4 0").is_err());
        assert!(parse_matrix("4 1 1\n1").is_err());
    }

    proptest! {
        #[test]
        fn greedy_basis_ignores_trailing_dependents(seed in 0u64..500, extra in 1usize..5) {
            let f = Fp::new(5).unwrap();
            let mut rng = RngHandle::new(seed, 0).rng();
            let mut cols: Vec<Vec<u64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(0..5)).collect()).collect();
            let before = greedy_basis(&f, &cols);
            for _ in 0..extra {
                let a = rng.random_range(0..5);
                let b = rng.random_range(0..5);
                let x = &cols[rng.random_range(0..6)];
                let y = &cols[rng.random_range(0..6)];
                let combo = x.iter().zip(y).map(|(u, v)| f.add(&f.mul(&a, u), &f.mul(&b, v))).collect();
                cols.push(combo);
            }
            prop_assert_eq!(greedy_basis(&f, &cols), before);
        }
    }
}
