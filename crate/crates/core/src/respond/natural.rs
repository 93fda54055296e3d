use num_traits::{One, Zero};

use crate::error::{invalid, Result};
use crate::linear::{Matrix, Rationals};
use crate::system::{BasisStatistic, FpView, QueryResponder, RealView};

/// Maps a view to the statistic a natural responder is restricted to.
pub trait StatisticExtractor<V: ?Sized> {
    type Stat;

    fn extract(&self, view: &V) -> Self::Stat;
}

/// Passes the view through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<V: Clone> StatisticExtractor<V> for Identity {
    type Stat = V;

    fn extract(&self, view: &V) -> V {
        view.clone()
    }
}

/// The greedy-basis statistic of an `F_p` view.
#[derive(Debug, Clone, Copy, Default)]
pub struct BasisExtractor;

impl StatisticExtractor<FpView> for BasisExtractor {
    type Stat = BasisStatistic;

    fn extract(&self, view: &FpView) -> BasisStatistic {
        view.basis
    }
}

/// Small-key counts recovered from real measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SmallKeyStat {
    /// Support keys of the rows with `|y_j| ≤ nγ`.
    pub clean: u32,
    /// Sum of those measurements: the unit-valued keys present in them.
    pub small: u32,
    pub mask_len: u32,
}

/// Extractor for 0/1 matrices with pairwise disjoint row supports: a row whose
/// measurement is at most `nγ` holds only unit values, so it counts the
/// present small keys in its support.
#[derive(Debug, Clone)]
pub struct SmallKeyExtractor {
    row_support: Vec<u32>,
    bound: i128,
}

impl SmallKeyExtractor {
    pub fn new(matrix: &Matrix<Rationals>, n_gamma: f64) -> Result<Self> {
        let k = matrix.k();
        let mut row_support = vec![0u32; k];
        for key in 0..matrix.n() {
            let mut nonzero = 0;
            for (j, a) in matrix.column(key).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                if !a.is_one() {
                    return Err(invalid("matrix", format!("entry ({j}, {key}) is not 0 or 1")));
                }
                row_support[j] += 1;
                nonzero += 1;
            }
            if nonzero > 1 {
                return Err(invalid("matrix", format!("column {key} lies in {nonzero} rows")));
            }
        }
        if !(n_gamma.is_finite() && (1.0..1e18).contains(&n_gamma)) {
            return Err(invalid("n_gamma", format!("unsupported clean bound {n_gamma}")));
        }
        Ok(Self {
            row_support,
            bound: (n_gamma as i128) << 64,
        })
    }

    pub fn row_support(&self) -> &[u32] {
        &self.row_support
    }
}

impl StatisticExtractor<RealView> for SmallKeyExtractor {
    type Stat = SmallKeyStat;

    fn extract(&self, view: &RealView) -> SmallKeyStat {
        let (mut clean, mut small) = (0u32, 0u32);
        for (y, &w) in view.scaled.iter().zip(&self.row_support) {
            if w > 0 && y.abs() <= self.bound {
                clean += w;
                small += (y >> 64) as u32;
            }
        }
        SmallKeyStat {
            clean,
            small: small.min(clean),
            mask_len: view.mask_len,
        }
    }
}

/// A responder that only ever sees `extractor(view)`.
#[derive(Debug, Clone)]
pub struct NaturalResponder<X, R> {
    extractor: X,
    base: R,
}

pub fn wrap_natural<X, R>(base: R, extractor: X) -> NaturalResponder<X, R> {
    NaturalResponder { extractor, base }
}

impl<X, R> NaturalResponder<X, R> {
    pub fn extractor(&self) -> &X {
        &self.extractor
    }

    pub fn base(&self) -> &R {
        &self.base
    }
}

impl<V: ?Sized, X: StatisticExtractor<V>, R: QueryResponder<X::Stat>> QueryResponder<V> for NaturalResponder<X, R> {
    fn respond(&mut self, view: &V, round: u64) -> Result<bool> {
        let stat = self.extractor.extract(view);
        self.base.respond(&stat, round)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::RealAuxParams;
    use crate::model::{KeySet, RngHandle};
    use crate::system::{Query, RealSmallSystem, SketchingSystem};

    fn level_matrix() -> Matrix<Rationals> {
        // rows of support 1, 2, 4 over 8 keys; key 7 is a zero column
        let mut rows = vec![vec![0i64; 8]; 3];
        let mut next = 0;
        for (j, row) in rows.iter_mut().enumerate() {
            for _ in 0..1 << j {
                row[next] = 1;
                next += 1;
            }
        }
        Matrix::from_integers(&rows).unwrap()
    }

    #[test]
    fn rejects_overlapping_or_weighted_rows() {
        let m = Matrix::from_integers(&[vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
        assert!(SmallKeyExtractor::new(&m, 3.0).is_err());
        let m = Matrix::from_integers(&[vec![2, 0, 0]]).unwrap();
        assert!(SmallKeyExtractor::new(&m, 3.0).is_err());
    }

    #[test]
    fn extracts_small_counts_from_clean_rows() {
        let m = level_matrix();
        let x = SmallKeyExtractor::new(&m, 8.0).unwrap();
        assert_eq!(x.row_support(), &[1, 2, 4]);
        let one = 1i128 << 64;
        let view = RealView {
            scaled: vec![one, 40_000_000 * one, 3 * one],
            mask_len: 2,
        };
        assert_eq!(x.extract(&view), SmallKeyStat { clean: 5, small: 4, mask_len: 2 });
    }

    #[test]
    fn statistic_is_the_only_input() {
        let m = level_matrix();
        let x = SmallKeyExtractor::new(&m, 8.0).unwrap();
        let mut seen = Vec::new();
        struct Record<'a>(&'a mut Vec<SmallKeyStat>);
        impl QueryResponder<SmallKeyStat> for Record<'_> {
            fn respond(&mut self, s: &SmallKeyStat, _: u64) -> Result<bool> {
                self.0.push(*s);
                Ok(s.small.is_multiple_of(2))
            }
        }
        let mut r = wrap_natural(Record(&mut seen), x);
        let one = 1i128 << 64;
        // differ only inside a dirty row: same statistic, same answer
        let a = RealView { scaled: vec![one, 50 * one, 2 * one], mask_len: 0 };
        let b = RealView { scaled: vec![one, 77 * one, 2 * one], mask_len: 0 };
        assert_eq!(r.respond(&a, 0).unwrap(), r.respond(&b, 1).unwrap());
        drop(r);
        assert_eq!(seen[0], seen[1]);
    }

    #[test]
    fn count_matches_unmasked_small_keys() {
        let m = level_matrix();
        let params = RealAuxParams::small(8, 1.0, 3, 0.01, 8.0, 0.1).unwrap();
        let x = SmallKeyExtractor::new(&m, 8.0).unwrap();
        let mut sys = RealSmallSystem::new(m, params).unwrap();
        let mut rng = RngHandle::new(93, 0).rng();
        let mask = KeySet::empty(8);
        let u = KeySet::from_keys(8, [0, 1, 3, 4, 7]).unwrap();
        let obs = sys.observe(&Query { fresh: &u, mask: &mask, full: &u, q: 0.9 }, &mut rng).unwrap();
        let stat = x.extract(&obs.view);
        // all clean rows must agree with their support counts
        assert!(stat.small <= stat.clean);
        let identity = Identity.extract(&obs.view);
        assert_eq!(identity, obs.view);
    }
}
