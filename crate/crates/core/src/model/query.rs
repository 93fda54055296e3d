use rand::{Rng, RngCore};

use super::keys::KeySet;
use super::rates::RateDistribution;
use crate::error::{invalid, Result};

/// Soft threshold pair `0 < A < B < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThresholdPair {
    a: u32,
    b: u32,
    n: u32,
}

/// Where a cardinality falls relative to a [`ThresholdPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    Gap,
    High,
}

impl ThresholdPair {
    pub fn new(a: u32, b: u32, n: u32) -> Result<Self> {
        if !(0 < a && a < b && b < n) {
            return Err(invalid("thresholds", format!("need 0 < A < B < n, got A={a} B={b} n={n}")));
        }
        Ok(Self { a, b, n })
    }

    /// Thresholds given as fractions of `n`, rounded to the nearest integer.
    pub fn from_ratios(a: f64, b: f64, n: u32) -> Result<Self> {
        Self::new((a * n as f64).round() as u32, (b * n as f64).round() as u32, n)
    }

    pub fn lower(&self) -> u32 {
        self.a
    }

    pub fn upper(&self) -> u32 {
        self.b
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn ratio_a(&self) -> f64 {
        self.a as f64 / self.n as f64
    }

    pub fn ratio_b(&self) -> f64 {
        self.b as f64 / self.n as f64
    }

    /// `sqrt(A B)`, the cut used by the standard estimators.
    pub fn geometric_mid(&self) -> f64 {
        (self.a as f64 * self.b as f64).sqrt()
    }

    pub fn side(&self, size: u64) -> Side {
        if size <= self.a as u64 {
            Side::Low
        } else if size >= self.b as u64 {
            Side::High
        } else {
            Side::Gap
        }
    }

    /// A response is wrong iff it says 1 at or below `A` or 0 at or above `B`.
    pub fn is_error(&self, size: u64, z: bool) -> bool {
        match self.side(size) {
            Side::Low => z,
            Side::High => !z,
            Side::Gap => false,
        }
    }
}

/// Bits of precision used for the inclusion probability.
const Q_BITS: u32 = 32;

/// Includes each key of `0..n` independently with probability `q`.
///
/// `q` is rounded to a multiple of `2^-32`; each 64-key word is then built
/// from one random word per remaining binary digit of `q`.
pub fn sample_bernoulli_subset<R: RngCore + ?Sized>(n: u32, q: f64, rng: &mut R) -> KeySet {
    let mut out = KeySet::empty(n);
    fill_bernoulli(&mut out, q, rng);
    out
}

/// In-place variant of [`sample_bernoulli_subset`] that reuses `out`'s storage.
pub fn fill_bernoulli<R: RngCore + ?Sized>(out: &mut KeySet, q: f64, rng: &mut R) {
    let scale = (1u64 << Q_BITS) as f64;
    let fixed = (q.clamp(0.0, 1.0) * scale).round() as u64;
    let n = out.universe();
    if fixed == 0 {
        out.clear();
        return;
    }
    if fixed >= 1u64 << Q_BITS {
        *out = KeySet::full(n);
        return;
    }
    let low = fixed.trailing_zeros();
    let words = out.words_mut();
    for w in words.iter_mut() {
        let mut acc = 0u64;
        for bit in low..Q_BITS {
            let r = rng.next_u64();
            acc = if fixed >> bit & 1 == 1 { acc | r } else { acc & r };
        }
        *w = acc;
    }
    let rem = n % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// Thins `set`, keeping each member independently with probability `keep`.
pub fn thin<R: RngCore + ?Sized>(set: &KeySet, keep: f64, rng: &mut R) -> KeySet {
    let mut mask = sample_bernoulli_subset(set.universe(), keep, rng);
    mask.intersect_with(set);
    mask
}

/// Draws `q ~ nu` and then `U ~ Bern[q]` over `0..n`.
pub fn sample_query<R: Rng + ?Sized>(dist: &RateDistribution, n: u32, rng: &mut R) -> (f64, KeySet) {
    let q = dist.sample(rng);
    (q, sample_bernoulli_subset(n, q, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateBreakpoints, RngHandle};

    #[test]
    fn threshold_pair_rules() {
        assert!(ThresholdPair::new(0, 5, 10).is_err());
        assert!(ThresholdPair::new(5, 5, 10).is_err());
        assert!(ThresholdPair::new(3, 10, 10).is_err());
        let t = ThresholdPair::new(300, 500, 1000).unwrap();
        assert!(t.is_error(300, true));
        assert!(!t.is_error(300, false));
        assert!(!t.is_error(301, true));
        assert!(!t.is_error(499, false));
        assert!(t.is_error(500, false));
        assert!(!t.is_error(500, true));
        assert!((t.geometric_mid() - 387.298_334_620_741_7).abs() < 1e-9);
        assert_eq!(ThresholdPair::from_ratios(0.3, 0.5, 2048).unwrap().lower(), 614);
    }

    #[test]
    fn zero_rate_is_empty_and_one_is_full() {
        let mut rng = RngHandle::new(0, 0).rng();
        assert!(sample_bernoulli_subset(100, 0.0, &mut rng).is_empty());
        assert_eq!(sample_bernoulli_subset(100, 1.0, &mut rng).len(), 100);
    }

    #[test]
    fn deterministic_given_handle() {
        let h = RngHandle::new(5, 9);
        let a = sample_bernoulli_subset(1000, 0.37, &mut h.rng());
        let b = sample_bernoulli_subset(1000, 0.37, &mut h.rng());
        assert_eq!(a, b);
    }

    #[test]
    fn size_within_four_sigma() {
        let n = 100_000u32;
        let q = 0.3;
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        let mut rng = RngHandle::new(2, 0).rng();
        let draws = 10_000;
        let outside = (0..draws)
            .filter(|_| {
                let s = sample_bernoulli_subset(n, q, &mut rng).len() as f64;
                (s - q * n as f64).abs() > 4.0 * sd
            })
            .count();
        // at most 1 in 10^4 draws may leave the band
        assert!(outside <= 1, "{outside} draws outside 4 sigma");
    }

    #[test]
    fn per_key_rate_unbiased() {
        let mut rng = RngHandle::new(3, 0).rng();
        let n = 640u32;
        let q = 0.123_456;
        let draws = 5_000;
        let mut hits = vec![0u32; n as usize];
        for _ in 0..draws {
            for k in sample_bernoulli_subset(n, q, &mut rng).iter() {
                hits[k as usize] += 1;
            }
        }
        let total: u32 = hits.iter().sum();
        let m = (n * draws) as f64;
        let se = (q * (1.0 - q) / m).sqrt();
        assert!((total as f64 / m - q).abs() < 4.0 * se);
    }

    #[test]
    fn thinning_rate() {
        let mut rng = RngHandle::new(4, 0).rng();
        let base = KeySet::full(10_000);
        let kept = thin(&base, 0.25, &mut rng).len() as f64;
        assert!((kept - 2500.0).abs() < 4.0 * (10_000.0f64 * 0.25 * 0.75).sqrt());
    }

    fn default_dist() -> RateDistribution {
        RateDistribution::new(RateBreakpoints::new(0.1, 0.2, 0.55, 0.7)).unwrap()
    }

    #[test]
    fn query_marginal_inclusion() {
        let d = default_dist();
        let mut rng = RngHandle::new(6, 0).rng();
        let m = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..m {
            let (q, u) = sample_query(&d, 64, &mut rng);
            assert!((d.qmin()..=d.qmax()).contains(&q));
            hits += u.contains(17) as u64;
        }
        let p = d.mean();
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((hits as f64 / m as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn pairwise_independent_given_rate() {
        let mut rng = RngHandle::new(8, 0).rng();
        for &q in &[0.15, 0.4, 0.65] {
            let draws = 20_000;
            let mut table = [[0f64; 2]; 2];
            for _ in 0..draws {
                let u = sample_bernoulli_subset(128, q, &mut rng);
                table[u.contains(3) as usize][u.contains(90) as usize] += 1.0;
            }
            let total = draws as f64;
            let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
            let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
            let mut chi2 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let e = rows[i] * cols[j] / total;
                    chi2 += (table[i][j] - e).powi(2) / e;
                }
            }
            // chi-square(1) critical value at alpha = 0.001
            assert!(chi2 < 10.828, "q={q} chi2={chi2}");
        }
    }
}
