//! Auxiliary value distributions for query vectors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rand::{Rng, RngCore};

use super::field::{Fp, Rationals};
use super::matrix::Matrix;
use super::vector::QueryVector;
use crate::error::{invalid, Error, Result};
use crate::model::{thin, KeySet};

/// Default constant `C` in the choice of `β`.
pub const DEFAULT_BETA_CONSTANT: f64 = 8.0;
/// Default slack `c` in the shifted thresholds.
pub const DEFAULT_SHIFT_C: f64 = 0.01;

const MANTISSA_BITS: u32 = 64;

fn merged_support(mask: &KeySet, rest: &KeySet) -> Result<Vec<u32>> {
    if mask.universe() != rest.universe() {
        return Err(Error::UniverseMismatch {
            expected: mask.universe(),
            got: rest.universe(),
        });
    }
    if !mask.is_disjoint(rest) {
        return Err(invalid("U∖M", "must be disjoint from the mask"));
    }
    Ok(mask.union(rest).to_vec())
}

/// Uniform `F_p` values on `M ∪ (U∖M)`, zero elsewhere; sampled zeros are kept.
pub fn aux_fp<R: Rng + ?Sized>(mask: &KeySet, u_minus_m: &KeySet, field: Fp, rng: &mut R) -> Result<QueryVector<u64>> {
    let keys = merged_support(mask, u_minus_m)?;
    let values = keys.iter().map(|_| rng.random_range(0..field.p())).collect();
    Ok(QueryVector::from_sorted(mask.universe(), keys, values))
}

/// `A' = round(p/(p-1) A - c n)`, `B' = round(p/(p-1) B + c n)`.
pub fn shifted_thresholds_fp(a: u32, b: u32, p: u64, n: u32, c: f64) -> Result<(i64, i64)> {
    let p = p as f64;
    let n_f = n as f64;
    if b as f64 / n_f >= (p - 1.0) / p {
        return Err(invalid("B", format!("B/n = {} must be below (p-1)/p = {}", b as f64 / n_f, (p - 1.0) / p)));
    }
    let scale = p / (p - 1.0);
    let lower = (scale * a as f64 - c * n_f).round() as i64;
    let upper = (scale * b as f64 + c * n_f).round() as i64;
    if lower >= upper {
        return Err(Error::ThresholdsCollapsed { lower, upper });
    }
    if lower < 1 || upper > n as i64 {
        return Err(invalid("c", format!("shifted thresholds ({lower}, {upper}) leave the range 1..={n}")));
    }
    Ok((lower, upper))
}

/// A positive real `num · 2^-64 · β^pow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BetaScaled {
    pub num: u128,
    pub pow: i32,
}

impl BetaScaled {
    pub const ONE: Self = Self {
        num: 1 << MANTISSA_BITS,
        pow: 0,
    };

    pub fn ln(&self, ln_beta: f64) -> f64 {
        (self.num as f64).ln() - MANTISSA_BITS as f64 * std::f64::consts::LN_2 + self.pow as f64 * ln_beta
    }

    pub fn to_rational(&self, beta: u64) -> BigRational {
        let base = BigInt::from(beta);
        let num = BigInt::from(self.num);
        let den = BigInt::one() << MANTISSA_BITS;
        if self.pow >= 0 {
            BigRational::new(num * Pow::pow(&base, self.pow as u32), den)
        } else {
            BigRational::new(num, den * Pow::pow(&base, self.pow.unsigned_abs()))
        }
    }
}

/// `Exp(1)` by inversion, with the draw quantized to a multiple of `2^-64`.
pub fn exp_mantissa<R: RngCore + ?Sized>(rng: &mut R) -> u128 {
    let u = (rng.next_u64() as f64 + 0.5) * (-(MANTISSA_BITS as f64)).exp2();
    let e = -u.ln();
    ((e * (MANTISSA_BITS as f64).exp2()).round() as u128).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealAuxMode {
    /// `v_i ~ Exp(β^-i)` on the whole support.
    LargeMagnitude,
    /// `Exp(β)` on large keys and the mask, `1` on the other keys.
    SmallMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealAuxParams {
    pub mode: RealAuxMode,
    pub beta: u64,
    pub q0: f64,
}

fn beta_from(value: f64, c: f64) -> Result<u64> {
    if c < DEFAULT_BETA_CONSTANT {
        return Err(invalid("C", format!("constant must be at least {DEFAULT_BETA_CONSTANT}, got {c}")));
    }
    if !(value.is_finite() && value >= 2.0 && value < (1u64 << 62) as f64) {
        return Err(Error::Precision(format!("beta = {value} outside the supported range")));
    }
    Ok(value.ceil() as u64)
}

impl RealAuxParams {
    /// `β = ceil(C γ n ln(n/δ) k / δ)`.
    pub fn large(n: u32, gamma: f64, k: usize, delta: f64, c: f64) -> Result<Self> {
        let n = n as f64;
        let beta = beta_from(c * gamma * n * (n / delta).ln() * k as f64 / delta, c)?;
        Ok(Self {
            mode: RealAuxMode::LargeMagnitude,
            beta,
            q0: 0.0,
        })
    }

    /// `β = ceil(C n γ k / δ)` and `q0 = qmin / 2`.
    pub fn small(n: u32, gamma: f64, k: usize, delta: f64, c: f64, qmin: f64) -> Result<Self> {
        let beta = beta_from(c * n as f64 * gamma * k as f64 / delta, c)?;
        Ok(Self {
            mode: RealAuxMode::SmallMagnitude,
            beta,
            q0: qmin / 2.0,
        })
    }

    pub fn ln_beta(&self) -> f64 {
        (self.beta as f64).ln()
    }
}

/// Index-dependent exponentials: key `i` (0-based) gets `Exp` with mean `β^-(i+1)`.
pub fn aux_real_large<R: RngCore + ?Sized>(
    mask: &KeySet,
    u_minus_m: &KeySet,
    params: &RealAuxParams,
    rng: &mut R,
) -> Result<QueryVector<BetaScaled>> {
    if params.mode != RealAuxMode::LargeMagnitude {
        return Err(invalid("mode", "large-magnitude values need large-magnitude parameters"));
    }
    let keys = merged_support(mask, u_minus_m)?;
    let values = keys
        .iter()
        .map(|&k| BetaScaled {
            num: exp_mantissa(rng),
            pow: -(k as i32 + 1),
        })
        .collect();
    Ok(QueryVector::from_sorted(mask.universe(), keys, values))
}

/// Values for `U ∪ M` together with the large keys `H`.
///
/// `H` thins `U` at rate `q0/q`, so marginally `H ~ Bern[q0]`.
pub fn aux_real_small<R: Rng + ?Sized>(
    mask: &KeySet,
    u: &KeySet,
    q: f64,
    params: &RealAuxParams,
    rng: &mut R,
) -> Result<(QueryVector<BetaScaled>, KeySet)> {
    if params.mode != RealAuxMode::SmallMagnitude {
        return Err(invalid("mode", "small-magnitude values need small-magnitude parameters"));
    }
    if q < params.q0 {
        return Err(Error::RateBelowSubsample { q, q0: params.q0 });
    }
    if mask.universe() != u.universe() {
        return Err(Error::UniverseMismatch {
            expected: mask.universe(),
            got: u.universe(),
        });
    }
    let h = thin(u, params.q0 / q, rng);
    let large = h.union(mask);
    let support = u.union(mask);
    let mut keys = Vec::with_capacity(support.len());
    let mut values = Vec::with_capacity(support.len());
    for key in support.iter() {
        keys.push(key);
        values.push(if large.contains(key) {
            BetaScaled {
                num: exp_mantissa(rng),
                pow: 1,
            }
        } else {
            BetaScaled::ONE
        });
    }
    Ok((QueryVector::from_sorted(mask.universe(), keys, values), h))
}

/// `ln(max |v_i| / min |v_i|)` over the stored entries.
pub fn log_magnitude_ratio(v: &QueryVector<BetaScaled>, beta: u64) -> Option<f64> {
    let ln_beta = (beta as f64).ln();
    let logs = v.values().iter().map(|x| x.ln(ln_beta));
    let (lo, hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    (!v.is_empty()).then_some(hi - lo)
}

/// Exact `A v` for exponent-separated values, one Horner pass per row in `β`.
pub fn sketch_scaled_exact(matrix: &Matrix<Rationals>, v: &QueryVector<BetaScaled>, beta: u64) -> Result<Vec<BigRational>> {
    if v.n() != matrix.n() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n() as usize,
            got: v.n() as usize,
        });
    }
    if v.is_empty() {
        return Ok(vec![BigRational::zero(); matrix.k()]);
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(v.values()[i].pow));
    let pmax = v.values()[order[0]].pow;
    let pmin = v.values()[*order.last().unwrap()].pow;
    let base = BigInt::from(beta);
    let mut out = Vec::with_capacity(matrix.k());
    for row in 0..matrix.k() {
        let den = v
            .keys()
            .iter()
            .map(|&k| matrix.entry(row, k).denom().clone())
            .fold(BigInt::one(), |acc, d| num_integer::Integer::lcm(&acc, &d));
        let mut acc = BigInt::zero();
        let mut idx = 0;
        for p in (pmin..=pmax).rev() {
            acc *= &base;
            while idx < order.len() && v.values()[order[idx]].pow == p {
                let i = order[idx];
                let a = matrix.entry(row, v.keys()[i]);
                let coef = a.numer() * (&den / a.denom());
                acc += coef * BigInt::from(v.values()[i].num);
                idx += 1;
            }
        }
        let mut numer = acc;
        let mut denom = den << MANTISSA_BITS;
        if pmin >= 0 {
            numer *= Pow::pow(&base, pmin as u32);
        } else {
            denom *= Pow::pow(&base, pmin.unsigned_abs());
        }
        out.push(BigRational::new(numer, denom));
    }
    Ok(out)
}

/// Machine-integer sketching for integer matrices and values with `β`-power
/// 0 or 1; measurements are returned scaled by `2^64`.
#[derive(Debug, Clone)]
pub struct IntegerSketcher {
    k: usize,
    cols: Vec<Vec<i64>>,
}

impl IntegerSketcher {
    pub fn new(matrix: &Matrix<Rationals>) -> Result<Self> {
        let cols = matrix
            .integer_cols()
            .ok_or_else(|| invalid("matrix", "integer sketching needs integer entries"))?;
        Ok(Self { k: matrix.k(), cols })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn column(&self, key: u32) -> &[i64] {
        &self.cols[key as usize]
    }

    /// `2^64 · A v`, or `None` on overflow or an unsupported power.
    pub fn sketch(&self, v: &QueryVector<BetaScaled>, beta: u64) -> Option<Vec<i128>> {
        let mut out = vec![0i128; self.k];
        for (key, x) in v.iter() {
            let scaled: i128 = match x.pow {
                0 => i128::try_from(x.num).ok()?,
                1 => i128::try_from(x.num).ok()?.checked_mul(beta as i128)?,
                _ => return None,
            };
            for (slot, &a) in out.iter_mut().zip(&self.cols[key as usize]) {
                if a != 0 {
                    *slot = slot.checked_add(scaled.checked_mul(a as i128)?)?;
                }
            }
        }
        Some(out)
    }
}
