//! Small numeric helpers shared by responders and certifiers.

use statrs::function::erf::erfc;

/// Standard normal upper tail `P[Z > z]`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Element at index `floor((m - 1) / 2)` of the sorted values.
pub fn lower_median(values: &[u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let idx = (v.len() - 1) / 2;
    Some(*v.select_nth_unstable(idx).1)
}

/// Running mean and standard error of a stream of observations.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAcc {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Median of a float sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Maximum-likelihood set size `m` in `[0, cap]` given which rows are lit,
/// where row `j` stays dark with probability `miss[j]^m`.
///
/// The log-likelihood is concave in `m`, so the root of its derivative is
/// found by bisection.
pub fn occupancy_mle(miss: &[f64], lit: &[bool], cap: f64) -> f64 {
    let slope = |m: f64| -> f64 {
        miss.iter()
            .zip(lit)
            .filter(|(a, _)| **a < 1.0)
            .map(|(&a, &on)| {
                let la = a.ln();
                if on {
                    let am = a.powf(m);
                    if am >= 1.0 {
                        f64::INFINITY
                    } else {
                        -la * am / (1.0 - am)
                    }
                } else {
                    la
                }
            })
            .sum()
    };
    if !lit.iter().zip(miss).any(|(&on, &a)| on && a < 1.0) {
        return 0.0;
    }
    if slope(cap) >= 0.0 {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Binomial standard deviation of an empirical rate at `p` over `trials`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
