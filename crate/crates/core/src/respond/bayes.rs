use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::model::{RateDistribution, ThresholdPair};
use crate::stats::normal_cdf;
use crate::system::{BasisStatistic, PoolView, QueryResponder};

use super::natural::SmallKeyStat;

/// Knots of the discretized rate prior.
pub const POSTERIOR_KNOTS: usize = 1 << 10;

/// Posterior over the rate `q` on a fixed grid, and the induced probabilities
/// that the task size lands at or below `A` or at or above `B`.
///
/// Given `q` and `|M| = m` the task size is `Bin(m + Bin(n - m, q), θ)`; its
/// tails are taken from the normal approximation with continuity correction.
#[derive(Debug, Clone)]
pub struct RatePosterior {
    knots: Vec<f64>,
    log_prior: Vec<f64>,
    thresholds: ThresholdPair,
    thinning: f64,
    tails: HashMap<u32, Vec<(f64, f64)>>,
    scratch: Vec<f64>,
}

impl RatePosterior {
    pub fn new(dist: &RateDistribution, thresholds: ThresholdPair, thinning: f64) -> Result<Self> {
        if !(thinning > 0.0 && thinning <= 1.0) {
            return Err(invalid("thinning", format!("need 0 < θ <= 1, got {thinning}")));
        }
        let cells = dist.discretize(POSTERIOR_KNOTS);
        Ok(Self {
            knots: cells.iter().map(|c| c.0).collect(),
            log_prior: cells.iter().map(|c| if c.1 > 0.0 { c.1.ln() } else { f64::NEG_INFINITY }).collect(),
            thresholds,
            thinning,
            tails: HashMap::new(),
            scratch: vec![0.0; cells.len()],
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn thresholds(&self) -> &ThresholdPair {
        &self.thresholds
    }

    fn tails(&mut self, mask_len: u32) -> &[(f64, f64)] {
        let (n, theta, t) = (self.thresholds.n() as f64, self.thinning, self.thresholds);
        let knots = &self.knots;
        self.tails.entry(mask_len).or_insert_with(|| {
            let m = mask_len as f64;
            knots
                .iter()
                .map(|&q| {
                    let mean_s = m + (n - m) * q;
                    let var_s = (n - m) * q * (1.0 - q);
                    let mu = theta * mean_s;
                    let sd = (theta * (1.0 - theta) * mean_s + theta * theta * var_s).sqrt();
                    let (a, b) = (t.lower() as f64, t.upper() as f64);
                    if sd == 0.0 {
                        ((mu <= a) as u8 as f64, (mu >= b) as u8 as f64)
                    } else {
                        (normal_cdf((a + 0.5 - mu) / sd), 1.0 - normal_cdf((b - 0.5 - mu) / sd))
                    }
                })
                .collect()
        })
    }

    /// `(P[size ≤ A], P[size ≥ B])` under the posterior with the given
    /// log-likelihood in `q`.
    pub fn sides(&mut self, mask_len: u32, loglik: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut top = f64::NEG_INFINITY;
        for (i, &q) in self.knots.iter().enumerate() {
            let v = self.log_prior[i] + loglik(q);
            self.scratch[i] = v;
            top = top.max(v);
        }
        if !top.is_finite() {
            return (0.0, 0.0);
        }
        let weights: Vec<f64> = self.scratch.iter().map(|&v| (v - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let tails = self.tails(mask_len);
        let (lo, hi) = weights
            .iter()
            .zip(tails)
            .fold((0.0, 0.0), |(lo, hi), (w, t)| (lo + w * t.0, hi + w * t.1));
        (lo / total, hi / total)
    }

    /// 1 iff the posterior puts more mass at or above `B` than at or below `A`.
    pub fn decide(&mut self, mask_len: u32, loglik: impl Fn(f64) -> f64) -> bool {
        let (lo, hi) = self.sides(mask_len, loglik);
        hi > lo
    }
}

fn binomial_loglik(successes: u32, failures: u32) -> impl Fn(f64) -> f64 {
    move |p: f64| successes as f64 * p.ln() + failures as f64 * (1.0 - p).ln()
}

/// Omniscient responder: sees `|W|` for `W = U ∩ (L ∖ M)` with the true pool
/// and mask, and answers with the posterior majority.
#[derive(Debug, Clone)]
pub struct PoolBayesResponder {
    posterior: RatePosterior,
    memo: HashMap<PoolView, bool>,
}

impl PoolBayesResponder {
    pub fn new(dist: &RateDistribution, thresholds: ThresholdPair) -> Result<Self> {
        Ok(Self {
            posterior: RatePosterior::new(dist, thresholds, 1.0)?,
            memo: HashMap::new(),
        })
    }
}

impl QueryResponder<PoolView> for PoolBayesResponder {
    fn respond(&mut self, view: &PoolView, _round: u64) -> Result<bool> {
        if view.hits > view.free {
            return Err(invalid("view", format!("{} hits in a pool of {}", view.hits, view.free)));
        }
        if let Some(&z) = self.memo.get(view) {
            return Ok(z);
        }
        let z = self.posterior.decide(view.mask_len, binomial_loglik(view.hits, view.free - view.hits));
        self.memo.insert(*view, z);
        Ok(z)
    }
}

/// Bayes responder on the greedy-basis statistic of an `F_p` sketch. Its task
/// is `‖v‖₀`, i.e. `|U ∪ M|` thinned by `(p-1)/p`.
#[derive(Debug, Clone)]
pub struct BasisBayesResponder {
    posterior: RatePosterior,
    memo: HashMap<BasisStatistic, bool>,
}

impl BasisBayesResponder {
    pub fn new(dist: &RateDistribution, thresholds: ThresholdPair, p: u64) -> Result<Self> {
        Ok(Self {
            posterior: RatePosterior::new(dist, thresholds, (p - 1) as f64 / p as f64)?,
            memo: HashMap::new(),
        })
    }
}

impl QueryResponder<BasisStatistic> for BasisBayesResponder {
    fn respond(&mut self, stat: &BasisStatistic, _round: u64) -> Result<bool> {
        if let Some(&z) = self.memo.get(stat) {
            return Ok(z);
        }
        let z = self.posterior.decide(stat.mask_len, binomial_loglik(stat.selected, stat.skipped));
        self.memo.insert(*stat, z);
        Ok(z)
    }
}

/// Bayes responder on the small-key count: among `clean` support keys of rows
/// free of large values, `small` are present, each with probability
/// `(q - q0)/(1 - q0)`.
#[derive(Debug, Clone)]
pub struct SmallKeyBayesResponder {
    posterior: RatePosterior,
    q0: f64,
    memo: HashMap<SmallKeyStat, bool>,
}

impl SmallKeyBayesResponder {
    pub fn new(dist: &RateDistribution, thresholds: ThresholdPair, q0: f64) -> Result<Self> {
        if !(0.0..dist.qmin()).contains(&q0) {
            return Err(invalid("q0", format!("need 0 <= q0 < qmin, got {q0}")));
        }
        Ok(Self {
            posterior: RatePosterior::new(dist, thresholds, 1.0)?,
            q0,
            memo: HashMap::new(),
        })
    }
}

impl QueryResponder<SmallKeyStat> for SmallKeyBayesResponder {
    fn respond(&mut self, stat: &SmallKeyStat, _round: u64) -> Result<bool> {
        if stat.small > stat.clean {
            return Err(invalid("stat", format!("{} small keys among {}", stat.small, stat.clean)));
        }
        if let Some(&z) = self.memo.get(stat) {
            return Ok(z);
        }
        let q0 = self.q0;
        let ll = binomial_loglik(stat.small, stat.clean - stat.small);
        let z = self.posterior.decide(stat.mask_len, |q| ll((q - q0) / (1.0 - q0)));
        self.memo.insert(*stat, z);
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_bernoulli_subset, KeySet, RateBreakpoints, RngHandle};
    use crate::respond::ConstantResponder;
    use crate::stats::MeanAcc;
    use rand::Rng;
    use statrs::function::factorial::ln_binomial;

    fn setup() -> (RateDistribution, ThresholdPair) {
        let dist = RateDistribution::new(RateBreakpoints::new(0.1, 0.2, 0.55, 0.7)).unwrap();
        (dist, ThresholdPair::from_ratios(0.3, 0.5, 2048).unwrap())
    }

    #[test]
    fn extreme_evidence() {
        let (dist, t) = setup();
        let mut r = PoolBayesResponder::new(&dist, t).unwrap();
        assert!(!r.respond(&PoolView { hits: 0, free: 400, mask_len: 0 }, 0).unwrap());
        assert!(r.respond(&PoolView { hits: 400, free: 400, mask_len: 0 }, 0).unwrap());
        assert!(r.respond(&PoolView { hits: 1, free: 0, mask_len: 0 }, 0).is_err());
    }

    // Independent oracle: exact binomial posterior and tails by direct summation.
    fn exact_sides(dist: &RateDistribution, t: &ThresholdPair, hits: u32, free: u32, m: u32) -> (f64, f64) {
        let n = t.n();
        let grid = 4000;
        let (mut lo, mut hi, mut z) = (0.0, 0.0, 0.0);
        for i in 0..grid {
            let q = dist.qmin() + (dist.qmax() - dist.qmin()) * (i as f64 + 0.5) / grid as f64;
            let w = dist.density(q) * q.powi(hits as i32) * (1.0 - q).powi((free - hits) as i32);
            let (mut below, mut above) = (0.0, 0.0);
            for j in 0..=(n - m) {
                let pmf = (ln_binomial((n - m) as u64, j as u64) + j as f64 * q.ln() + (n - m - j) as f64 * (1.0 - q).ln()).exp();
                let size = m + j;
                if size <= t.lower() {
                    below += pmf;
                }
                if size >= t.upper() {
                    above += pmf;
                }
            }
            lo += w * below;
            hi += w * above;
            z += w;
        }
        (lo / z, hi / z)
    }

    #[test]
    fn posterior_matches_exact_binomial_oracle() {
        let (dist, t) = setup();
        let mut post = RatePosterior::new(&dist, t, 1.0).unwrap();
        for &(hits, free, m) in &[(10u32, 40u32, 0u32), (14, 40, 0), (20, 40, 5), (30, 60, 12)] {
            let (lo, hi) = post.sides(m, binomial_loglik(hits, free - hits));
            let (elo, ehi) = exact_sides(&dist, &t, hits, free, m);
            assert!((lo - elo).abs() < 0.01 && (hi - ehi).abs() < 0.01, "{hits}/{free}: ({lo},{hi}) vs ({elo},{ehi})");
        }
    }

    #[test]
    fn pool_responder_beats_constant_thresholds_on_hits() {
        let (dist, t) = setup();
        let pool = KeySet::from_keys(2048, 0..200).unwrap();
        let mut bayes = PoolBayesResponder::new(&dist, t).unwrap();
        let cuts = [50u32, 60, 70, 80];
        let mut errs = vec![MeanAcc::default(); cuts.len() + 2];
        let mut rng = RngHandle::new(91, 0).rng();
        let mut zero = ConstantResponder(false);
        for _ in 0..20_000 {
            let q = dist.sample(&mut rng);
            let u = sample_bernoulli_subset(2048, q, &mut rng);
            let hits = u.intersection_len(&pool) as u32;
            let size = u.len() as u64;
            let view = PoolView { hits, free: 200, mask_len: 0 };
            errs[0].push(t.is_error(size, bayes.respond(&view, 0).unwrap()) as u8 as f64);
            errs[1].push(t.is_error(size, zero.respond(&view, 0).unwrap()) as u8 as f64);
            for (i, &c) in cuts.iter().enumerate() {
                errs[i + 2].push(t.is_error(size, hits >= c) as u8 as f64);
            }
        }
        let best_fixed = errs[1..].iter().map(|e| e.mean()).fold(f64::INFINITY, f64::min);
        assert!(errs[0].mean() <= best_fixed + 0.005, "bayes {} vs best fixed {best_fixed}", errs[0].mean());
        assert!(errs[0].mean() < 0.01);
    }

    #[test]
    fn small_key_responder_tracks_rate() {
        let (dist, t) = setup();
        let mut r = SmallKeyBayesResponder::new(&dist, t, 0.05).unwrap();
        let mut rng = RngHandle::new(92, 0).rng();
        let mut wrong = 0;
        for _ in 0..2000 {
            let q = dist.sample(&mut rng);
            let p = (q - 0.05) / 0.95;
            let clean = 200;
            let small = (0..clean).filter(|_| rng.random_bool(p)).count() as u32;
            let z = r.respond(&SmallKeyStat { clean, small, mask_len: 0 }, 0).unwrap();
            if q < 0.25 && z || q > 0.5 && !z {
                wrong += 1;
            }
        }
        assert!(wrong < 20, "{wrong}");
        assert!(SmallKeyBayesResponder::new(&dist, t, 0.1).is_err());
    }

    #[test]
    fn basis_responder_is_monotone_in_selected() {
        let (dist, t) = setup();
        let mut r = BasisBayesResponder::new(&dist, t, 257).unwrap();
        let answers: Vec<bool> = (0..=8)
            .map(|s| r.respond(&BasisStatistic { selected: s, skipped: 8 - s, mask_len: 0 }, 0).unwrap())
            .collect();
        assert!(answers.windows(2).all(|w| w[0] <= w[1]), "{answers:?}");
        assert!(!answers[0] && answers[8]);
    }
}
