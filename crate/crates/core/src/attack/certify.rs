use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{invalid, Result};
use crate::model::{KeySet, RateDistribution, RngHandle, Side, ThresholdPair};
use crate::stats::MeanAcc;
use crate::system::{draw_query, Query, QueryResponder, SketchingSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// `Σ_groups min(#low, #high) / trials`.
    pub eta: f64,
    pub trials: u64,
    pub groups: usize,
    /// Fraction of draws at or below `A`.
    pub low_mass: f64,
    /// Fraction of draws at or above `B`.
    pub high_mass: f64,
}

/// Lower bound on the error of any estimator that sees only `group(view)` on
/// queries `U ∪ M` with `q ~ ν`.
///
/// Draws are grouped by the key the closure returns (the exact sketch for
/// composable maps, a structural statistic for linear ones); inside a group
/// the best fixed answer still errs on the smaller side. Sides are taken on
/// the responder's task size.
pub fn certify_adversarial<S, K, G>(
    system: &mut S,
    mask: &KeySet,
    dist: &RateDistribution,
    thresholds: &ThresholdPair,
    trials: u64,
    handle: RngHandle,
    mut group: G,
) -> Result<Certificate>
where
    S: SketchingSystem + ?Sized,
    K: Hash + Eq,
    G: FnMut(&S::View) -> K,
{
    if trials == 0 {
        return Err(invalid("trials", "need at least one draw"));
    }
    let n = system.n();
    if mask.universe() != n {
        return Err(invalid("mask", "mask and system disagree on n"));
    }
    let mut fresh = KeySet::empty(n);
    let mut full = KeySet::empty(n);
    let mut counts: HashMap<K, (u64, u64)> = HashMap::new();
    let (mut low, mut high) = (0u64, 0u64);
    for t in 0..trials {
        let mut rng = handle.child(t).rng();
        let q = dist.sample(&mut rng);
        draw_query(mask, q, &mut fresh, &mut full, &mut rng)?;
        let obs = system.observe(
            &Query {
                fresh: &fresh,
                mask,
                full: &full,
                q,
            },
            &mut rng,
        )?;
        let slot = counts.entry(group(&obs.view)).or_default();
        match thresholds.side(obs.task_size) {
            Side::Low => {
                slot.0 += 1;
                low += 1;
            }
            Side::High => {
                slot.1 += 1;
                high += 1;
            }
            Side::Gap => {}
        }
    }
    let forced: u64 = counts.values().map(|&(l, h)| l.min(h)).sum();
    Ok(Certificate {
        eta: forced as f64 / trials as f64,
        trials,
        groups: counts.len(),
        low_mass: low as f64 / trials as f64,
        high_mass: high as f64 / trials as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn from(acc: &MeanAcc) -> Self {
        Self {
            mean: acc.mean(),
            std_err: acc.std_err(),
        }
    }

    /// One-sided lower confidence bound `mean - z · std_err`.
    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.std_err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub rounds: u64,
    /// Mean score probability over `L' = L ∖ M`.
    pub p_bar: Estimate,
    /// Score probability of a transparent key (outside `L ∪ M`).
    pub p_star: Estimate,
    /// `E[Z 1{|U∪M| < A} + (1-Z) 1{|U∪M| > B}]`.
    pub eta: Estimate,
    /// Per-round difference of the two score estimates.
    pub advantage: Estimate,
}

/// Monte-Carlo score probabilities of pool keys versus transparent keys for a
/// fixed responder on queries `U ∪ M`, given the true pool `L`.
#[allow(clippy::too_many_arguments)]
pub fn score_advantage_probe<S, R>(
    system: &mut S,
    responder: &mut R,
    mask: &KeySet,
    pool: &KeySet,
    dist: &RateDistribution,
    thresholds: &ThresholdPair,
    rounds: u64,
    handle: RngHandle,
) -> Result<ProbeReport>
where
    S: SketchingSystem + ?Sized,
    R: QueryResponder<S::View> + ?Sized,
{
    let n = system.n();
    if mask.universe() != n || pool.universe() != n {
        return Err(invalid("pool", "mask, pool and system disagree on n"));
    }
    let live = pool.difference(mask);
    let mut transparent = pool.union(mask);
    transparent = transparent.complement();
    if live.is_empty() || transparent.is_empty() {
        return Err(invalid("pool", "need keys both in L ∖ M and outside L ∪ M"));
    }
    let (nl, nt) = (live.len() as f64, transparent.len() as f64);
    let (a, b) = (thresholds.lower() as u64, thresholds.upper() as u64);
    let mut fresh = KeySet::empty(n);
    let mut full = KeySet::empty(n);
    let (mut p_bar, mut p_star, mut eta, mut diff) = (MeanAcc::default(), MeanAcc::default(), MeanAcc::default(), MeanAcc::default());
    for t in 0..rounds {
        let mut rng = handle.child(t).rng();
        let q = dist.sample(&mut rng);
        draw_query(mask, q, &mut fresh, &mut full, &mut rng)?;
        let obs = system.observe(
            &Query {
                fresh: &fresh,
                mask,
                full: &full,
                q,
            },
            &mut rng,
        )?;
        let z = responder.respond(&obs.view, t)? as u8 as f64;
        let size = full.len() as u64;
        let pb = z * fresh.intersection_len(&live) as f64 / nl;
        let ps = z * fresh.intersection_len(&transparent) as f64 / nt;
        p_bar.push(pb);
        p_star.push(ps);
        diff.push(pb - ps);
        eta.push(z * (size < a) as u8 as f64 + (1.0 - z) * (size > b) as u8 as f64);
    }
    Ok(ProbeReport {
        rounds,
        p_bar: Estimate::from(&p_bar),
        p_star: Estimate::from(&p_star),
        eta: Estimate::from(&eta),
        advantage: Estimate::from(&diff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composable::BottomKSketchMap;
    use crate::model::RateBreakpoints;
    use crate::respond::ConstantResponder;
    use crate::system::ComposableSystem;

    fn setup(n: u32) -> (RateDistribution, ThresholdPair) {
        (
            RateDistribution::new(RateBreakpoints::new(0.1, 0.2, 0.55, 0.7)).unwrap(),
            ThresholdPair::from_ratios(0.3, 0.5, n).unwrap(),
        )
    }

    #[test]
    fn empty_mask_on_identity_bottomk_is_near_zero() {
        let (dist, t) = setup(2048);
        let map = BottomKSketchMap::identity(2048, 64).unwrap();
        let mut sys = ComposableSystem { map };
        let cert = certify_adversarial(&mut sys, &KeySet::empty(2048), &dist, &t, 2000, RngHandle::new(110, 0), |s| s.clone()).unwrap();
        assert!(cert.eta < 0.01, "{cert:?}");
        assert!(cert.groups > 1900);
    }

    #[test]
    fn single_group_gives_min_of_sides() {
        let (dist, t) = setup(2048);
        let mut sys = ComposableSystem {
            map: BottomKSketchMap::identity(2048, 4).unwrap(),
        };
        let cert = certify_adversarial(&mut sys, &KeySet::empty(2048), &dist, &t, 4000, RngHandle::new(111, 0), |_| ()).unwrap();
        assert_eq!(cert.groups, 1);
        assert!((cert.eta - cert.low_mass.min(cert.high_mass)).abs() < 1e-12);
        // quadrature oracle for the side masses, ignoring the binomial spread around q n
        let lo = dist.cdf(t.ratio_a());
        let hi = 1.0 - dist.cdf(t.ratio_b());
        assert!((cert.low_mass - lo).abs() < 0.04 && (cert.high_mass - hi).abs() < 0.04, "{cert:?} vs {lo} {hi}");
    }

    #[test]
    fn probe_constant_responders() {
        let (dist, t) = setup(1024);
        let map = BottomKSketchMap::identity(1024, 8).unwrap();
        let pool = KeySet::from_keys(1024, 0..100).unwrap();
        let mask = KeySet::empty(1024);
        let mut sys = ComposableSystem { map };
        let zero = score_advantage_probe(&mut sys, &mut ConstantResponder(false), &mask, &pool, &dist, &t, 2000, RngHandle::new(112, 0)).unwrap();
        assert_eq!((zero.p_bar.mean, zero.p_star.mean, zero.eta.mean > 0.0), (0.0, 0.0, true));
        let one = score_advantage_probe(&mut sys, &mut ConstantResponder(true), &mask, &pool, &dist, &t, 20_000, RngHandle::new(113, 0)).unwrap();
        let eq = dist.mean();
        assert!((one.p_bar.mean - eq).abs() < 0.01 && (one.p_star.mean - eq).abs() < 0.01, "{one:?} vs {eq}");
        // φ ≡ 1 errs when |U| < A, i.e. roughly on q below A/n
        assert!((one.eta.mean - dist.cdf(t.ratio_a())).abs() < 0.03, "{} vs {}", one.eta.mean, dist.cdf(t.ratio_a()));
    }
}
