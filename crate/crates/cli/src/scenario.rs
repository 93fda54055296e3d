//! Builds sketching systems and responders from a config and runs sessions.

use std::hash::Hash;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cardattack_core::attack::{
    certify_adversarial, default_rounds, run_attack, run_nonadaptive, AttackConfig, AttackOutcome, Certificate, RoundSink,
};
use cardattack_core::composable::{
    empirical_pool_prefix, peel, pool_from_peeling, BooleanLinearSketchMap, BottomKSketchMap, ComposableMap, CorePeeling,
    KPartitionSketchMap, SampleSketchMap,
};
use cardattack_core::linear::{
    basis_pool, shifted_thresholds_fp, Fp, GreedyBasisMap, Matrix, PoolKind, RealAuxParams, Rationals, SpanMap,
};
use cardattack_core::respond::{
    wrap_natural, BasisBayesResponder, BasisExtractor, CardinalityEstimator, ConstantResponder, CopyStrategy,
    CopyThresholdResponder, LinearOccupancy, PoolBayesResponder, RobustWrapper, SmallKeyBayesResponder, SmallKeyExtractor,
    StatisticExtractor, ThresholdResponder,
};
use cardattack_core::system::{ComposableSystem, FpSystem, PoolOracleSystem, QueryResponder, RealSmallSystem, SketchingSystem};
use cardattack_core::{KeySet, RngHandle, ThresholdPair};
use serde::Serialize;

use crate::config::{ExperimentConfig, Family, ResponderKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Adaptive,
    Baseline,
}

/// Outcome of one session.
#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: u32,
    pub rounds: u64,
    pub errors: u64,
    pub error_fraction: f64,
    pub task_error_fraction: f64,
    pub final_mask_size: usize,
    pub mask: Vec<u32>,
    /// Size of the pool of the first copy, which sets the round budget.
    pub pool_size: usize,
    /// Pool bound used for breakpoint validation.
    pub pool_bound: u32,
    /// Whether `M` stayed inside the union of the copies' pools.
    pub mask_in_pool: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_groups: Option<usize>,
    /// Largest `ln(max|v_i| / min|v_i|)` over all real queries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_log_ratio: Option<f64>,
    /// `2 ln β`, the bound the ratio must respect.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_ratio_bound: Option<f64>,
    pub runtime_secs: f64,
}

/// Stream layout of one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialStreams {
    pub build: RngHandle,
    pub selection: RngHandle,
    pub rounds: RngHandle,
    pub certify: RngHandle,
    pub pools: RngHandle,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u32) -> Self {
        let base = RngHandle::new(seed, trial as u64);
        Self {
            build: base.child(0),
            selection: base.child(1),
            rounds: base.child(2),
            certify: base.child(3),
            pools: base.child(4),
        }
    }
}

/// Copies of one composable family.
pub enum Copies {
    BottomK(Vec<BottomKSketchMap>),
    KPartition(Vec<KPartitionSketchMap>),
    Sample(Vec<SampleSketchMap>),
    Boolean(Vec<BooleanLinearSketchMap>),
}

pub fn build_copies(cfg: &ExperimentConfig, count: usize, handle: RngHandle) -> Result<Copies> {
    let mut rng = handle.rng();
    let (n, k) = (cfg.n, cfg.sketch.k);
    let out = match cfg.sketch.family {
        Family::BottomK => Copies::BottomK((0..count).map(|_| BottomKSketchMap::random(n, k, &mut rng)).collect::<Result<_, _>>()?),
        Family::KPartition => {
            Copies::KPartition((0..count).map(|_| KPartitionSketchMap::random(n, k, &mut rng)).collect::<Result<_, _>>()?)
        }
        Family::Sample => Copies::Sample((0..count).map(|_| SampleSketchMap::random(n, k, &mut rng)).collect::<Result<_, _>>()?),
        Family::Boolean => Copies::Boolean(
            (0..count)
                .map(|_| BooleanLinearSketchMap::random(n, k, cfg.sketch.density, &mut rng))
                .collect::<Result<_, _>>()?,
        ),
        other => bail!("sketch.family: {other:?} is not a composable family with an estimator"),
    };
    Ok(out)
}

/// `k × n` matrix for the linear families.
pub fn build_fp_matrix(cfg: &ExperimentConfig, handle: RngHandle) -> Result<Matrix<Fp>> {
    let f = Fp::new(cfg.sketch.p).context("sketch.p")?;
    Ok(Matrix::random(f, cfg.sketch.k, cfg.n, &mut handle.rng())?)
}

/// Rows with disjoint consecutive supports of sizes `1, 2, 4, …, 2^(k-1)`.
pub fn level_matrix(n: u32, k: usize) -> Result<Matrix<Rationals>> {
    if k >= 32 || (1u64 << k) - 1 > n as u64 {
        bail!("sketch.k: level supports need 2^k - 1 <= n");
    }
    let mut rows = vec![vec![0i64; n as usize]; k];
    let mut next = 0usize;
    for (j, row) in rows.iter_mut().enumerate() {
        for _ in 0..1usize << j {
            row[next] = 1;
            next += 1;
        }
    }
    Ok(Matrix::from_integers(&rows)?)
}

/// Pool from the peeling, with the prescribed layer count scaled by `scale`.
pub fn scaled_pool<M: ComposableMap + ?Sized>(map: &M, peeling: &CorePeeling, cfg: &ExperimentConfig, scale: f64) -> Result<KeySet> {
    let pool = pool_from_peeling(peeling, map.rank_bound(), cfg.rates.qmin, cfg.sketch.delta, map.is_monotone())?;
    let used = pool.layers_used().unwrap_or(peeling.len());
    let keep = ((used as f64 * scale).round() as usize).min(peeling.len());
    Ok(peeling.prefix(keep))
}

/// Pool of the first copy, union of all copies' pools, and the empirical
/// prefix size at `qmin` for the first copy.
struct Pools {
    reference: KeySet,
    union: KeySet,
    empirical: u32,
}

fn composable_pools<M: ComposableMap>(copies: &[M], cfg: &ExperimentConfig, handle: RngHandle) -> Result<Pools> {
    let mut union = KeySet::empty(cfg.n);
    let mut reference = None;
    let mut empirical = 0;
    for (i, map) in copies.iter().enumerate() {
        let peeling = peel(map)?;
        let pool = scaled_pool(map, &peeling, cfg, 1.0)?;
        union.union_with(&pool);
        if i == 0 {
            let (ell, _) = empirical_pool_prefix(map, &peeling, cfg.rates.qmin, cfg.sketch.delta, cfg.attack.pool_trials, handle)?;
            empirical = peeling.prefix(ell).len() as u32;
            reference = Some(pool);
        }
    }
    Ok(Pools {
        reference: reference.expect("at least one copy"),
        union,
        empirical,
    })
}

fn linear_pools<M: ComposableMap>(map: &M, peeling: &CorePeeling, pool: KeySet, cfg: &ExperimentConfig, handle: RngHandle) -> Result<Pools> {
    let (ell, _) = empirical_pool_prefix(map, peeling, cfg.rates.qmin, cfg.sketch.delta, cfg.attack.pool_trials, handle)?;
    Ok(Pools {
        union: pool.clone(),
        reference: pool,
        empirical: peeling.prefix(ell).len() as u32,
    })
}

fn attack_config(cfg: &ExperimentConfig, pools: &Pools, thresholds: ThresholdPair, rounds_override: Option<u64>) -> Result<AttackConfig> {
    let rounds = rounds_override
        .or(cfg.attack.rounds)
        .unwrap_or_else(|| default_rounds(pools.reference.len() as u32, cfg.n, cfg.attack.r_multiplier));
    let bound = cfg.attack.pool_bound.unwrap_or(pools.empirical);
    let ac = AttackConfig::new(rounds.max(1), bound, thresholds, cfg.breakpoints(), cfg.rates.separation)
        .context("rates: breakpoints do not fit the thresholds and pool bound")?;
    ac.with_slack(cfg.attack.slack).context("attack.slack")
}

struct Extras {
    max_log_ratio: Option<f64>,
    log_ratio_bound: Option<f64>,
}

/// Runs one session and, for adaptive runs, the certificate on the final mask.
#[allow(clippy::too_many_arguments)]
fn drive<S, R, K, G>(
    cfg: &ExperimentConfig,
    ac: &AttackConfig,
    mode: Mode,
    streams: &TrialStreams,
    system: &mut S,
    responder: &mut R,
    sink: &mut dyn RoundSink,
    certify: bool,
    group: G,
) -> Result<(AttackOutcome, Option<Certificate>)>
where
    S: SketchingSystem,
    R: QueryResponder<S::View>,
    K: Hash + Eq,
    G: FnMut(&S::View) -> K,
{
    let outcome = match mode {
        Mode::Adaptive => run_attack(ac, system, responder, streams.rounds, sink)?,
        Mode::Baseline => run_nonadaptive(ac, system, responder, streams.rounds, sink)?,
    };
    let cert = if mode == Mode::Adaptive && certify && cfg.attack.certify_trials > 0 {
        Some(certify_adversarial(
            system,
            &outcome.mask,
            &ac.rates,
            ac.task(),
            cfg.attack.certify_trials,
            streams.certify,
            group,
        )?)
    } else {
        None
    };
    Ok((outcome, cert))
}

fn composable_session<M>(
    cfg: &ExperimentConfig,
    copies: Vec<M>,
    mode: Mode,
    streams: &TrialStreams,
    sink: &mut dyn RoundSink,
    rounds: Option<u64>,
) -> Result<(AttackOutcome, Option<Certificate>, Pools)>
where
    M: ComposableMap + CardinalityEstimator<Sketch = <M as ComposableMap>::Sketch> + Clone,
{
    let pools = composable_pools(&copies, cfg, streams.pools)?;
    let t = cfg.threshold_pair()?;
    let ac = attack_config(cfg, &pools, t, rounds)?;
    let (outcome, cert) = match cfg.responder.kind {
        ResponderKind::Threshold => {
            let mut sys = ComposableSystem { map: copies[0].clone() };
            let mut qr = ThresholdResponder::new(copies[0].clone(), &t);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |s| s.clone())?
        }
        ResponderKind::RobustRandom | ResponderKind::RobustFresh => {
            let strategy = if cfg.responder.kind == ResponderKind::RobustRandom {
                CopyStrategy::RandomCopy
            } else {
                CopyStrategy::FreshCopy
            };
            let mut sys = RobustWrapper::new(copies.clone(), strategy, streams.selection)?;
            let mut qr = CopyThresholdResponder::new(copies, &t);
            let certify = strategy == CopyStrategy::RandomCopy;
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, certify, |v| v.clone())?
        }
        ResponderKind::ConstantZero | ResponderKind::ConstantOne => {
            let mut sys = ComposableSystem { map: copies[0].clone() };
            let mut qr = ConstantResponder(cfg.responder.kind == ResponderKind::ConstantOne);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |s| s.clone())?
        }
        ResponderKind::OmniscientPool => {
            let mut sys = PoolOracleSystem::new(pools.reference.clone());
            let mut qr = PoolBayesResponder::new(&ac.rates, t)?;
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |v| *v)?
        }
        other => bail!("responder.kind: {other:?} does not apply to composable maps"),
    };
    Ok((outcome, cert, pools))
}

fn fp_session(
    cfg: &ExperimentConfig,
    mode: Mode,
    streams: &TrialStreams,
    sink: &mut dyn RoundSink,
    rounds: Option<u64>,
) -> Result<(AttackOutcome, Option<Certificate>, Pools)> {
    let m = build_fp_matrix(cfg, streams.build)?;
    let bp = basis_pool(&m, cfg.rates.qmin, cfg.sketch.delta, PoolKind::Basis)?;
    let pools = linear_pools(&SpanMap::new(m.clone()), &bp.peeling, bp.keys().clone(), cfg, streams.pools)?;
    let task = cfg.threshold_pair()?;
    let (a, b) = shifted_thresholds_fp(task.lower(), task.upper(), cfg.sketch.p, cfg.n, cfg.attack.shift_c)?;
    let shifted = ThresholdPair::new(a as u32, b as u32, cfg.n)?;
    let ac = attack_config(cfg, &pools, shifted, rounds)?.with_task_thresholds(task);
    let (outcome, cert) = match cfg.responder.kind {
        ResponderKind::BasisBayes => {
            let mut sys = FpSystem::new(m);
            let mut qr = wrap_natural(BasisBayesResponder::new(&ac.rates, task, cfg.sketch.p)?, BasisExtractor);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |v| v.basis)?
        }
        ResponderKind::Threshold => {
            let mut qr = ThresholdResponder::new(LinearOccupancy::fp(&m), &task);
            let mut sys = FpSystem::new(m);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |v| v.basis)?
        }
        ResponderKind::ConstantZero | ResponderKind::ConstantOne => {
            let mut sys = FpSystem::new(m);
            let mut qr = ConstantResponder(cfg.responder.kind == ResponderKind::ConstantOne);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |v| v.basis)?
        }
        ResponderKind::OmniscientPool => {
            let mut sys = PoolOracleSystem::new(pools.reference.clone());
            let mut qr = PoolBayesResponder::new(&ac.rates, shifted)?;
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, |v| *v)?
        }
        other => bail!("responder.kind: {other:?} does not apply to fp-dense"),
    };
    Ok((outcome, cert, pools))
}

fn real_session(
    cfg: &ExperimentConfig,
    mode: Mode,
    streams: &TrialStreams,
    sink: &mut dyn RoundSink,
    rounds: Option<u64>,
) -> Result<(AttackOutcome, Option<Certificate>, Pools, Extras)> {
    let m = level_matrix(cfg.n, cfg.sketch.k)?;
    let bp = basis_pool(&m, cfg.rates.qmin, cfg.sketch.delta, PoolKind::GreedyBasis)?;
    let pools = linear_pools(&GreedyBasisMap::new(m.clone()), &bp.peeling, bp.keys().clone(), cfg, streams.pools)?;
    let t = cfg.threshold_pair()?;
    let ac = attack_config(cfg, &pools, t, rounds)?;
    let params = RealAuxParams::small(cfg.n, cfg.sketch.gamma, cfg.sketch.k, cfg.sketch.delta, cfg.sketch.beta_c, cfg.rates.qmin)?;
    let extractor = SmallKeyExtractor::new(&m, cfg.n as f64 * cfg.sketch.gamma)?;
    let mut sys = RealSmallSystem::new(m, params)?;
    let group = {
        let x = extractor.clone();
        move |v: &cardattack_core::system::RealView| x.extract(v)
    };
    let (outcome, cert) = match cfg.responder.kind {
        ResponderKind::SmallKeyNatural => {
            let mut qr = wrap_natural(SmallKeyBayesResponder::new(&ac.rates, t, params.q0)?, extractor);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, group)?
        }
        ResponderKind::ConstantZero | ResponderKind::ConstantOne => {
            let mut qr = ConstantResponder(cfg.responder.kind == ResponderKind::ConstantOne);
            drive(cfg, &ac, mode, streams, &mut sys, &mut qr, sink, true, group)?
        }
        other => bail!("responder.kind: {other:?} does not apply to real-level"),
    };
    let extras = Extras {
        max_log_ratio: Some(sys.max_log_ratio()),
        log_ratio_bound: Some(2.0 * params.ln_beta()),
    };
    Ok((outcome, cert, pools, extras))
}

/// One attack or baseline session. `rounds` overrides the configured budget.
pub fn run_trial(cfg: &ExperimentConfig, trial: u32, mode: Mode, sink: &mut dyn RoundSink, rounds: Option<u64>) -> Result<TrialSummary> {
    let start = Instant::now();
    let streams = TrialStreams::new(cfg.seed, trial);
    let copies = match cfg.responder.kind {
        ResponderKind::RobustRandom | ResponderKind::RobustFresh => cfg.responder.copies,
        _ => 1,
    };
    let (outcome, cert, pools, extras) = match cfg.sketch.family {
        Family::FpDense => {
            let (o, c, p) = fp_session(cfg, mode, &streams, sink, rounds)?;
            (o, c, p, None)
        }
        Family::RealLevel => {
            let (o, c, p, e) = real_session(cfg, mode, &streams, sink, rounds)?;
            (o, c, p, Some(e))
        }
        Family::BlockChain => bail!("sketch.family: block-chain has no estimator and is only used by verify-pools"),
        _ => {
            let (o, c, p) = match build_copies(cfg, copies, streams.build)? {
                Copies::BottomK(v) => composable_session(cfg, v, mode, &streams, sink, rounds)?,
                Copies::KPartition(v) => composable_session(cfg, v, mode, &streams, sink, rounds)?,
                Copies::Sample(v) => composable_session(cfg, v, mode, &streams, sink, rounds)?,
                Copies::Boolean(v) => composable_session(cfg, v, mode, &streams, sink, rounds)?,
            };
            (o, c, p, None)
        }
    };
    Ok(TrialSummary {
        trial,
        rounds: outcome.rounds,
        errors: outcome.errors,
        error_fraction: outcome.error_fraction(),
        task_error_fraction: outcome.task_error_fraction(),
        final_mask_size: outcome.mask.len(),
        mask: outcome.mask.to_vec(),
        pool_size: pools.reference.len(),
        pool_bound: cfg.attack.pool_bound.unwrap_or(pools.empirical),
        mask_in_pool: outcome.mask.is_subset(&pools.union),
        eta: cert.as_ref().map(|c| c.eta),
        certificate_groups: cert.as_ref().map(|c| c.groups),
        max_log_ratio: extras.as_ref().and_then(|e| e.max_log_ratio),
        log_ratio_bound: extras.as_ref().and_then(|e| e.log_ratio_bound),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
