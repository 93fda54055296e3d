use super::config::{promotion_margin, AttackConfig};
use super::median::MedianTracker;
use crate::error::{invalid, Result};
use crate::model::{KeySet, RngHandle};
use crate::stats::lower_median;
use crate::system::{draw_query, Query, QueryResponder, SketchingSystem};

/// One line of the per-round log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub q: f64,
    /// `|U ∪ M|`.
    pub set_size: u32,
    /// `|M|` when the query was sent.
    pub mask_size: u32,
    pub z: bool,
    /// Error against the accounting thresholds on `|U ∪ M|`.
    pub err: bool,
    /// Size the responder's task refers to.
    pub task_size: u64,
    /// Keys promoted at the end of this round, ascending.
    pub promoted: Vec<u32>,
}

pub trait RoundSink {
    fn record(&mut self, rec: &RoundRecord) -> Result<()>;
}

impl RoundSink for Vec<RoundRecord> {
    fn record(&mut self, rec: &RoundRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards every record.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl RoundSink for NullSink {
    fn record(&mut self, _rec: &RoundRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub mask: KeySet,
    pub counters: Vec<u64>,
    pub rounds: u64,
    pub errors: u64,
    /// Errors against the responder's own task thresholds.
    pub task_errors: u64,
    /// `(round, key)` in promotion order.
    pub promotions: Vec<(u64, u32)>,
}

impl AttackOutcome {
    pub fn error_fraction(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.errors as f64 / self.rounds as f64
        }
    }

    pub fn task_error_fraction(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.task_errors as f64 / self.rounds as f64
        }
    }
}

/// Counters, mask and median over the keys outside the mask.
#[derive(Debug, Clone)]
struct Scores {
    counters: Vec<u64>,
    mask: KeySet,
    tracker: MedianTracker,
    margin: f64,
}

impl Scores {
    fn new(n: u32, margin: f64) -> Self {
        Self {
            counters: vec![0; n as usize],
            mask: KeySet::empty(n),
            tracker: MedianTracker::new(n as u64),
            margin,
        }
    }

    /// Applies `C[x] += z` over `fresh`, then promotes keys of `fresh` in
    /// ascending order, refreshing the median after each promotion.
    fn update(&mut self, fresh: &KeySet, z: bool, promoted: &mut Vec<u32>) {
        promoted.clear();
        if z {
            for x in fresh.iter() {
                let c = &mut self.counters[x as usize];
                self.tracker.increment(*c);
                *c += 1;
            }
        }
        let Some(mut med) = self.tracker.median() else {
            return;
        };
        for x in fresh.iter() {
            let c = self.counters[x as usize];
            if c as f64 >= med as f64 + self.margin {
                self.mask.insert(x);
                self.tracker.remove(c);
                promoted.push(x);
                match self.tracker.median() {
                    Some(m) => med = m,
                    None => return,
                }
            }
        }
    }
}

/// Runs the adaptive attack for `config.rounds` rounds.
///
/// Round `t` draws everything from `handle.child(t)`: first `q`, then `U`, then
/// whatever the system needs. The log is therefore enough to replay the
/// counters and mask.
pub fn run_attack<S, R>(
    config: &AttackConfig,
    system: &mut S,
    responder: &mut R,
    handle: RngHandle,
    sink: &mut dyn RoundSink,
) -> Result<AttackOutcome>
where
    S: SketchingSystem + ?Sized,
    R: QueryResponder<S::View> + ?Sized,
{
    let n = system.n();
    if n != config.n() {
        return Err(invalid("system", format!("system has n = {n}, config has n = {}", config.n())));
    }
    let mut scores = Scores::new(n, config.margin());
    let mut fresh = KeySet::empty(n);
    let mut full = KeySet::empty(n);
    let mut rec = RoundRecord {
        t: 0,
        q: 0.0,
        set_size: 0,
        mask_size: 0,
        z: false,
        err: false,
        task_size: 0,
        promoted: Vec::new(),
    };
    let (mut errors, mut task_errors) = (0, 0);
    let mut promotions = Vec::new();
    for t in 0..config.rounds {
        let mut rng = handle.child(t).rng();
        let q = config.rates.sample(&mut rng);
        draw_query(&scores.mask, q, &mut fresh, &mut full, &mut rng)?;
        let obs = system.observe(
            &Query {
                fresh: &fresh,
                mask: &scores.mask,
                full: &full,
                q,
            },
            &mut rng,
        )?;
        let z = responder.respond(&obs.view, t)?;
        rec.t = t;
        rec.q = q;
        rec.set_size = full.len() as u32;
        rec.mask_size = scores.mask.len() as u32;
        rec.z = z;
        rec.err = config.thresholds.is_error(full.len() as u64, z);
        rec.task_size = obs.task_size;
        errors += rec.err as u64;
        task_errors += config.task().is_error(obs.task_size, z) as u64;
        scores.update(&fresh, z, &mut rec.promoted);
        promotions.extend(rec.promoted.iter().map(|&x| (t, x)));
        sink.record(&rec)?;
    }
    Ok(AttackOutcome {
        mask: scores.mask,
        counters: scores.counters,
        rounds: config.rounds,
        errors,
        task_errors,
        promotions,
    })
}

/// The same query stream with no mask and no scoring.
pub fn run_nonadaptive<S, R>(
    config: &AttackConfig,
    system: &mut S,
    responder: &mut R,
    handle: RngHandle,
    sink: &mut dyn RoundSink,
) -> Result<AttackOutcome>
where
    S: SketchingSystem + ?Sized,
    R: QueryResponder<S::View> + ?Sized,
{
    let n = system.n();
    if n != config.n() {
        return Err(invalid("system", format!("system has n = {n}, config has n = {}", config.n())));
    }
    let mask = KeySet::empty(n);
    let mut fresh = KeySet::empty(n);
    let mut full = KeySet::empty(n);
    let (mut errors, mut task_errors) = (0, 0);
    for t in 0..config.rounds {
        let mut rng = handle.child(t).rng();
        let q = config.rates.sample(&mut rng);
        draw_query(&mask, q, &mut fresh, &mut full, &mut rng)?;
        let obs = system.observe(
            &Query {
                fresh: &fresh,
                mask: &mask,
                full: &full,
                q,
            },
            &mut rng,
        )?;
        let z = responder.respond(&obs.view, t)?;
        let err = config.thresholds.is_error(full.len() as u64, z);
        errors += err as u64;
        task_errors += config.task().is_error(obs.task_size, z) as u64;
        sink.record(&RoundRecord {
            t,
            q,
            set_size: full.len() as u32,
            mask_size: 0,
            z,
            err,
            task_size: obs.task_size,
            promoted: Vec::new(),
        })?;
    }
    Ok(AttackOutcome {
        mask,
        counters: vec![0; n as usize],
        rounds: config.rounds,
        errors,
        task_errors,
        promotions: Vec::new(),
    })
}

/// Rebuilds counters and mask from a log and the attack's seed, checking
/// every logged rate, set size and promotion along the way.
pub fn replay(config: &AttackConfig, handle: RngHandle, log: &[RoundRecord]) -> Result<(Vec<u64>, KeySet)> {
    let n = config.n();
    let mut scores = Scores::new(n, config.margin());
    let mut fresh = KeySet::empty(n);
    let mut full = KeySet::empty(n);
    let mut promoted = Vec::new();
    for rec in log {
        let mut rng = handle.child(rec.t).rng();
        let q = config.rates.sample(&mut rng);
        draw_query(&scores.mask, q, &mut fresh, &mut full, &mut rng)?;
        if q != rec.q || full.len() as u32 != rec.set_size || scores.mask.len() as u32 != rec.mask_size {
            return Err(invalid("log", format!("round {} does not match its seed", rec.t)));
        }
        scores.update(&fresh, rec.z, &mut promoted);
        if promoted != rec.promoted {
            return Err(invalid("log", format!("round {} promotions differ", rec.t)));
        }
    }
    Ok((scores.counters, scores.mask))
}

/// `C[x] ≥ lower-median{C[y] : y ∉ M} + slack · sqrt(r ln(r n))`, recomputed
/// from scratch.
pub fn promotion_check(counters: &[u64], mask: &KeySet, rounds: u64, n: u32, x: u32, slack: f64) -> bool {
    let rest: Vec<u64> = (0..counters.len() as u32)
        .filter(|&y| !mask.contains(y))
        .map(|y| counters[y as usize])
        .collect();
    match lower_median(&rest) {
        Some(med) => counters[x as usize] as f64 >= med as f64 + promotion_margin(rounds, n, slack),
        None => false,
    }
}
