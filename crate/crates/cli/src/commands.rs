//! The four subcommands. Each returns its report and whether it passed.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cardattack_core::attack::NullSink;
use cardattack_core::composable::{
    brute_force_axioms, check_termination, general_prefix_len, monotone_prefix_len, peel, verify_pool, AxiomReport, BlockChainMap,
    BooleanLinearSketchMap, BottomKSketchMap, BrokenCompose, ComposableMap, KPartitionSketchMap, PoolCell, SampleSketchMap,
};
use cardattack_core::linear::{basis_pool, verify_linear_pool, Fp, GreedyBasisMap, Matrix, PoolKind, SpanMap};
use cardattack_core::stats::binomial_sigma;
use cardattack_core::{KeySet, RngHandle};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Family};
use crate::output::{write_json, CsvSink, RunRecord};
use crate::scenario::{build_copies, build_fp_matrix, level_matrix, run_trial, scaled_pool, Copies, Mode, TrialSummary};

fn session(cfg: &ExperimentConfig, trial: u32, mode: Mode, out: Option<&Path>, rounds: Option<u64>) -> Result<TrialSummary> {
    match out.filter(|_| cfg.attack.log_rounds) {
        Some(dir) => {
            let tag = if mode == Mode::Adaptive { "attack" } else { "baseline" };
            let mut sink = CsvSink::create(&dir.join(format!("{tag}-trial{trial}.csv")))?;
            let summary = run_trial(cfg, trial, mode, &mut sink, rounds)?;
            sink.finish()?;
            Ok(summary)
        }
        None => run_trial(cfg, trial, mode, &mut NullSink, rounds),
    }
}

fn sessions(cfg: &ExperimentConfig, mode: Mode, out: Option<&Path>, rounds: Option<u64>) -> Result<RunRecord> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let results: Vec<(u32, Result<TrialSummary>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| (t, session(cfg, t, mode, out, rounds)))
        .collect();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in results {
        match r {
            Ok(s) => trials.push(s),
            Err(e) => failures.push((t, format!("{e:#}"))),
        }
    }
    let command = if mode == Mode::Adaptive { "attack" } else { "baseline" };
    let record = RunRecord::new(command, cfg, trials, failures);
    if let Some(dir) = out {
        write_json(&dir.join(format!("{command}-summary.json")), &record)?;
    }
    Ok(record)
}

/// Runs `trials` attack sessions. Passes iff every session completed.
pub fn cmd_attack(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(RunRecord, bool)> {
    let record = sessions(cfg, Mode::Adaptive, out, None)?;
    let ok = record.failures.is_empty();
    Ok((record, ok))
}

/// The same responder on non-adaptive queries. `attack.rounds = 0` gives an
/// empty report.
pub fn cmd_baseline(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(RunRecord, bool)> {
    if cfg.attack.rounds == Some(0) {
        let record = RunRecord::new("baseline", cfg, Vec::new(), Vec::new());
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            write_json(&dir.join("baseline-summary.json"), &record)?;
        }
        return Ok((record, true));
    }
    let record = sessions(cfg, Mode::Baseline, out, None)?;
    let ok = record.failures.is_empty();
    Ok((record, ok))
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRow {
    pub mask_size: usize,
    pub q: f64,
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TerminationRow {
    pub q: f64,
    pub ell: usize,
    pub rate: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoolReport {
    pub family: Family,
    pub config_hash: String,
    pub pool_size: usize,
    /// `layers · rank` from the monotone or general formula.
    pub size_cap: usize,
    pub size_ok: bool,
    pub monotone: bool,
    pub cells: Vec<CellRow>,
    pub termination: Vec<TerminationRow>,
    pub passed: bool,
}

impl PoolReport {
    pub fn violations(&self) -> Vec<&CellRow> {
        self.cells.iter().filter(|c| !c.pass).collect()
    }
}

fn masks_from(pool: &KeySet, sizes: &[u32], rng: &mut impl Rng) -> Vec<KeySet> {
    let keys = pool.to_vec();
    let mut out = vec![KeySet::empty(pool.universe())];
    for &s in sizes {
        let s = (s as usize).min(keys.len());
        if s == 0 {
            continue;
        }
        let chosen = sample_indices(rng, keys.len(), s).into_iter().map(|i| keys[i]);
        out.push(KeySet::from_keys(pool.universe(), chosen).expect("pool keys are in range"));
    }
    out
}

fn rows(cells: Vec<PoolCell>, masks: &[KeySet], delta: f64) -> Vec<CellRow> {
    cells
        .into_iter()
        .map(|c| CellRow {
            mask_size: masks[c.mask].len(),
            q: c.q,
            trials: c.trials,
            failures: c.failures,
            rate: c.rate(),
            limit: c.limit(delta),
            pass: c.passes(delta),
        })
        .collect()
}

fn composable_report<M: ComposableMap>(map: &M, cfg: &ExperimentConfig, handle: RngHandle) -> Result<PoolReport> {
    let delta = cfg.sketch.delta;
    let peeling = peel(map)?;
    let pool = scaled_pool(map, &peeling, cfg, cfg.pools.layer_scale)?;
    let rank = map.rank_bound();
    let monotone = map.is_monotone();
    let layers = if monotone {
        monotone_prefix_len(rank, delta, cfg.rates.qmin)
    } else {
        general_prefix_len(rank, delta, cfg.rates.qmin)
    };
    let masks = masks_from(&pool, &cfg.pools.mask_sizes, &mut handle.child(0).rng());
    let grid = cfg.q_grid();
    let cells = verify_pool(map, &pool, &masks, &grid, cfg.pools.trials, handle.child(1))?;
    let mut termination = Vec::new();
    if monotone {
        let ell = ((layers.min(peeling.len()) as f64 * cfg.pools.layer_scale).round() as usize).min(peeling.len());
        for (i, &q) in grid.iter().enumerate() {
            let rate = check_termination(map, &peeling, ell, q, cfg.pools.trials, handle.child(2 + i as u64))?;
            let limit = delta + 3.0 * binomial_sigma(delta, cfg.pools.trials);
            termination.push(TerminationRow {
                q,
                ell,
                rate,
                limit,
                pass: rate <= limit,
            });
        }
    }
    let rows = rows(cells, &masks, delta);
    let size_cap = layers * rank;
    let size_ok = pool.len() <= size_cap;
    let passed = size_ok && rows.iter().all(|c| c.pass) && termination.iter().all(|t| t.pass);
    Ok(PoolReport {
        family: cfg.sketch.family,
        config_hash: cfg.hash(),
        pool_size: pool.len(),
        size_cap,
        size_ok,
        monotone,
        cells: rows,
        termination,
        passed,
    })
}

fn linear_report<F: cardattack_core::linear::Field>(m: &Matrix<F>, kind: PoolKind, cfg: &ExperimentConfig, handle: RngHandle) -> Result<PoolReport> {
    let delta = cfg.sketch.delta;
    let bp = basis_pool(m, cfg.rates.qmin, delta, kind)?;
    let keep = ((bp.pool.layers_used().unwrap_or(bp.peeling.len()) as f64 * cfg.pools.layer_scale).round() as usize).min(bp.peeling.len());
    let pool = bp.peeling.prefix(keep);
    let masks = masks_from(&pool, &cfg.pools.mask_sizes, &mut handle.child(0).rng());
    let cells = verify_linear_pool(m, &pool, kind, &masks, &cfg.q_grid(), cfg.pools.trials, handle.child(1))?;
    let rows = rows(cells, &masks, delta);
    let size_cap = monotone_prefix_len(m.k(), delta, cfg.rates.qmin) * m.k();
    let size_ok = pool.len() <= size_cap;
    let passed = size_ok && rows.iter().all(|c| c.pass);
    Ok(PoolReport {
        family: cfg.sketch.family,
        config_hash: cfg.hash(),
        pool_size: pool.len(),
        size_cap,
        size_ok,
        monotone: true,
        cells: rows,
        termination: Vec::new(),
        passed,
    })
}

/// Empirical pool failure over the `(M, q)` grid, plus termination for
/// monotone composable maps.
pub fn cmd_verify_pools(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(PoolReport, bool)> {
    let streams = crate::scenario::TrialStreams::new(cfg.seed, 0);
    let handle = streams.pools;
    let report = match cfg.sketch.family {
        Family::BlockChain => {
            let map = BlockChainMap::consecutive(cfg.sketch.k, BlockChainMap::tight_width(cfg.sketch.k, cfg.sketch.delta))?;
            composable_report(&map, cfg, handle)?
        }
        Family::FpDense => linear_report(&build_fp_matrix(cfg, streams.build)?, PoolKind::Basis, cfg, handle)?,
        Family::RealLevel => linear_report(&level_matrix(cfg.n, cfg.sketch.k)?, PoolKind::GreedyBasis, cfg, handle)?,
        _ => match build_copies(cfg, 1, streams.build)? {
            Copies::BottomK(v) => composable_report(&v[0], cfg, handle)?,
            Copies::KPartition(v) => composable_report(&v[0], cfg, handle)?,
            Copies::Sample(v) => composable_report(&v[0], cfg, handle)?,
            Copies::Boolean(v) => composable_report(&v[0], cfg, handle)?,
        },
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("pools-report.json"), &report)?;
    }
    let ok = report.passed;
    Ok((report, ok))
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomLine {
    pub family: String,
    pub n: u32,
    pub distinct_sketches: usize,
    pub max_core: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl From<&AxiomReport> for AxiomLine {
    fn from(r: &AxiomReport) -> Self {
        Self {
            family: r.family.to_string(),
            n: r.n,
            distinct_sketches: r.distinct_sketches,
            max_core: r.max_core,
            passed: r.passed(),
            failure: r
                .first_failure()
                .map(|c| format!("{}: {}", c.name, c.witness.clone().unwrap_or_default())),
        }
    }
}

/// Small random integer matrix with entries in `-1..=1`.
fn small_rational_matrix(k: usize, n: u32, rng: &mut impl Rng) -> Result<Matrix<cardattack_core::linear::Rationals>> {
    let rows: Vec<Vec<i64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-1..=1)).collect()).collect();
    Ok(Matrix::from_integers(&rows)?)
}

/// Exhaustive axiom checks over every built-in map at `n = axioms.n_max`.
pub fn cmd_axioms(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Vec<AxiomLine>, bool)> {
    let n = cfg.axioms.n_max;
    if n < 2 {
        bail!("axioms.n_max: need at least 2");
    }
    let mut rng = RngHandle::new(cfg.seed, 0).child(7).rng();
    let f3 = Fp::new(3)?;
    let fp = Matrix::random(f3, 3, n, &mut rng)?;
    let real = small_rational_matrix(2, n, &mut rng)?;
    let half = n / 2;
    let chain = BlockChainMap::new(n, vec![(0..half).collect(), (half..n).collect()])?;
    let mut reports = vec![
        brute_force_axioms(&BottomKSketchMap::random(n, 3, &mut rng)?, n)?,
        brute_force_axioms(&KPartitionSketchMap::random(n, 3, &mut rng)?, n)?,
        brute_force_axioms(&SampleSketchMap::random(n, (n / 2) as usize, &mut rng)?, n)?,
        brute_force_axioms(&BooleanLinearSketchMap::random(n, 4, 0.3, &mut rng)?, n)?,
        brute_force_axioms(&SpanMap::new(fp.clone()), n)?,
        brute_force_axioms(&GreedyBasisMap::new(fp), n)?,
        brute_force_axioms(&SpanMap::new(real.clone()), n)?,
        brute_force_axioms(&GreedyBasisMap::new(real), n)?,
        brute_force_axioms(&chain, n)?,
    ];
    if cfg.axioms.include_mutation {
        reports.push(brute_force_axioms(&BrokenCompose(BottomKSketchMap::random(n, 3, &mut rng)?), n)?);
    }
    let lines: Vec<AxiomLine> = reports.iter().map(AxiomLine::from).collect();
    let ok = lines.iter().all(|l| l.passed);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("axioms-report.json"), &lines)?;
    }
    Ok((lines, ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axioms_pass_and_mutation_fails() {
        let mut cfg = ExperimentConfig::default();
        cfg.axioms.n_max = 8;
        let (lines, ok) = cmd_axioms(&cfg, None).unwrap();
        assert!(ok, "{lines:?}");
        cfg.axioms.include_mutation = true;
        let (lines, ok) = cmd_axioms(&cfg, None).unwrap();
        assert!(!ok);
        let last = lines.last().unwrap();
        assert!(!last.passed && last.failure.is_some());
    }

    #[test]
    fn trivial_fixture_cells_and_truncated_chain() {
        let mut cfg = ExperimentConfig::default();
        cfg.pools.trials = 300;
        cfg.n = 256;
        let (report, ok) = cmd_verify_pools(&cfg, None).unwrap();
        assert!(ok, "{report:?}");
        cfg.sketch.family = Family::BlockChain;
        cfg.pools.layer_scale = 0.5;
        let (report, ok) = cmd_verify_pools(&cfg, None).unwrap();
        assert!(!ok && !report.violations().is_empty());
    }

    #[test]
    fn baseline_with_zero_rounds_is_empty() {
        let mut cfg = ExperimentConfig::default();
        cfg.attack.rounds = Some(0);
        let (record, ok) = cmd_baseline(&cfg, None).unwrap();
        assert!(ok && record.trials.is_empty());
    }
}
