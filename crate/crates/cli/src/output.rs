//! CSV round logs and JSON run records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use cardattack_core::attack::{RoundRecord, RoundSink};
use cardattack_core::stats::median;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::scenario::TrialSummary;

pub const CSV_HEADER: [&str; 6] = ["t", "q", "setsize", "masksize", "z", "err"];

/// Per-round CSV writer. Write errors are held until [`CsvSink::finish`].
pub struct CsvSink {
    writer: csv::Writer<BufWriter<File>>,
    failed: Option<csv::Error>,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(CSV_HEADER)?;
        Ok(Self { writer, failed: None })
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.failed.take() {
            return Err(e.into());
        }
        self.writer.flush()?;
        Ok(())
    }
}

impl RoundSink for CsvSink {
    fn record(&mut self, rec: &RoundRecord) -> cardattack_core::Result<()> {
        if self.failed.is_none() {
            let row = [
                rec.t.to_string(),
                rec.q.to_string(),
                rec.set_size.to_string(),
                rec.mask_size.to_string(),
                (rec.z as u8).to_string(),
                (rec.err as u8).to_string(),
            ];
            if let Err(e) = self.writer.write_record(&row) {
                self.failed = Some(e);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub median_error_fraction: f64,
    pub min_error_fraction: f64,
    pub max_error_fraction: f64,
    pub mean_error_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_eta: Option<f64>,
    /// Fraction of trials whose final mask stayed inside the pools.
    pub mask_purity: f64,
}

impl Aggregate {
    pub fn of(trials: &[TrialSummary]) -> Self {
        let fr: Vec<f64> = trials.iter().map(|t| t.error_fraction).collect();
        let etas: Vec<f64> = trials.iter().filter_map(|t| t.eta).collect();
        let count = trials.len().max(1) as f64;
        Self {
            trials: trials.len(),
            median_error_fraction: if fr.is_empty() { 0.0 } else { median(&fr) },
            min_error_fraction: if fr.is_empty() { 0.0 } else { fr.iter().copied().fold(f64::INFINITY, f64::min) },
            max_error_fraction: fr.iter().copied().fold(0.0, f64::max),
            mean_error_fraction: fr.iter().sum::<f64>() / count,
            median_eta: (!etas.is_empty()).then(|| median(&etas)),
            mask_purity: trials.iter().filter(|t| t.mask_in_pool).count() as f64 / count,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialSummary>,
    pub aggregate: Aggregate,
    /// Sessions that stopped with an error, as `(trial, message)`.
    pub failures: Vec<(u32, String)>,
}

impl RunRecord {
    pub fn new(command: &str, cfg: &ExperimentConfig, mut trials: Vec<TrialSummary>, failures: Vec<(u32, String)>) -> Self {
        trials.sort_by_key(|t| t.trial);
        Self {
            command: command.into(),
            scenario: cfg.scenario.clone(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            aggregate: Aggregate::of(&trials),
            trials,
            failures,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
