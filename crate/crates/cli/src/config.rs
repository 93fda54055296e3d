//! Experiment configuration: one TOML file per experiment.
//!
//! Every section has defaults, so an empty file describes the desk-scale
//! bottom-k scenario.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cardattack_core::model::DEFAULT_SEPARATION;
use cardattack_core::{RateBreakpoints, ThresholdPair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BottomK,
    KPartition,
    Sample,
    Boolean,
    /// Consecutive blocks that only terminate on a full block.
    BlockChain,
    /// Uniformly random `k × n` matrix over `F_p`.
    FpDense,
    /// 0/1 matrix with disjoint row supports of sizes `1, 2, 4, …`.
    RealLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponderKind {
    /// Standard estimator of a single copy against `sqrt(A B)`.
    Threshold,
    RobustRandom,
    RobustFresh,
    ConstantZero,
    ConstantOne,
    /// Posterior responder handed the true pool and mask.
    OmniscientPool,
    /// Posterior on the greedy-basis statistic of an `F_p` sketch.
    BasisBayes,
    /// Natural responder on the small-key count of a real sketch.
    SmallKeyNatural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsConfig {
    /// `A / n`.
    pub a: f64,
    /// `B / n`.
    pub b: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        Self { a: 0.3, b: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub qmin: f64,
    pub q1: f64,
    pub q2: f64,
    pub qmax: f64,
    pub separation: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            qmin: 0.1,
            q1: 0.19,
            q2: 0.55,
            qmax: 0.7,
            separation: DEFAULT_SEPARATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SketchConfig {
    pub family: Family,
    pub k: usize,
    /// Field size for `fp-dense`.
    pub p: u64,
    /// Entry bound of the real matrix after any change of basis.
    pub gamma: f64,
    /// Constant `C` in the magnitude parameter `β`.
    pub beta_c: f64,
    /// Column density for `boolean`.
    pub density: f64,
    /// Target failure probability of the pools.
    pub delta: f64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            family: Family::BottomK,
            k: 8,
            p: 257,
            gamma: 1.0,
            beta_c: 8.0,
            density: 0.05,
            delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponderConfig {
    pub kind: ResponderKind,
    pub copies: usize,
}

impl Default for ResponderConfig {
    fn default() -> Self {
        Self {
            kind: ResponderKind::RobustRandom,
            copies: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// Multiplier on `|L|² ceil(ln n)`.
    pub r_multiplier: f64,
    /// Explicit round count; overrides the multiplier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    /// Explicit pool bound for breakpoint validation; by default the
    /// empirical prefix at `qmin` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_bound: Option<u32>,
    pub slack: f64,
    /// Draws for the adversarial-distribution certificate; 0 skips it.
    pub certify_trials: u64,
    /// Draws used to size the empirical pool.
    pub pool_trials: u64,
    /// Shift constant for the `F_p` thresholds.
    pub shift_c: f64,
    /// Write a per-round CSV for each trial.
    pub log_rounds: bool,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            r_multiplier: 1.0,
            rounds: None,
            pool_bound: None,
            slack: cardattack_core::attack::DEFAULT_SLACK,
            certify_trials: 10_000,
            pool_trials: 2_000,
            shift_c: cardattack_core::linear::DEFAULT_SHIFT_C,
            log_rounds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSection {
    pub trials: u64,
    /// Rates to test; empty means the four breakpoints.
    pub q_grid: Vec<f64>,
    /// Sizes of random masks drawn from the pool, besides the empty mask.
    pub mask_sizes: Vec<u32>,
    /// Fraction of the prescribed layers kept; below 1 truncates the pool.
    pub layer_scale: f64,
}

impl Default for PoolSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            q_grid: Vec::new(),
            mask_sizes: vec![8, 32],
            layer_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxiomSection {
    pub n_max: u32,
    /// Also run the broken-compose mutation fixture, which must fail.
    pub include_mutation: bool,
}

impl Default for AxiomSection {
    fn default() -> Self {
        Self {
            n_max: 10,
            include_mutation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub n: u32,
    pub seed: u64,
    pub trials: u32,
    pub thresholds: ThresholdsConfig,
    pub rates: RatesConfig,
    pub sketch: SketchConfig,
    pub responder: ResponderConfig,
    pub attack: AttackSection,
    pub pools: PoolSection,
    pub axioms: AxiomSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "bottomk-robust".into(),
            n: 2048,
            seed: 1,
            trials: 1,
            thresholds: ThresholdsConfig::default(),
            rates: RatesConfig::default(),
            sketch: SketchConfig::default(),
            responder: ResponderConfig::default(),
            attack: AttackSection::default(),
            pools: PoolSection::default(),
            axioms: AxiomSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn threshold_pair(&self) -> Result<ThresholdPair> {
        ThresholdPair::from_ratios(self.thresholds.a, self.thresholds.b, self.n).context("thresholds")
    }

    pub fn breakpoints(&self) -> RateBreakpoints {
        let r = &self.rates;
        RateBreakpoints::new(r.qmin, r.q1, r.q2, r.qmax)
    }

    pub fn q_grid(&self) -> Vec<f64> {
        if self.pools.q_grid.is_empty() {
            let r = &self.rates;
            vec![r.qmin, r.q1, r.q2, r.qmax]
        } else {
            self.pools.q_grid.clone()
        }
    }

    /// Field-level checks; the rest is left to the library validators.
    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            bail!("n: must be positive");
        }
        if self.sketch.k == 0 || self.sketch.k > 64 {
            bail!("sketch.k: need 1 <= k <= 64, got {}", self.sketch.k);
        }
        if !(self.sketch.delta > 0.0 && self.sketch.delta < 1.0) {
            bail!("sketch.delta: need 0 < delta < 1, got {}", self.sketch.delta);
        }
        if self.responder.copies == 0 {
            bail!("responder.copies: need at least one copy");
        }
        if !(self.attack.r_multiplier >= 0.0 && self.attack.r_multiplier.is_finite()) {
            bail!("attack.r_multiplier: must be finite and nonnegative");
        }
        if !(self.pools.layer_scale > 0.0 && self.pools.layer_scale <= 1.0) {
            bail!("pools.layer_scale: need 0 < scale <= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_losslessly() {
        let mut cfg = ExperimentConfig::default();
        cfg.rates.q1 = 0.18;
        cfg.attack.rounds = Some(12345);
        cfg.attack.slack = 0.1 + 0.2;
        cfg.pools.q_grid = vec![0.1, 1.0 / 3.0];
        cfg.sketch.family = Family::FpDense;
        cfg.responder.kind = ResponderKind::BasisBayes;
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn field_errors_name_the_field() {
        let err = ExperimentConfig::from_toml("[sketch]\nk = 0\n").unwrap_err();
        assert!(format!("{err:#}").contains("sketch.k"));
        let err = ExperimentConfig::from_toml("[sketch]\nfamily = \"nope\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("family"));
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }
}
