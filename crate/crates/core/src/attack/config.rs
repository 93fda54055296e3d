use crate::error::{invalid, Result};
use crate::model::{RateBreakpoints, RateDistribution, ThresholdPair};

pub const DEFAULT_SLACK: f64 = 16.0;

#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Round budget `r`.
    pub rounds: u64,
    /// Assumed upper bound on `|L|`.
    pub pool_bound: u32,
    /// Thresholds on `|U ∪ M|` used for error accounting.
    pub thresholds: ThresholdPair,
    /// Thresholds of the responder's own task when it differs from
    /// `thresholds`, e.g. `(A, B)` on `‖v‖₀` while the attacker uses the
    /// shifted pair on `|U ∪ M|`.
    pub task_thresholds: Option<ThresholdPair>,
    pub rates: RateDistribution,
    /// Constant in front of `sqrt(r ln(r n))`.
    pub slack: f64,
}

impl AttackConfig {
    /// Validates the breakpoints against the thresholds and `pool_bound`.
    pub fn new(rounds: u64, pool_bound: u32, thresholds: ThresholdPair, bp: RateBreakpoints, separation: f64) -> Result<Self> {
        if rounds == 0 {
            return Err(invalid("rounds", "need r >= 1"));
        }
        let rates = RateDistribution::validated(bp, &thresholds, pool_bound, separation)?;
        Ok(Self {
            rounds,
            pool_bound,
            thresholds,
            task_thresholds: None,
            rates,
            slack: DEFAULT_SLACK,
        })
    }

    pub fn with_slack(mut self, slack: f64) -> Result<Self> {
        if !(slack.is_finite() && slack > 0.0) {
            return Err(invalid("slack", format!("need a positive slack, got {slack}")));
        }
        self.slack = slack;
        Ok(self)
    }

    pub fn with_task_thresholds(mut self, task: ThresholdPair) -> Self {
        self.task_thresholds = Some(task);
        self
    }

    pub fn n(&self) -> u32 {
        self.thresholds.n()
    }

    pub fn task(&self) -> &ThresholdPair {
        self.task_thresholds.as_ref().unwrap_or(&self.thresholds)
    }

    /// `slack · sqrt(r ln(r n))`.
    pub fn margin(&self) -> f64 {
        promotion_margin(self.rounds, self.n(), self.slack)
    }
}

pub fn promotion_margin(rounds: u64, n: u32, slack: f64) -> f64 {
    let r = rounds as f64;
    slack * (r * (r * n as f64).ln()).sqrt()
}

/// `pool_bound² · ceil(ln n) · multiplier`, rounded, at least 1.
pub fn default_rounds(pool_bound: u32, n: u32, multiplier: f64) -> u64 {
    let base = (pool_bound as f64).powi(2) * (n as f64).ln().ceil();
    ((base * multiplier).round() as u64).max(1)
}
