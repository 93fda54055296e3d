//! The adaptive attack loop, its replay, and the post-hoc certifiers.

mod certify;
mod config;
mod engine;
mod median;

pub use certify::{certify_adversarial, score_advantage_probe, Certificate, Estimate, ProbeReport};
pub use config::{default_rounds, promotion_margin, AttackConfig, DEFAULT_SLACK};
pub use engine::{promotion_check, replay, run_attack, run_nonadaptive, AttackOutcome, NullSink, RoundRecord, RoundSink};
pub use median::MedianTracker;
