//! Experiment harness: TOML configs, attack sessions, and the pool and axiom
//! validators behind the `cardattack` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenario;
