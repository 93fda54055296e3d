//! Simulation of the universal adaptive attack on cardinality sketches.
//!
//! The crate is organised bottom-up: [`model`] holds keys, randomness and the
//! query distribution; [`composable`] and [`linear`] provide sketching maps and
//! their determining pools; [`respond`] holds query responders; [`attack`]
//! runs the attack loop and the post-hoc certifiers.

pub mod attack;
pub mod composable;
pub mod error;
pub mod linear;
pub mod model;
pub mod respond;
pub mod stats;
pub mod system;

pub use error::{Error, Result};
pub use model::{GroundSet, KeySet, RateBreakpoints, RateDistribution, RngHandle, ThresholdPair};
