//! Criterion benchmarks for the hot paths: Bernoulli sampling, bottom-k
//! sketching, `F_p` echelon insertion, and attack rounds.
//!
//! Run with `cargo bench -p cardattack-bench`.
