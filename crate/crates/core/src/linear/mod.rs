//! Linear sketches `S(v) = A v` over `F_p` and the rationals, their pools, and
//! the auxiliary value distributions used to build query vectors.

mod field;
mod maps;
mod matrix;
mod values;
mod vector;

pub use field::{is_prime, Field, Fp, Rationals};
pub use maps::{basis_pool, verify_linear_pool, BasisPool, GreedyBasisMap, PoolKind, SpanMap};
pub use matrix::{gamma0_estimate, greedy_basis, invert, parse_matrix, AnyMatrix, ChangeOfBasis, Echelon, Matrix};
pub use values::{
    aux_fp, aux_real_large, aux_real_small, exp_mantissa, log_magnitude_ratio, shifted_thresholds_fp, sketch_scaled_exact, BetaScaled,
    IntegerSketcher, RealAuxMode, RealAuxParams, DEFAULT_BETA_CONSTANT, DEFAULT_SHIFT_C,
};
pub use vector::QueryVector;
