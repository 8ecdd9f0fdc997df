//! Central numerical tolerances. Reports echo the effective values.

/// Identities that hold by construction (tensor normalization, sign, magnitude).
pub const EXACT: f64 = 1e-12;

/// Identities mediated by a linear solve (Akin residuals, enforced relations).
pub const SOLVER: f64 = 1e-9;

/// Exponential-payoff relation families.
pub const H_SWEEP: f64 = 1e-8;

/// Total mass of a stationary distribution must be within this of one.
pub const STATIONARY_SUM: f64 = 1e-10;

/// Below this biased-ensemble normalizer the degenerate (zero-support) branch is taken.
pub const DEGENERATE: f64 = 1e-12;

/// Largest recurrent class solved with a dense LU factorization.
pub const DENSE_LIMIT: usize = 4096;

/// Largest number of dense tensor entries (histories times actions) accepted.
pub const MAX_TENSOR_ENTRIES: u128 = 1 << 24;

/// Exponent bound for `exp(h * s)` evaluations.
pub const MAX_EXPONENT: f64 = 500.0;
