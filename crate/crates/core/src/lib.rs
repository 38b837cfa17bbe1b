//! Explicit lower bounds for upper-tail probabilities of suprema of
//! finite-index Gaussian processes.
//!
//! The library is organised around a conditioning step (decompose the
//! supremum event by the first index exceeding the level and integrate over
//! the exceedance height) and a comparison step (replace the conditional
//! correlation structure by an explicitly constructed one that is entrywise
//! dominated). Everything a bound computation claims is checkable against
//! either an exact low-dimension orthant oracle or a reproducible
//! Monte-Carlo estimate, and the test suite does exactly that.

pub mod clt_transfer;
pub mod error;
pub mod instances;
pub mod kahan;
pub mod matrix;
pub mod mc;
pub mod orthant;
pub mod pickands;
pub mod prime_process;
pub mod rng;
pub mod special;
pub mod tail_bounds;

pub use error::{Error, Result};
pub use matrix::{CholeskyFactor, CorrelationMatrix};
pub use mc::MCEstimate;
pub use tail_bounds::{BoundConfig, CdRule, TailBoundResult};

/// Hard cap on matrix dimensions accepted by the bound and simulation
/// machinery. Overridable through the `GPTB_MATRIX_CAP` environment
/// variable.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

/// Effective matrix-dimension cap (`GPTB_MATRIX_CAP` or the default).
pub fn matrix_cap() -> usize {
    std::env::var("GPTB_MATRIX_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MATRIX_CAP)
}
