//! Error type shared by the core modules.
//!
//! Numeric payloads are carried as `f64` regardless of the scalar the caller
//! works in, so the enum stays non-generic and cheap to thread through.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("generator index {j} out of range 0..={max}")]
    GeneratorIndex { j: usize, max: usize },

    #[error("grid with {got} points per axis cannot resolve modes up to {needed} (need n >= 2*max+1)")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("coefficient vector has wrong length: expected {expected}, got {got}")]
    CoefficientLength { expected: usize, got: usize },

    #[error("field is not supported on the generator modes alone")]
    NotLowMode,

    #[error("conflicting coefficients for a mode pair: |c(k) - conj(c(-k))| = {deviation:.3e}")]
    HermitianConflict { deviation: f64 },

    #[error("{context} line {line}: {msg}")]
    Parse {
        context: String,
        line: usize,
        msg: String,
    },

    #[error("duration must be positive, got {got}")]
    NonPositiveDuration { got: f64 },

    #[error("no admissible glide time in [{lo}, {hi}) even at margin {margin:.3e}")]
    NoAdmissibleTau { lo: f64, hi: f64, margin: f64 },

    #[error("masked region covers the whole grid; profile never exceeds the cut")]
    EmptyMask,

    #[error("decomposition residual {residual:.3e} exceeds allowed {max:.3e}")]
    ResidualTooLarge { residual: f64, max: f64 },

    #[error("schedule needs {needed:.3e} time units but only {budget:.3e} remain")]
    BudgetExhausted { needed: f64, budget: f64 },

    #[error("truncation residual {residual:.3e} exceeds {limit:.3e} at t = {t:.6}")]
    TruncationOverflow { residual: f64, limit: f64, t: f64 },

    #[error("transfer from the zero state is not supported")]
    ZeroInitialState,

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
