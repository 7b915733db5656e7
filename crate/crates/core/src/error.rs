use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value. Carries a field path so
    /// batch users can locate the offending entry.
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    /// Radial-table metric queried outside its tabulated range.
    #[error("radial table query r = {r} outside tabulated range [0, {r_max}]")]
    TableRange { r: f64, r_max: f64 },

    /// Non-finite input where a finite coordinate or value is required.
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    /// Exponential overflow guard tripped (u grew beyond the clamp).
    #[error("solver field exceeded overflow guard (max u = {max_u})")]
    Overflow { max_u: f64 },

    /// Solver ran out of iterations before reaching the residual tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Decay-fit window contains nonnegative angular averages; the domain is
    /// too small for the asymptotic regime.
    #[error("decay fit window [{r1}, {r2}] contains nonnegative averaged field")]
    DecayWindow { r1: f64, r2: f64 },

    /// Mismatched physical configurations in a comparison.
    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
