use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole: factor 1 - a*q^{k} vanishes (a = {a})")]
    Pole { a: String, k: usize },

    #[error("branch: factor 1 - a*q^{k} lies on the negative real axis (a = {a})")]
    Branch { a: String, k: usize },

    #[error("domain: {0}")]
    Domain(String),

    #[error("series did not converge within {max_terms} terms ({what})")]
    Convergence { what: &'static str, max_terms: usize },

    #[error("target {target} outside attainable range ({lo}, {hi})")]
    Range { target: f64, lo: f64, hi: f64 },

    #[error("jump law not normalized: |sum - 1| = {0:e}")]
    Normalization(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("site {site} outside represented window [{lo}, {hi}]")]
    Window { site: i64, lo: i64, hi: i64 },

    #[error("Nystrom value not converged: doubling the order changed it by {change:e} (tol {tol:e})")]
    NonConvergence { change: f64, tol: f64 },

    #[error("quadrature node within {distance:e} of a sine pole")]
    PoleProximity { distance: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Coarse category used for process exit codes: statistical failures are
    /// reported by the harness itself, everything here is numerical unless it
    /// stems from user input.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Io(_))
    }
}
