use thiserror::Error;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("eigen-decomposition failed to converge: {0}")]
    EigenSolve(String),

    #[error("integration failed for packet (g0 = {g0:.6e} rad/s, delta = {delta:.6e} rad/s): {reason}")]
    Integration { g0: f64, delta: f64, reason: String },

    #[error("bins cover only {covered:.6} of the distribution mass ({missing:.3e} missing, tolerance {tolerance})")]
    Coverage { covered: f64, missing: f64, tolerance: f64 },

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("no oscillation detected in the input trace")]
    NoOscillation,

    #[error("asymptotic model requires g0_min << g0_lim << g0_max (got {g_min:.3e}, {g_lim:.3e}, {g_max:.3e})")]
    AsymptoticRegime { g_min: f64, g_lim: f64, g_max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// Wraps the error with a note on where it happened.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// The error with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

/// Fails with [`Error::InvalidParameter`] unless `value` is finite and satisfies `ok`.
pub(crate) fn check(name: &'static str, value: f64, ok: bool, what: &str) -> Result<()> {
    if !value.is_finite() || !ok {
        return Err(invalid(name, format!("{value} ({what})")));
    }
    Ok(())
}
