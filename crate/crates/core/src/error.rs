use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} samples, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid value for {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("time window [{t_min}, {t_max}] is outside the valid range (0, {limit})")]
    OutsideValidityWindow { t_min: f64, t_max: f64, limit: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("profile is not integrable on [0, {radius}]")]
    NotIntegrable { radius: f64 },

    #[error("dt = {dt} exceeds the stability bound {bound} at t = {t}")]
    Unstable { dt: f64, bound: f64, t: f64 },

    #[error("numerical abort at step {step} (t = {t}): {reason}")]
    NumericalAbort { step: u64, t: f64, reason: String },

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for usage and configuration problems, 3 for
    /// numerical aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => 2,
            Error::Unstable { .. } | Error::NumericalAbort { .. } => 3,
            _ => 1,
        }
    }
}
