use thiserror::Error;

/// Errors raised by the interferometer engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("visibility {0} is outside [0, 1]")]
    InvalidVisibility(f64),

    #[error("phase is not finite")]
    NonFinitePhase,

    #[error("degenerate phase schedule: n + d = {n} + {d} must be positive")]
    DegenerateSchedule { n: u64, d: f64 },

    #[error("remainder L = {l} is outside [0, {n})")]
    OutOfRangeRemainder { l: u64, n: u64 },

    #[error("candidate divisor {n} is not in [2, {big_n}]")]
    InvalidCandidate { n: u64, big_n: u64 },

    #[error("number under test must be at least 2, got {0}")]
    InvalidTarget(u64),

    #[error("unknown detector {0:?}")]
    UnknownDetector(String),

    #[error("ordering violation: {0}")]
    OrderingViolation(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid cascade topology: {0}")]
    InvalidTopology(String),

    #[error("signal is negative ({value}) at t = {t}")]
    NegativeSignal { t: f64, value: f64 },

    #[error("need at least 2 samples to integrate, got {0}")]
    NonIntegrableSamples(usize),

    #[error(
        "invalid bandwidth: need 0 < dlambda <= lambda, got lambda = {lambda}, dlambda = {dlambda}"
    )]
    InvalidBandwidth { lambda: f64, dlambda: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported generator {0:?}")]
    UnsupportedGenerator(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
