use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),
    #[error("unknown {0}")]
    UnknownName(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value {value} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failed to bracket a root: {0}")]
    Bracket(String),
    #[error("rate {rate} sits at a Singleton-bound discontinuity for B={blocks}, M={bits}")]
    SingletonDiscontinuity { rate: f64, blocks: usize, bits: u32 },
    #[error("undefined at d = 1 (boundary between zero-outage and finite-exponent regimes)")]
    BoundaryExponent,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("corrupt profile cache: {0}")]
    CorruptCache(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
