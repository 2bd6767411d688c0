use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid degree sequences: {0}")]
    InvalidSequences(String),

    #[error("state {0:?} lies outside [0,1]^4")]
    OutOfDomain([f64; 4]),

    #[error("step called with no active half-edges")]
    NoActiveStubs,

    #[error("balance equation violated at step {step}: {detail}")]
    BalanceViolation { step: u64, detail: String },

    #[error("fixed-point iterate increased at iteration {iteration} (component {component}, +{excess:e})")]
    NonMonotone {
        iteration: usize,
        component: usize,
        excess: f64,
    },

    #[error("point is not a fixed point of F (residual {0:e})")]
    NotFixedPoint(f64),

    #[error("matrix has a negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),

    #[error("reduction hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidModel(_)
            | Error::Hypothesis(_) => 2,
            Error::BalanceViolation { .. }
            | Error::NonMonotone { .. }
            | Error::NotFixedPoint(_)
            | Error::OutOfDomain(_)
            | Error::NegativeEntry(..)
            | Error::InvalidSequences(_)
            | Error::NoActiveStubs => 3,
            Error::Io(_) => 1,
        }
    }
}
