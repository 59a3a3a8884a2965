use thiserror::Error;

/// Everything that can go wrong between reading a config and printing a value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("class gate: {0}")]
    ClassGate(String),
    #[error("sign pattern: {0}")]
    Pattern(String),
    #[error("point ({x1}, {x2}) lies outside the strip")]
    Outside { x1: f64, x2: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("quadrature missed its tolerance after {0} subdivisions")]
    Accuracy(usize),
    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("cup continuation stalled at ell = {last_good}: {reason}")]
    Continuation { last_good: f64, reason: String },
    #[error("construction: {0}")]
    Construction(String),
    #[error("no figure claims point ({x1}, {x2})")]
    Dispatch { x1: f64, x2: f64 },
    #[error("balancing did not settle after {0} passes")]
    NonTermination(usize),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::ClassGate(_) | Error::Pattern(_) => 3,
            Error::Verification(_) => 5,
            _ => 4,
        }
    }
}
