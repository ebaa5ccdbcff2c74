use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible state sequence: {0}")]
    InfeasibleSequence(String),

    /// Enumeration would visit more sequences than the configured limit.
    #[error("enumeration guard exceeded: C_{t} = {count} sequences (limit {limit})")]
    GuardExceeded { t: usize, count: String, limit: u64 },

    #[error("type counts are not integral: {0}")]
    NonIntegralCounts(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("likelihood state vanished at t = {0}")]
    VanishingState(usize),

    #[error("not enough usable points: {0}")]
    InsufficientData(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors raised by a numeric safety guard rather than bad input.
    pub fn is_numeric_guard(&self) -> bool {
        matches!(self, Error::GuardExceeded { .. } | Error::VanishingState(_))
    }
}
