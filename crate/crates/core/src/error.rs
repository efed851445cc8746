use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile parse error: {0}")]
    ProfileParse(String),

    #[error("test function support [{lo}, {hi}] leaves the lattice window")]
    SupportOverflow { lo: f64, hi: f64 },

    #[error("bond current for bond ({0}, {1}) was not tracked")]
    MissingBond(i64, i64),

    #[error("unstable step at time level {step}: density {value:.3e} left [0, 1]; {advice}")]
    Unstable {
        step: usize,
        value: f64,
        advice: String,
    },

    #[error("walk kernel lost {lost:.3e} of its mass; widen the site range")]
    MassLoss { lost: f64 },

    #[error("no admissible root: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
