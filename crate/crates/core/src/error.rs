use thiserror::Error;

use crate::report::ConsistencyReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown site `{0}`")]
    UnknownSite(String),

    #[error("configuration space has {configs} configurations, above the cap of {cap}")]
    SpaceTooLarge { configs: u128, cap: usize },

    #[error("probability table sums to {sum}, too far from 1 to renormalize")]
    Normalization { sum: f64 },

    #[error("conditioning on an event of probability zero")]
    ConditioningOnNull,

    #[error("one-point conditional at site `{site}` is undefined for boundary {boundary:?}")]
    UndefinedConditional { site: String, boundary: Vec<usize> },

    #[error("positivity required: {0}")]
    NotPositive(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(Box<ConsistencyReport>),

    #[error("state {state} is not a positivity point at site `{site}`")]
    InvalidPositivityPoint { site: String, state: usize },

    #[error("reconstruction depends on enumeration or base configuration (max deviation {deviation:e})")]
    InvarianceFailure { deviation: f64 },

    #[error("potential term on {sites:?} violates the neighborhood support condition")]
    Support { sites: Vec<String> },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
