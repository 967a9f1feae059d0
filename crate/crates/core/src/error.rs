use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for {len} columns")]
    InvalidIndex { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("combinatorial budget exceeded: {required} subsets requested, limit is {limit}")]
    BudgetExceeded { required: u128, limit: u128 },
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
