use std::fmt;

/// A failure with its process exit code: 2 usage, 3 format or I/O, 4 domain.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<cri_core::Error> for CliError {
    fn from(e: cri_core::Error) -> Self {
        use cri_core::Error::*;
        match e {
            InvalidInput(_) | InvalidIndex { .. } => Self::usage(e.to_string()),
            Domain(_) | BudgetExceeded { .. } => Self::domain(e.to_string()),
        }
    }
}
