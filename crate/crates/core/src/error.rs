use thiserror::Error;

use crate::family::BalanceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("budget exceeded: {what} needs {required}, budget is {budget}")]
    BudgetExceeded {
        what: String,
        required: u128,
        budget: u128,
    },

    #[error("construction failed after {attempts} attempt(s): {reason}")]
    ConstructionFailed {
        attempts: usize,
        reason: String,
        best: Option<Box<BalanceReport>>,
    },

    #[error("certificate check failed: {0}")]
    Verification(String),

    #[error("numeric overflow in {0}")]
    NumericOverflow(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn budget(what: impl Into<String>, required: u128, budget: u128) -> Self {
        Error::BudgetExceeded {
            what: what.into(),
            required,
            budget,
        }
    }
}
