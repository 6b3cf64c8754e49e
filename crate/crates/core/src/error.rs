use thiserror::Error;

use crate::fieldexpr::SyntaxError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by a jet whose value has magnitude {magnitude:e}")]
    DivisionByZeroValue { magnitude: f64 },

    #[error("cannot differentiate an order-0 jet")]
    OrderExhausted,

    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("coupling constant g = 0 makes the gauge-field rule singular")]
    ZeroCoupling,

    #[error("configuration error at {pointer}: {message}")]
    Config { pointer: String, message: String },
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
