use alloc::string::String;

use crate::expr::{EvalError, ParseError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("resonance rule violated: eps = {eps}, cells = {cells}: {reason}")]
    Resonance {
        eps: f64,
        cells: usize,
        reason: &'static str,
    },
    #[error("bounds violated: {0}")]
    Bounds(String),
    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::Invalid(alloc::format!($($arg)*)) };
}
pub(crate) use invalid;
