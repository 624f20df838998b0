// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LrsmError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error(
        "window [{start}+1, {start}+{len}] with {lags} lags does not fit a series of length {n}"
    )]
    WindowOutOfBounds {
        start: usize,
        len: usize,
        lags: usize,
        n: usize,
    },

    #[error("window too short: {terms} likelihood terms available, order {order} needs at least {needed}")]
    WindowTooShort {
        terms: usize,
        order: usize,
        needed: usize,
    },

    #[error("series too short: length {n}, need at least {needed}")]
    SeriesTooShort { n: usize, needed: usize },

    #[error("unknown model `{0}`; valid models are A1, B1..B9, C1..C9")]
    UnknownModel(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = LrsmError> = std::result::Result<T, E>;
