// SPDX-License-Identifier: MIT OR Apache-2.0

use lrsm_bench::BenchError;
use lrsm_core::LrsmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Write {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Write { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<LrsmError> for CliError {
    fn from(e: LrsmError) -> Self {
        let msg = e.to_string();
        match e {
            LrsmError::UnknownModel(_) => CliError::Input(msg),
            LrsmError::Degenerate(_) | LrsmError::Numerical(_) => CliError::Numeric(msg),
            LrsmError::InvalidParams(_)
            | LrsmError::InvalidArgument(_)
            | LrsmError::IndexOutOfRange { .. }
            | LrsmError::WindowOutOfBounds { .. }
            | LrsmError::WindowTooShort { .. }
            | LrsmError::SeriesTooShort { .. } => CliError::Infeasible(msg),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Core(c) => c.into(),
            BenchError::NoReplicates => CliError::Infeasible(e.to_string()),
            BenchError::Json(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json: {e}"))
    }
}
