use thiserror::Error;

use crate::scenario::Diagnostic;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown operation {name:?}; allowed: {}", .allowed.join(", "))]
    UnknownOperation { name: String, allowed: Vec<String> },
    #[error(transparent)]
    Compute(#[from] dcap_core::Error),
}

fn list(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 0 is reserved for completed runs, whatever their verdicts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse(_) | CliError::Invalid(_) => 2,
            CliError::UnknownOperation { .. } => 3,
            CliError::Write { .. } | CliError::Compute(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
