use thiserror::Error;

use crate::config::Violation;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VERDICT_FAIL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const ABORT: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),

    #[error("config syntax: {0}")]
    Syntax(String),

    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Violation>),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] nsf_core::Error),

    #[error("cannot write output: {0}")]
    Output(String),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Syntax(_) | CliError::Invalid(_) | CliError::Usage(_) => {
                exit::CONFIG
            }
            CliError::Core(_) | CliError::Output(_) => exit::ABORT,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
