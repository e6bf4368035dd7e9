use std::fmt;
use std::path::PathBuf;

use cfslab_core::error::CfsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", ConfigMessage { path, line: *line, field: field.as_deref(), message })]
    Config { path: PathBuf, line: Option<usize>, field: Option<String>, message: String },

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("numerical failure: {0}")]
    Numerical(#[from] CfsError),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration or paths, 3 for
    /// failures inside the numerics.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

struct ConfigMessage<'a> {
    path: &'a PathBuf,
    line: Option<usize>,
    field: Option<&'a str>,
    message: &'a str,
}

impl fmt::Display for ConfigMessage<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = self.field {
            write!(f, ": {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}
