use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numeric failure in {op}: {source}")]
    Numeric {
        op: &'static str,
        #[source]
        source: thermoflow_core::Error,
    },

    #[error("gate {gate} failed: {detail}")]
    Gate { gate: &'static str, detail: String },

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Config errors and unwritable output directories exit with 2;
    /// numeric failures and failed gates with 3.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Numeric { .. } | CliError::Gate { .. } => EXIT_NUMERIC,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags a core error with the operation that raised it.
pub(crate) trait NumericContext<T> {
    fn during(self, op: &'static str) -> CliResult<T>;
    /// For core constructors fed straight from config values.
    fn at_key(self, path: &str) -> CliResult<T>;
}

impl<T> NumericContext<T> for thermoflow_core::Result<T> {
    fn during(self, op: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Numeric { op, source })
    }

    fn at_key(self, path: &str) -> CliResult<T> {
        self.map_err(|e| CliError::config(path, e))
    }
}
