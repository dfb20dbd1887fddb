use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration; the message names the field.
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn config(field: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {reason}"))
    }

    /// Classifies a library error; `context` prefixes parameter names so the
    /// message points at the config key.
    pub fn from_lib(err: qipf::Error, context: &str) -> Self {
        use qipf::Error as E;
        let join = |field: &str| {
            if context.is_empty() {
                field.to_string()
            } else {
                format!("{context}.{field}")
            }
        };
        match err {
            E::InvalidParameter { field, reason } => CliError::config(&join(field), reason),
            E::OrderOverflow(n) => CliError::config(
                &join("num_modes"),
                format!("hermite order {n} is too large"),
            ),
            E::EmptySamples | E::NonFinite(_) | E::TooShort { .. } => {
                CliError::config(context, err)
            }
            E::Integration { .. } | E::Numerical { .. } | E::Domain(_) => {
                CliError::Numerical(err.to_string())
            }
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
