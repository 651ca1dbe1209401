use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario content. `field` is the dotted path of the offending key.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Simulation(#[from] otdm_core::Error),

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// The diagnostic written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, field) = match self {
            CliError::Config { field, .. } => ("config", Some(field.clone())),
            CliError::Io { path, .. } => ("io", Some(path.display().to_string())),
            CliError::Simulation(otdm_core::Error::InvalidParameter { name, .. }) => {
                ("invalid_parameter", Some(name.to_string()))
            }
            CliError::Simulation(_) => ("simulation", None),
            CliError::Usage(_) => ("usage", None),
        };
        let message = match self {
            CliError::Config { message, .. } => message.clone(),
            other => other.to_string(),
        };
        json!({ "error": { "kind": kind, "field": field, "message": message } })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Simulation(e.into())
    }
}
