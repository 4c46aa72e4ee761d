use serde_json::{json, Value as Json};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),

    #[error("{0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Invalid(_) => "invalid-input",
            CliError::Io(_) => "io",
            CliError::Numeric(_) => "numeric-failure",
        }
    }

    pub fn diagnostic(&self, command: Option<&str>) -> Json {
        json!({
            "command": command,
            "error": { "code": self.exit_code(), "kind": self.kind(), "message": self.to_string() },
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

impl From<subspec::Error> for CliError {
    fn from(e: subspec::Error) -> Self {
        use subspec::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Invalid(e.to_string()),
            E::Io(io) => CliError::Io(io),
            E::NumericFailure(_) | E::EigenNotConverged { .. } | E::DecompositionFailure(_) => CliError::Numeric(e.to_string()),
        }
    }
}
