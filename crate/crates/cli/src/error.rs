use std::path::{Path, PathBuf};

use covplan_core::Error;
use serde::Serialize;

/// Exit codes: 0 success, 2 input, 3 geometry, 4 numeric, 5 output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorCode {
    MissingInput,
    ParseError,
    InvalidConfig,
    EmptyInput,
    InvalidScene,
    NoPathFound,
    OutOfTerrainBounds,
    NumericDomain,
    OutputLocked,
    OutputFailed,
}

impl ErrorCode {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::MissingInput | ErrorCode::ParseError | ErrorCode::InvalidConfig | ErrorCode::EmptyInput => 2,
            ErrorCode::InvalidScene | ErrorCode::NoPathFound | ErrorCode::OutOfTerrainBounds => 3,
            ErrorCode::NumericDomain => 4,
            ErrorCode::OutputLocked | ErrorCode::OutputFailed => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub code: ErrorCode,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            exit_code: code.exit_code(),
            message: message.into(),
            path: None,
            line: None,
        }
    }

    pub fn at(mut self, path: impl AsRef<Path>) -> Self {
        self.path = Some(path.as_ref().to_path_buf());
        self
    }

    pub fn missing(path: impl AsRef<Path>, what: &str) -> Self {
        CliError::new(ErrorCode::MissingInput, format!("{what} not found")).at(path)
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ErrorCode::InvalidConfig, message)
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Parse { path, line, message } => {
                let mut err = CliError::new(ErrorCode::ParseError, message).at(path);
                err.line = Some(line);
                err
            }
            Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::new(ErrorCode::MissingInput, source.to_string()).at(path)
            }
            Error::Io { path, .. } => CliError::new(ErrorCode::ParseError, message).at(path),
            Error::InvalidConfig(_) => CliError::new(ErrorCode::InvalidConfig, message),
            Error::EmptyInput(_) => CliError::new(ErrorCode::EmptyInput, message),
            Error::InvalidScene(_) => CliError::new(ErrorCode::InvalidScene, message),
            Error::NoPathFound => CliError::new(ErrorCode::NoPathFound, message),
            Error::OutOfTerrainBounds { .. } => CliError::new(ErrorCode::OutOfTerrainBounds, message),
            Error::Domain(_) => CliError::new(ErrorCode::NumericDomain, message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
