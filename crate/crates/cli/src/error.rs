//! Error-to-exit-code mapping with a machine-readable stderr object.

use effmed_core::CoreError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorCode {
    /// Missing or unparseable inputs: exit 2.
    #[serde(rename = "E_INPUT")]
    Input,
    /// Precondition or contract violations in otherwise readable inputs:
    /// exit 2.
    #[serde(rename = "E_VALIDATION")]
    Validation,
    /// Numerical failures (singular or unconverging systems): exit 3.
    #[serde(rename = "E_NUMERIC")]
    Numeric,
}

impl ErrorCode {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::Input | ErrorCode::Validation => 2,
            ErrorCode::Numeric => 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::SingularSystem { .. } | CoreError::IllConditioned { .. } => {
                ErrorCode::Numeric
            }
            CoreError::Io(_) | CoreError::Parse(_) => ErrorCode::Input,
            _ => ErrorCode::Validation,
        };
        Self::new(code, e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}
