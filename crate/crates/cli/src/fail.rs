use std::fmt;
use std::path::Path;

use serde::Serialize;

/// Error reported on stderr as one JSON object.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, field: None, message: message.into() }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        CliError { kind: "config", field: Some(field.to_string()), message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("io", format!("{}: {e}", path.display()))
    }

    /// Schema errors from serde; the offending field is lifted out of the message when present.
    pub fn schema(e: serde_json::Error) -> Self {
        let message = e.to_string();
        let field = message.split('`').nth(1).map(str::to_string);
        CliError { kind: "config", field, message }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", self.kind))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<eml_core::Error> for CliError {
    fn from(e: eml_core::Error) -> Self {
        use eml_core::Error::*;
        let kind = match &e {
            Parse { .. } => "parse",
            Invalid(_) => "invalid_circuit",
            Config(_) => "config",
            Unsupported(_) => "unsupported",
            Dem(_) => "dem",
            Decode(_) => "decode",
            Fit(_) => "fit",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new("json", e.to_string())
    }
}
