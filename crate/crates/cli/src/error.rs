use std::path::Path;

/// Failure reported on stderr as `{"error": category, "message": ...}`.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        Self { category, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn parse(path: &Path, line: usize, message: impl std::fmt::Display) -> Self {
        Self::new("parse", format!("{}:{line}: {message}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.category, "message": self.message }).to_string()
    }
}

impl From<csmark::Error> for CliError {
    fn from(e: csmark::Error) -> Self {
        Self::new(e.category(), e.to_string())
    }
}
