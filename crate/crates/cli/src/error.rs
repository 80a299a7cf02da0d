use std::fmt;

use serde::Serialize;

/// A config problem, located by a dotted field path.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Failure {
    Other,
    Config,
    Numerical,
    Precondition,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Other => 1,
            Failure::Config => 2,
            Failure::Numerical => 3,
            Failure::Precondition => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: Failure,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

/// Classifies an error chain for the exit code.
pub fn classify(err: &anyhow::Error) -> ErrorReport {
    let mut kind = Failure::Other;
    let mut field = None;
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<ConfigError>() {
            kind = Failure::Config;
            field = Some(c.field.clone());
            break;
        }
        if let Some(e) = cause.downcast_ref::<critwave::Error>() {
            kind = if e.is_numerical() {
                Failure::Numerical
            } else if e.is_precondition() || matches!(e, critwave::Error::DataTooLarge { .. }) {
                Failure::Precondition
            } else {
                Failure::Config
            };
            break;
        }
    }
    ErrorReport { status: "error", kind, exit_code: kind.exit_code(), field, message: format!("{err:#}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let e = anyhow::Error::new(ConfigError::new("grid.nodes", "too few"));
        assert_eq!(classify(&e).exit_code, 2);
        let e = anyhow::Error::new(critwave::Error::Instability { tau: 1.0, growth: 10.0 }).context("evolving");
        assert_eq!(classify(&e).exit_code, 3);
        let e = anyhow::Error::new(critwave::Error::Precondition("x".into()));
        assert_eq!(classify(&e).exit_code, 4);
        assert_eq!(classify(&anyhow::anyhow!("disk full")).exit_code, 1);
    }
}
