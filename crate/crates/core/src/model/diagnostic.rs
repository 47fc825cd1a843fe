use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

/// A machine-readable finding about a model artifact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub entities: Vec<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &str, entities: Vec<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code: code.to_owned(), entities, message: message.into() }
    }

    pub fn warning(code: &str, entities: Vec<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code: code.to_owned(), entities, message: message.into() }
    }

    pub fn info(code: &str, entities: Vec<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Info, code: code.to_owned(), entities, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        write!(f, "{severity}[{}]: {}", self.code, self.message)?;
        if !self.entities.is_empty() {
            write!(f, " ({})", self.entities.join(", "))?;
        }
        Ok(())
    }
}

/// Diagnostic codes emitted by model validation.
pub mod codes {
    pub const EMPTY_ID: &str = "EMPTY_ID";
    pub const KEY_MISMATCH: &str = "KEY_MISMATCH";
    pub const UNRESOLVED_OWNER: &str = "UNRESOLVED_OWNER";
    pub const UNRESOLVED_PARENT: &str = "UNRESOLVED_PARENT";
    pub const PARENT_CYCLE: &str = "PARENT_CYCLE";
    pub const UNRESOLVED_SOURCE_TYPE: &str = "UNRESOLVED_SOURCE_TYPE";
    pub const UNRESOLVED_DEPENDENCY: &str = "UNRESOLVED_DEPENDENCY";
    pub const UNRESOLVED_MAINTAINER: &str = "UNRESOLVED_MAINTAINER";
    pub const CLUSTER_MAINTAINER_MISMATCH: &str = "CLUSTER_MAINTAINER_MISMATCH";
    pub const UNRESOLVED_USE: &str = "UNRESOLVED_USE";
    pub const USE_THEME_NOT_MAINTAINED: &str = "USE_THEME_NOT_MAINTAINED";
    pub const UNRESOLVED_CONTRACT_PARTY: &str = "UNRESOLVED_CONTRACT_PARTY";
    pub const CONTRACT_SELF_SERVICE: &str = "CONTRACT_SELF_SERVICE";
    pub const CONTRACT_PERIOD: &str = "CONTRACT_PERIOD";
    pub const CONTRACT_NOTICE: &str = "CONTRACT_NOTICE";
    pub const UNRESOLVED_COMMITMENT: &str = "UNRESOLVED_COMMITMENT";
    pub const COMMITMENT_TO_OWNED_SOURCE: &str = "COMMITMENT_TO_OWNED_SOURCE";
    pub const SINGLETON_VIOLATION: &str = "SINGLETON_VIOLATION";
    pub const SOURCEMENT_THEME: &str = "SOURCEMENT_THEME";
    pub const SOURCEMENT_BASIC: &str = "SOURCEMENT_BASIC";
    pub const SOURCEMENT_PROVIDERS: &str = "SOURCEMENT_PROVIDERS";
    pub const UNRESOLVED_ATTRIBUTE_REF: &str = "UNRESOLVED_ATTRIBUTE_REF";
    pub const UNRESOLVED_REF: &str = "UNRESOLVED_REF";
    pub const STRATIFICATION_VIOLATION: &str = "STRATIFICATION_VIOLATION";
    pub const MISSING_ATTRIBUTE: &str = "MISSING_ATTRIBUTE";
    pub const DEPENDENCY_CYCLE: &str = "DEPENDENCY_CYCLE";
}
