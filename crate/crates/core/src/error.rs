use thiserror::Error;

use crate::model::{Diagnostic, Fingerprint};

/// Failures of engine operations. Every variant maps to a stable
/// machine-readable code via [`Error::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown {family} `{id}`")]
    UnknownEntity { family: &'static str, id: String },

    #[error("precondition failed [{code}]: {detail}")]
    PreconditionFailed { code: String, detail: String },

    #[error("undefined operation: {0}")]
    UndefinedOperation(String),

    #[error("the two states are equal")]
    NoDelta,

    #[error("invalid state: {}", summarize(.0))]
    InvalidState(Vec<Diagnostic>),

    #[error("inconsistent history log: {0}")]
    InconsistentLog(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step {index} failed: {diagnostic}")]
    StepFailed { index: usize, diagnostic: Diagnostic },

    #[error("plan expects state {expected} but was given {actual}")]
    PreMismatch { expected: Fingerprint, actual: Fingerprint },

    #[error("plan ends in state {actual} but declares {expected}")]
    PostMismatch { expected: Fingerprint, actual: Fingerprint },

    #[error("the principal unit `{0}` cannot be abstracted")]
    PrincipalNotAbstractable(String),

    #[error("variable `{0}` is unbound")]
    UnboundVariable(String),

    #[error("variable `{variable}` expects a {expected} but is bound to `{found}`")]
    SortMismatch { variable: String, expected: &'static str, found: String },
}

fn summarize(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| d.code.as_str()).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub fn code(&self) -> &str {
        match self {
            Error::UnknownEntity { .. } => "UNKNOWN_ENTITY",
            Error::PreconditionFailed { .. } => "PRECONDITION_FAILED",
            Error::UndefinedOperation(_) => "UNDEFINED_OPERATION",
            Error::NoDelta => "NO_DELTA",
            Error::InvalidState(_) => "INVALID_STATE",
            Error::InconsistentLog(_) => "INCONSISTENT_LOG",
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::StepFailed { .. } => "STEP_FAILED",
            Error::PreMismatch { .. } => "PRE_MISMATCH",
            Error::PostMismatch { .. } => "POST_MISMATCH",
            Error::PrincipalNotAbstractable(_) => "PRINCIPAL_NOT_ABSTRACTABLE",
            Error::UnboundVariable(_) => "UNBOUND_VARIABLE",
            Error::SortMismatch { .. } => "SORT_MISMATCH",
        }
    }

    /// The precondition sub-code, when there is one.
    pub fn detail_code(&self) -> Option<&str> {
        match self {
            Error::PreconditionFailed { code, .. } => Some(code),
            _ => None,
        }
    }

    pub(crate) fn precondition(code: &str, detail: impl Into<String>) -> Self {
        Error::PreconditionFailed { code: code.to_owned(), detail: detail.into() }
    }

    pub(crate) fn unknown(family: &'static str, id: impl Into<String>) -> Self {
        Error::UnknownEntity { family, id: id.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
