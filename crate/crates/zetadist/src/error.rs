//! Error types shared across the crate.

use thiserror::Error;

/// One field-level violation found while validating a product spec.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `coefficients[0][1].value`.
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problems in a spec: shape mismatches, out-of-range
    /// coefficients, zero direction vectors, malformed characters.
    #[error("invalid spec: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    /// An operation was called outside its mathematical domain (convergence
    /// margin <= 1, empty truncation policy, zero-order cumulant, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Classification by the sign theorems requires every coefficient value
    /// in {-1, 0, +1}; the offending value is reported verbatim.
    #[error("non-strict coefficients: {0}")]
    NonStrict(String),

    /// The Levy measure carries a negative atom, so it is not the jump
    /// measure of a distribution (sampling and the canonical triplet are
    /// undefined for it).
    #[error("not a distribution: {0}")]
    NegativeMass(String),

    /// Phase-target derivation found nothing to flip: every first-power
    /// merged atom is nonnegative, so no witness is expected to exist.
    #[error("no negative targets: {0}")]
    NoNegativeTargets(String),

    /// Unknown catalog entry name.
    #[error("unknown catalog entry {0:?} (see `catalog list`)")]
    UnknownEntry(String),

    /// An internal cross-check failed (truncated product vs exponentiated
    /// log-series, reduction residuals). Indicates a bug, not bad input.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![Violation {
            field: field.into(),
            message: message.into(),
        }])
    }

    /// Stable machine-readable kind tag, used by the CLI's JSON error channel.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::NonStrict(_) => "non_strict",
            Error::NegativeMass(_) => "negative_mass",
            Error::NoNegativeTargets(_) => "no_negative_targets",
            Error::UnknownEntry(_) => "unknown_entry",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
