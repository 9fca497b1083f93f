//! Non-fatal findings surfaced by the pipeline.
//!
//! A warning never aborts a computation; it travels with the result so the
//! final report can list every adjustment and anomaly alongside a stable
//! machine-readable code.

use std::fmt;

/// Stable identifiers for warning conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarningCode {
    /// A matrix row read from file did not sum to one and was renormalized.
    RowRenormalized,
    /// A transient state had no observed exits; its row was imputed as lost.
    ZeroRowImputed,
    /// Raw cure probabilities increase with months past due.
    NonMonotoneCureProbabilities,
    /// Adjacent survival points violate the non-increasing requirement.
    NonMonotoneSurvivalPoints,
    /// Some simulated paths were still unabsorbed at the step cap.
    UnabsorbedPaths,
    /// Zero-weight observations were dropped during estimation input prep.
    ZeroWeightDropped,
    /// The survival fit could not be produced; the report omits the cure rate.
    FitUnavailable,
}

impl WarningCode {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningCode::RowRenormalized => "ROW_RENORMALIZED",
            WarningCode::ZeroRowImputed => "ZERO_ROW_IMPUTED",
            WarningCode::NonMonotoneCureProbabilities => "NON_MONOTONE_CURE_PROBABILITIES",
            WarningCode::NonMonotoneSurvivalPoints => "NON_MONOTONE_SURVIVAL_POINTS",
            WarningCode::UnabsorbedPaths => "UNABSORBED_PATHS",
            WarningCode::ZeroWeightDropped => "ZERO_WEIGHT_DROPPED",
            WarningCode::FitUnavailable => "FIT_UNAVAILABLE",
        }
    }
}

impl fmt::Display for WarningCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A machine-readable code paired with a human explanation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub code: WarningCode,
    pub message: String,
}

impl Warning {
    pub fn new(code: WarningCode, message: impl Into<String>) -> Self {
        Warning {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}
