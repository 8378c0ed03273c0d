//! Case-based evaluation: scenarios, test-case generation, coverage,
//! golden records with regression comparison, and elicitation review.

mod review;
mod run;
mod scenario;

use alloc::string::String;

use thiserror::Error;

pub use review::{elicitation_review, ReviewFinding, Rule};
pub use run::{
    compare_golden, record_golden, run_cases, CaseResult, Drift, FocusMarginals, GoldenRecord, Outcome,
    RegressionReport, RunResults, StatusChange, SCHEMA_VERSION,
};
pub use scenario::{coverage, generate_cases, Allowed, EvidenceSpec, Generation, Sampling, Scenario, TestCase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("focus variable `{0}` is also an evidence variable")]
    FocusInEvidence(String),
    #[error("evidence variable `{0}` listed twice")]
    DuplicateEvidence(String),
    #[error("evidence variable `{0}` has an empty allowed-state set")]
    EmptyAllowed(String),
    #[error("case space too large to index")]
    CaseSpaceTooLarge,
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("case set mismatch: {0}")]
    CaseSetMismatch(String),
}
