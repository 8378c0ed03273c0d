//! Belief-network engineering core.
//!
//! Modular network fragments (variable classes, parameterized templates,
//! stubs) are composed through explicit interface bindings and compiled into
//! flat discrete Bayesian networks. The compiled networks feed exact
//! inference by variable elimination and the evaluation tools built on top
//! of it: quadratic-score importance analysis, conflict scoring for
//! out-of-scope evidence, case-based regression testing and elicitation
//! review lints.
//!
//! The crate is `no_std` and only needs `alloc`. File IO, the version store
//! and the command-line front end live in the `bnforge` crate.
//!
//! Module map:
//!
//! * [`network`], [`cpt`], [`constraint`]: core network types, CPT forms and
//!   their expansion, validation and declared-constraint checks.
//! * [`dsl`]: the `.bnkb` knowledge-base text format.
//! * [`fragments`]: class hierarchy, templates, composition and compilation.
//! * [`inference`]: variable elimination plus the brute-force oracle.
//! * [`evaluation`]: importance, synergy sampling, conflict and reports.
//! * [`harness`]: scenarios, case generation, golden records and review.
//! * [`versioning`]: content ids and structural diffs between KB versions.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod constraint;
pub mod cpt;
pub mod dsl;
pub mod evaluation;
pub mod fragments;
pub mod harness;
pub mod inference;
pub mod network;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod versioning;

pub use constraint::{check_constraints, Constraint, ConstraintReport, Direction, Relation};
pub use cpt::{expand_cpt, ConfigPattern, CptForm, CptSpec, PartitionElement, Selector};
pub use dsl::{parse_kb, serialize_kb, Diagnostic, KnowledgeBase, SourceSpan};

pub use inference::{brute_force_posterior, evidence_probability, posterior, InferenceError, Marginal};
pub use network::{
    validate_network, CompiledNetwork, Evidence, NetworkBuilder, NetworkError, Severity, StateSpace, ValidationReport,
    Variable,
};

/// Absolute tolerance used when checking that a probability vector sums to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
