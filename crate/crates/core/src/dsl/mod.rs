//! The `.bnkb` knowledge-base text format.
//!
//! A knowledge base holds a definitions registry, variable classes,
//! templates, fragments and stubs, template instances, models (fragment
//! selections with bindings and stub replacements), constraints and
//! scenarios. [`parse_kb`] is total: malformed input yields diagnostics,
//! never a panic. [`serialize_kb`] writes the canonical form, grouped by
//! kind with declaration order kept inside each kind, so that
//! `parse(serialize(kb)) == kb` and serialization is idempotent.
//!
//! `#` comments directly before a declaration, or before an `input`/`var`
//! line, are attached to it and survive a round trip. Other comments are
//! dropped. The grammar is in `docs/grammar.md`.

mod lexer;
mod parser;
mod writer;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::fragments::{Fragment, ParamValue, Template, VarRef, VariableClass};
use crate::harness::Scenario;
use crate::network::StateSpace;

pub use writer::{format_label, format_name, format_number};
pub(crate) use writer::{
    fragment_body_text, write_class, write_constraint, write_cpt, write_definition, write_fragment, write_instance,
    write_model, write_scenario, write_template,
};

/// Location of a token; line and column are 1-based and count characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub message: String,
    /// Tokens that would have been accepted, for syntax errors.
    pub expected: Vec<String>,
}

impl Diagnostic {
    pub(crate) fn new(span: SourceSpan, message: String) -> Self {
        Diagnostic { span, message, expected: Vec::new() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// Spans of named items, keyed by path: `fragment:F`, `fragment:F/var:A`,
/// `fragment:F/input:X`, `class:C`, `template:T`, `instance:3`, `model:M`,
/// `constraint:N`, `scenario:S`, `define:D`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub spans: BTreeMap<String, SourceSpan>,
}

impl SourceMap {
    pub fn get(&self, path: &str) -> Option<&SourceSpan> {
        self.spans.get(path)
    }
}

/// Registry entry: the agreed state space and meaning of a variable name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Definition {
    pub states: StateSpace,
    pub description: String,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub template: String,
    /// Parameter bindings in written order.
    pub bindings: Vec<(String, ParamValue)>,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BindDecl {
    pub input: VarRef,
    pub target: VarRef,
}

/// A named selection of fragments wired together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDecl {
    pub name: String,
    pub fragments: Vec<String>,
    pub bindings: Vec<BindDecl>,
    /// `(stub, replacement)` pairs applied in order after composition.
    pub replacements: Vec<(String, String)>,
    pub description: String,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedConstraint {
    pub name: String,
    pub constraint: Constraint,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KnowledgeBase {
    pub definitions: BTreeMap<String, Definition>,
    pub classes: Vec<VariableClass>,
    pub templates: Vec<Template>,
    /// Fragments and stubs in declaration order.
    pub fragments: Vec<Fragment>,
    pub instances: Vec<Instance>,
    pub models: Vec<ModelDecl>,
    pub constraints: Vec<NamedConstraint>,
    pub scenarios: Vec<Scenario>,
}

impl KnowledgeBase {
    pub fn fragment(&self, name: &str) -> Option<&Fragment> {
        self.fragments.iter().find(|f| f.name == name)
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}

/// Words with a meaning somewhere in the grammar. Names and labels equal to
/// one of them are written quoted.
pub const KEYWORDS: [&str; 37] = [
    "define",
    "class",
    "template",
    "fragment",
    "stub",
    "instance",
    "model",
    "constraint",
    "scenario",
    "states",
    "ordered",
    "description",
    "input",
    "var",
    "given",
    "prior",
    "cpt",
    "partition",
    "when",
    "because",
    "noisyor",
    "links",
    "leak",
    "deterministic",
    "fragments",
    "bind",
    "replace",
    "with",
    "focus",
    "evidence",
    "exhaustive",
    "sampled",
    "seed",
    "unanticipated",
    "nonincreasing",
    "nondecreasing",
    "self",
];

pub fn parse_kb(text: &str) -> Result<KnowledgeBase, Vec<Diagnostic>> {
    parse_kb_with_spans(text, "<input>").map(|(kb, _)| kb)
}

/// Parses `text`, recording `file` in every span.
pub fn parse_kb_with_spans(text: &str, file: &str) -> Result<(KnowledgeBase, SourceMap), Vec<Diagnostic>> {
    parser::parse(text, file)
}

pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    writer::write_kb(kb)
}
