//! Object-oriented layer over plain networks: variable classes with
//! inheritance, parameterized templates, stubs, and composition of
//! fragments into a single compiled network.
//!
//! Fragments talk to each other only through explicit [`Binding`]s from an
//! input variable of one fragment to a resident variable of another. A
//! compiled variable takes the name of its home resident (or of the
//! exogenous input that declares it).

mod class;
mod compile;
mod compose;
mod template;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::constraint::Direction;
use crate::cpt::{CptError, CptSpec};
use crate::network::{StateSpace, ValidationReport};

pub use class::{resolve_class, ClassHierarchy, ResolvedClass, Sourced};
pub use compile::{
    all_fragments, build_model, compile, fragment_var_states, instantiate_class_constraints, BuiltModel,
};
pub use compose::{compose, substitute_stub, ComposedModel, CompositionVariable, VarSource};
pub use template::{
    instance_name, instantiate_template, is_identifier, ParamKind, ParamValue, Template, TemplateParam,
};

/// Conditioning variable owned by another fragment, or declared exogenous
/// by giving it a prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputVar {
    pub name: String,
    pub class_ref: Option<String>,
    pub states: Option<StateSpace>,
    /// Prior used when the input is left unbound.
    pub prior: Option<Vec<f64>>,
    pub description: String,
    pub comments: Vec<String>,
}

impl InputVar {
    pub fn new(name: impl Into<String>, states: StateSpace) -> Self {
        InputVar {
            name: name.into(),
            class_ref: None,
            states: Some(states),
            prior: None,
            description: String::new(),
            comments: Vec::new(),
        }
    }
}

/// Variable whose CPT this fragment supplies. Missing states or CPT are
/// taken from the variable's class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidentVar {
    pub name: String,
    pub class_ref: Option<String>,
    pub states: Option<StateSpace>,
    pub parents: Vec<String>,
    pub cpt: Option<CptSpec>,
    pub description: String,
    pub comments: Vec<String>,
}

impl ResidentVar {
    pub fn new(name: impl Into<String>, states: StateSpace, parents: &[&str], cpt: CptSpec) -> Self {
        ResidentVar {
            name: name.into(),
            class_ref: None,
            states: Some(states),
            parents: parents.iter().map(|p| String::from(*p)).collect(),
            cpt: Some(cpt),
            description: String::new(),
            comments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fragment {
    pub name: String,
    pub is_stub: bool,
    pub description: String,
    pub comments: Vec<String>,
    pub inputs: Vec<InputVar>,
    pub residents: Vec<ResidentVar>,
}

impl Fragment {
    pub fn new(name: impl Into<String>) -> Self {
        Fragment {
            name: name.into(),
            is_stub: false,
            description: String::new(),
            comments: Vec::new(),
            inputs: Vec::new(),
            residents: Vec::new(),
        }
    }

    pub fn with_input(mut self, input: InputVar) -> Self {
        self.inputs.push(input);
        self
    }

    pub fn with_resident(mut self, var: ResidentVar) -> Self {
        self.residents.push(var);
        self
    }

    pub fn input(&self, name: &str) -> Option<&InputVar> {
        self.inputs.iter().find(|v| v.name == name)
    }

    pub fn resident(&self, name: &str) -> Option<&ResidentVar> {
        self.residents.iter().find(|v| v.name == name)
    }
}

/// Inheritance constraint: every instance of the class (as child) moves in
/// `direction` along each of its parents whose class is-a `parent_class`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassConstraint {
    pub target: String,
    pub parent_class: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableClass {
    pub name: String,
    pub parent: Option<String>,
    pub states: Option<StateSpace>,
    pub default_cpt: Option<CptSpec>,
    pub description: Option<String>,
    pub constraints: Option<Vec<ClassConstraint>>,
    pub comments: Vec<String>,
}

impl VariableClass {
    pub fn new(name: impl Into<String>) -> Self {
        VariableClass {
            name: name.into(),
            parent: None,
            states: None,
            default_cpt: None,
            description: None,
            constraints: None,
            comments: Vec::new(),
        }
    }
}

/// `(fragment, variable)` reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarRef {
    pub fragment: String,
    pub variable: String,
}

impl VarRef {
    pub fn new(fragment: impl Into<String>, variable: impl Into<String>) -> Self {
        VarRef { fragment: fragment.into(), variable: variable.into() }
    }
}

impl core::fmt::Display for VarRef {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}.{}", self.fragment, self.variable)
    }
}

/// Explicit wiring: input variable of one fragment → resident of another.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Binding {
    pub connections: BTreeMap<VarRef, VarRef>,
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn connect(mut self, input: VarRef, resident: VarRef) -> Self {
        self.connections.insert(input, resident);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FragmentError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("cycle in class hierarchy: {}", .0.join(" -> "))]
    ClassCycle(Vec<String>),
    #[error("`{variable}` has no {feature} (neither declared nor inherited)")]
    MissingFeature { variable: String, feature: &'static str },
    #[error("duplicate fragment `{0}`")]
    DuplicateFragment(String),
    #[error("fragment `{fragment}` declares `{variable}` twice")]
    DuplicateVariable { fragment: String, variable: String },
    #[error("fragment `{fragment}`: parent `{parent}` of `{variable}` is neither input nor resident")]
    UnknownParent { fragment: String, variable: String, parent: String },
    #[error("unknown fragment `{0}`")]
    UnknownFragment(String),
    #[error("`{0}` is not an input variable")]
    UnknownInput(VarRef),
    #[error("`{0}` is not a resident variable")]
    UnknownResident(VarRef),
    #[error("`{variable}` has a home in both `{first}` and `{second}`")]
    HomeConflict { variable: String, first: String, second: String },
    #[error("interface mismatch: `{input}` has states {input_states} but `{resident}` has {resident_states}")]
    InterfaceMismatch { input: VarRef, resident: VarRef, input_states: String, resident_states: String },
    #[error("cycle across fragments: {}", .0.join(" -> "))]
    CrossCycle(Vec<String>),
    #[error("input `{0}` is neither bound nor given an exogenous prior")]
    UnboundInput(VarRef),
    #[error("`{0}` is not a stub in the model")]
    NotAStub(String),
    #[error("replacement does not match stub interface: {0}")]
    StubInterface(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("template has no parameter `{0}`")]
    UnknownParameter(String),
    #[error("`{0}` is not a legal identifier")]
    IllegalIdentifier(String),
    #[error("parameter `{0}` expects {1}")]
    ParameterKind(String, &'static str),
    #[error("template instantiation produced an invalid fragment: {}", .0.join("; "))]
    Instantiation(Vec<String>),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("CPT of `{variable}`: {source}")]
    Cpt { variable: String, source: CptError },
    #[error("exogenous prior of `{variable}` has {found} entries, expected {expected}")]
    PriorLength { variable: String, expected: usize, found: usize },
    #[error("compiled network failed validation: {}", describe(.0))]
    Invalid(ValidationReport),
}

fn describe(report: &ValidationReport) -> String {
    let parts: Vec<String> = report
        .findings
        .iter()
        .map(|f| match &f.variable {
            Some(v) => alloc::format!("{v}: {}", f.message),
            None => f.message.clone(),
        })
        .collect();
    parts.join("; ")
}
