//! Compiled network types, evidence and structural validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpt::{configuration_count, CptForm};
use crate::NORMALIZATION_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("state space needs at least two states, got {0}")]
    TooFewStates(usize),
    #[error("duplicate state label `{0}`")]
    DuplicateState(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("variable `{0}` assigned twice")]
    DuplicateAssignment(String),
    #[error("variable `{0}` is missing a CPT")]
    MissingCpt(String),
}

/// Ordered list of state labels for a discrete variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StateSpace {
    states: Vec<String>,
    ordered: bool,
}

impl StateSpace {
    pub fn new<I, S>(states: I, ordered: bool) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.len() < 2 {
            return Err(NetworkError::TooFewStates(states.len()));
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(NetworkError::DuplicateState(s.clone()));
            }
        }
        Ok(StateSpace { states, ordered })
    }

    /// Builds a space without checking invariants. Template bodies use this
    /// for state lists that still contain placeholders.
    pub(crate) fn unchecked(states: Vec<String>, ordered: bool) -> Self {
        StateSpace { states, ordered }
    }

    /// Two-state space `{t, f}`; the first state is the "true" state.
    pub fn boolean() -> Self {
        StateSpace { states: vec!["t".into(), "f".into()], ordered: false }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn is_boolean(&self) -> bool {
        self.states.len() == 2
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

impl fmt::Display for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ordered {
            f.write_str("ordered ")?;
        }
        write!(f, "{{{}}}", self.states.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Variable {
    pub name: String,
    pub states: StateSpace,
    pub class_ref: Option<String>,
    pub description: String,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: StateSpace) -> Self {
        Variable { name: name.into(), states, class_ref: None, description: String::new() }
    }
}

/// Which fragment supplied a compiled variable's CPT, and in what form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub fragment: String,
    pub form: CptForm,
}

/// Assignment of one state per observed variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn insert(&mut self, variable: impl Into<String>, state: impl Into<String>) -> Result<(), NetworkError> {
        let variable = variable.into();
        if self.assignments.contains_key(&variable) {
            return Err(NetworkError::DuplicateAssignment(variable));
        }
        self.assignments.insert(variable, state.into());
        Ok(())
    }

    /// Builder-style insert; panics on a repeated variable.
    pub fn with(mut self, variable: impl Into<String>, state: impl Into<String>) -> Self {
        self.insert(variable, state).expect("variable assigned twice");
        self
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut ev = Evidence::new();
        for (v, s) in pairs {
            ev.insert(v, s)?;
        }
        Ok(ev)
    }

    /// Union of two disjoint assignments.
    pub fn merged(&self, other: &Evidence) -> Result<Evidence, NetworkError> {
        let mut out = self.clone();
        for (v, s) in other.iter() {
            out.insert(v, s)?;
        }
        Ok(out)
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.assignments.get(variable).map(String::as_str)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.assignments.contains_key(variable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments.iter().map(|(v, s)| (v.as_str(), s.as_str()))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, s) in self.iter() {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{v}={s}")?;
        }
        Ok(())
    }
}

/// Flat DAG with fully expanded conditional probability tables.
///
/// Rows of `cpts[i]` are indexed by the configurations of `parents[i]` in
/// lexicographic order (first parent most significant); each row is a
/// distribution over the states of variable `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledNetwork {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
    provenance: Vec<Provenance>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl CompiledNetwork {
    /// Assembles a network. Only name resolution is checked here; cycles,
    /// table shapes and normalization are reported by [`validate_network`].
    pub fn new(
        variables: Vec<Variable>,
        parents: Vec<Vec<String>>,
        cpts: Vec<Vec<Vec<f64>>>,
        provenance: Vec<Provenance>,
    ) -> Result<Self, NetworkError> {
        let mut index = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(NetworkError::DuplicateVariable(v.name.clone()));
            }
        }
        if cpts.len() != variables.len() {
            let missing = variables.get(cpts.len()).map(|v| v.name.clone()).unwrap_or_default();
            return Err(NetworkError::MissingCpt(missing));
        }
        let parents = parents
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| index.get(p).copied().ok_or_else(|| NetworkError::UnknownVariable(p.clone())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut provenance = provenance;
        provenance.resize(variables.len(), Provenance { fragment: String::new(), form: CptForm::Explicit });
        Ok(CompiledNetwork { variables, parents, cpts, provenance, index })
    }

    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn find(&self, name: &str) -> Option<&Variable> {
        self.index_of(name).map(|i| &self.variables[i])
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn parent_names(&self, i: usize) -> Vec<&str> {
        self.parents[i].iter().map(|&p| self.variables[p].name.as_str()).collect()
    }

    pub fn cpt(&self, i: usize) -> &[Vec<f64>] {
        &self.cpts[i]
    }

    pub fn provenance(&self, i: usize) -> &Provenance {
        &self.provenance[i]
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].states.len()
    }

    /// Replaces one table row. Used by tests and perturbation experiments.
    pub fn set_row(&mut self, variable: &str, row: usize, values: Vec<f64>) -> Result<(), NetworkError> {
        let i = self.index_of(variable).ok_or_else(|| NetworkError::UnknownVariable(variable.to_string()))?;
        if let Some(r) = self.cpts[i].get_mut(row) {
            *r = values;
        }
        Ok(())
    }

    /// Resolves evidence to `(variable index, state index)` pairs.
    pub fn resolve_evidence(&self, evidence: &Evidence) -> Result<Vec<(usize, usize)>, NetworkError> {
        evidence
            .iter()
            .map(|(v, s)| {
                let i = self.index_of(v).ok_or_else(|| NetworkError::UnknownVariable(v.to_string()))?;
                let k = self.variables[i]
                    .states
                    .index_of(s)
                    .ok_or_else(|| NetworkError::UnknownState { variable: v.to_string(), state: s.to_string() })?;
                Ok((i, k))
            })
            .collect()
    }

    /// Topological order of variable indices, ties broken by name. `None`
    /// when the parent graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: BTreeSet<(&str, usize)> =
            (0..n).filter(|&i| indegree[i] == 0).map(|i| (self.variables[i].name.as_str(), i)).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&first) = ready.iter().next() {
            ready.remove(&first);
            let i = first.1;
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert((self.variables[c].name.as_str(), c));
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Line-oriented canonical rendering used for content hashing.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.variables.iter().enumerate() {
            out.push_str(&format!("var {} {}", v.name, v.states));
            out.push_str(&format!(" parents [{}]", self.parent_names(i).join(", ")));
            out.push_str(&format!(" from {} {:?}\n", self.provenance[i].fragment, self.provenance[i].form));
            for row in &self.cpts[i] {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                out.push_str(&format!("  {}\n", cells.join(" ")));
            }
        }
        out
    }

    /// Lowercase hex SHA-256 of [`Self::canonical_text`].
    pub fn content_hash(&self) -> String {
        crate::versioning::sha256_hex(self.canonical_text().as_bytes())
    }
}

/// Convenience constructor for hand-built networks.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    parents: Vec<Vec<String>>,
    cpts: Vec<Vec<Vec<f64>>>,
}

impl NetworkBuilder {
    pub fn node(mut self, name: &str, states: &[&str], parents: &[&str], rows: Vec<Vec<f64>>) -> Self {
        let space = StateSpace::new(states.iter().copied(), false).expect("valid state space");
        self.variables.push(Variable::new(name, space));
        self.parents.push(parents.iter().map(|p| p.to_string()).collect());
        self.cpts.push(rows);
        self
    }

    pub fn variable(mut self, variable: Variable, parents: &[&str], rows: Vec<Vec<f64>>) -> Self {
        self.variables.push(variable);
        self.parents.push(parents.iter().map(|p| p.to_string()).collect());
        self.cpts.push(rows);
        self
    }

    pub fn build(self) -> Result<CompiledNetwork, NetworkError> {
        let provenance =
            self.variables.iter().map(|_| Provenance { fragment: String::new(), form: CptForm::Explicit }).collect();
        CompiledNetwork::new(self.variables, self.parents, self.cpts, provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationFinding {
    pub severity: Severity,
    pub variable: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<ValidationFinding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, severity: Severity, variable: Option<&str>, message: String) {
        self.findings.push(ValidationFinding { severity, variable: variable.map(String::from), message });
    }
}

/// Checks acyclicity, table dimensions and row normalization.
pub fn validate_network(net: &CompiledNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();

    for cycle in find_cycles(net) {
        let names: Vec<&str> = cycle.iter().map(|&i| net.variables[i].name.as_str()).collect();
        report.push(Severity::Error, None, format!("cycle {}", names.join(",")));
    }

    for (i, v) in net.variables.iter().enumerate() {
        let name = Some(v.name.as_str());
        let ps = &net.parents[i];
        let mut seen = BTreeSet::new();
        for &p in ps {
            if p == i {
                report.push(Severity::Error, name, "variable is its own parent".into());
            }
            if !seen.insert(p) {
                report.push(Severity::Error, name, format!("parent `{}` listed twice", net.variables[p].name));
            }
        }
        let cards: Vec<usize> = ps.iter().map(|&p| net.cardinality(p)).collect();
        let expected_rows = configuration_count(&cards);
        let rows = &net.cpts[i];
        if rows.len() != expected_rows {
            report.push(Severity::Error, name, format!("table has {} rows, expected {}", rows.len(), expected_rows));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != v.states.len() {
                report.push(
                    Severity::Error,
                    name,
                    format!("row {} has {} entries, expected {}", r, row.len(), v.states.len()),
                );
                continue;
            }
            if let Some(x) = row.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
                report.push(Severity::Error, name, format!("row {r} has entry {x} outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                report.push(Severity::Error, name, format!("row {r} sums to {sum}"));
            }
        }
    }
    report
}

/// One representative cycle per non-trivial strongly connected component,
/// rotated to start at the smallest-named member.
fn find_cycles(net: &CompiledNetwork) -> Vec<Vec<usize>> {
    if net.topological_order().is_some() {
        return Vec::new();
    }
    let n = net.len();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in net.parents.iter().enumerate() {
        for &p in ps {
            if p != c {
                children[p].push(c);
            }
        }
    }
    for list in &mut children {
        list.sort_by(|a, b| net.variables[*a].name.cmp(&net.variables[*b].name));
        list.dedup();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| net.variables[*a].name.cmp(&net.variables[*b].name));

    let mut covered = vec![false; n];
    let mut cycles = Vec::new();
    for &start in &order {
        if covered[start] {
            continue;
        }
        if let Some(path) = shortest_cycle_through(start, &children) {
            for &i in &path {
                covered[i] = true;
            }
            cycles.push(path);
        }
    }
    cycles
}

fn shortest_cycle_through(start: usize, children: &[Vec<usize>]) -> Option<Vec<usize>> {
    // BFS from `start` back to itself.
    let n = children.len();
    let mut prev = vec![usize::MAX; n];
    let mut queue = alloc::collections::VecDeque::new();
    queue.push_back(start);
    let mut seen = vec![false; n];
    while let Some(u) = queue.pop_front() {
        for &c in &children[u] {
            if c == start {
                let mut path = vec![u];
                let mut cur = u;
                while cur != start {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            if !seen[c] {
                seen[c] = true;
                prev[c] = u;
                queue.push_back(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(b_rows: Vec<Vec<f64>>) -> CompiledNetwork {
        CompiledNetwork::builder()
            .node("A", &["t", "f"], &[], vec![vec![0.3, 0.7]])
            .node("B", &["t", "f"], &["A"], b_rows)
            .build()
            .unwrap()
    }

    #[test]
    fn normalized_chain_is_clean() {
        let net = chain(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert!(validate_network(&net).is_clean());
    }

    #[test]
    fn unnormalized_row_is_reported() {
        let net = chain(vec![vec![0.5, 0.6], vec![0.2, 0.8]]);
        let report = validate_network(&net);
        assert_eq!(report.findings.len(), 1);
        assert!(report.findings[0].message.contains("sums to 1.1"), "{:?}", report);
        assert_eq!(report.findings[0].variable.as_deref(), Some("B"));
    }

    #[test]
    fn two_cycle_is_reported() {
        let net = CompiledNetwork::builder()
            .node("A", &["t", "f"], &["B"], vec![vec![0.5, 0.5], vec![0.5, 0.5]])
            .node("B", &["t", "f"], &["A"], vec![vec![0.5, 0.5], vec![0.5, 0.5]])
            .build()
            .unwrap();
        let report = validate_network(&net);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].message, "cycle A,B");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = chain(vec![vec![0.9, 0.1]]);
        let report = validate_network(&net);
        assert!(report.findings.iter().any(|f| f.message.contains("expected 2")));
    }

    #[test]
    fn state_space_invariants() {
        assert_eq!(StateSpace::new(["a"], false), Err(NetworkError::TooFewStates(1)));
        assert_eq!(StateSpace::new(["a", "a"], false), Err(NetworkError::DuplicateState("a".into())));
        assert!(StateSpace::new(["a", "b"], true).unwrap().is_ordered());
    }

    #[test]
    fn evidence_rejects_double_assignment() {
        let mut ev = Evidence::new();
        ev.insert("A", "t").unwrap();
        assert_eq!(ev.insert("A", "f"), Err(NetworkError::DuplicateAssignment("A".into())));
    }

    #[test]
    fn evidence_states_must_exist() {
        let net = chain(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let ev = Evidence::new().with("B", "maybe");
        assert!(matches!(net.resolve_evidence(&ev), Err(NetworkError::UnknownState { .. })));
    }

    #[test]
    fn topological_order_breaks_ties_by_name() {
        let net = CompiledNetwork::builder()
            .node("Z", &["t", "f"], &[], vec![vec![0.5, 0.5]])
            .node("A", &["t", "f"], &[], vec![vec![0.5, 0.5]])
            .node("M", &["t", "f"], &["Z"], vec![vec![0.5, 0.5], vec![0.5, 0.5]])
            .build()
            .unwrap();
        let order: Vec<&str> =
            net.topological_order().unwrap().into_iter().map(|i| net.variable(i).name.as_str()).collect();
        assert_eq!(order, ["A", "Z", "M"]);
    }
}
