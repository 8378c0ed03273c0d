use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use super::{Binding, ClassHierarchy, Fragment, FragmentError, VarRef};
use crate::network::StateSpace;

/// How a composed variable gets its distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarSource {
    Resident,
    Exogenous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionVariable {
    pub name: String,
    pub home: String,
    pub source: VarSource,
    pub states: StateSpace,
    pub parents: Vec<String>,
}

/// Fragments joined by a binding, with all separability checks passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedModel {
    fragments: Vec<Fragment>,
    binding: Binding,
    variables: BTreeMap<String, CompositionVariable>,
}

impl ComposedModel {
    /// Fragments sorted by name.
    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment(&self, name: &str) -> Option<&Fragment> {
        self.fragments.iter().find(|f| f.name == name)
    }

    pub fn binding(&self) -> &Binding {
        &self.binding
    }

    pub fn variables(&self) -> &BTreeMap<String, CompositionVariable> {
        &self.variables
    }
}

pub(super) fn resolve_states(
    variable: &str,
    own: Option<&StateSpace>,
    class_ref: Option<&str>,
    hierarchy: &ClassHierarchy,
) -> Result<StateSpace, FragmentError> {
    if let Some(s) = own {
        return Ok(s.clone());
    }
    if let Some(c) = class_ref {
        if let Some(s) = super::resolve_class(c, hierarchy)?.states {
            return Ok(s.value);
        }
    }
    Err(FragmentError::MissingFeature { variable: variable.to_string(), feature: "state space" })
}

/// Merges fragments along `binding` and enforces the separability checks:
/// a single home per variable, identical state spaces across each bound
/// pair, an acyclic union graph, and no dangling inputs.
pub fn compose(
    fragments: Vec<Fragment>,
    binding: &Binding,
    hierarchy: &ClassHierarchy,
) -> Result<ComposedModel, FragmentError> {
    let mut fragments = fragments;
    fragments.sort_by(|a, b| a.name.cmp(&b.name));
    for w in fragments.windows(2) {
        if w[0].name == w[1].name {
            return Err(FragmentError::DuplicateFragment(w[0].name.clone()));
        }
    }
    let by_name: BTreeMap<&str, &Fragment> = fragments.iter().map(|f| (f.name.as_str(), f)).collect();

    for f in &fragments {
        let mut names = BTreeSet::new();
        for n in f.inputs.iter().map(|v| &v.name).chain(f.residents.iter().map(|v| &v.name)) {
            if !names.insert(n.as_str()) {
                return Err(FragmentError::DuplicateVariable { fragment: f.name.clone(), variable: n.clone() });
            }
        }
        for r in &f.residents {
            for p in &r.parents {
                if !names.contains(p.as_str()) {
                    return Err(FragmentError::UnknownParent {
                        fragment: f.name.clone(),
                        variable: r.name.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
    }

    // Bound pairs: existence and identical spaces.
    for (input_ref, target_ref) in &binding.connections {
        let src = by_name
            .get(input_ref.fragment.as_str())
            .ok_or_else(|| FragmentError::UnknownFragment(input_ref.fragment.clone()))?;
        let input = src.input(&input_ref.variable).ok_or_else(|| FragmentError::UnknownInput(input_ref.clone()))?;
        let dst = by_name
            .get(target_ref.fragment.as_str())
            .ok_or_else(|| FragmentError::UnknownFragment(target_ref.fragment.clone()))?;
        let resident =
            dst.resident(&target_ref.variable).ok_or_else(|| FragmentError::UnknownResident(target_ref.clone()))?;
        let a = resolve_states(&input.name, input.states.as_ref(), input.class_ref.as_deref(), hierarchy)?;
        let b = resolve_states(&resident.name, resident.states.as_ref(), resident.class_ref.as_deref(), hierarchy)?;
        if a != b {
            return Err(FragmentError::InterfaceMismatch {
                input: input_ref.clone(),
                resident: target_ref.clone(),
                input_states: a.to_string(),
                resident_states: b.to_string(),
            });
        }
    }

    // Homes and local-to-global name maps.
    let mut variables: BTreeMap<String, CompositionVariable> = BTreeMap::new();
    let mut claim = |var: CompositionVariable| -> Result<(), FragmentError> {
        if let Some(existing) = variables.get(&var.name) {
            return Err(FragmentError::HomeConflict {
                variable: var.name.clone(),
                first: existing.home.clone(),
                second: var.home.clone(),
            });
        }
        variables.insert(var.name.clone(), var);
        Ok(())
    };
    let mut aliases: BTreeMap<&str, BTreeMap<&str, String>> = BTreeMap::new();
    for f in &fragments {
        let local = aliases.entry(f.name.as_str()).or_default();
        for input in &f.inputs {
            let key = VarRef::new(f.name.clone(), input.name.clone());
            match binding.connections.get(&key) {
                Some(target) => {
                    local.insert(input.name.as_str(), target.variable.clone());
                }
                None if input.prior.is_some() => {
                    local.insert(input.name.as_str(), input.name.clone());
                    let states =
                        resolve_states(&input.name, input.states.as_ref(), input.class_ref.as_deref(), hierarchy)?;
                    claim(CompositionVariable {
                        name: input.name.clone(),
                        home: f.name.clone(),
                        source: VarSource::Exogenous,
                        states,
                        parents: Vec::new(),
                    })?;
                }
                None => return Err(FragmentError::UnboundInput(key)),
            }
        }
        for r in &f.residents {
            local.insert(r.name.as_str(), r.name.clone());
        }
        for r in &f.residents {
            let states = resolve_states(&r.name, r.states.as_ref(), r.class_ref.as_deref(), hierarchy)?;
            let parents = r.parents.iter().map(|p| local[p.as_str()].clone()).collect();
            claim(CompositionVariable {
                name: r.name.clone(),
                home: f.name.clone(),
                source: VarSource::Resident,
                states,
                parents,
            })?;
        }
    }

    if let Some(cycle) = find_cycle(&variables) {
        return Err(FragmentError::CrossCycle(cycle));
    }

    Ok(ComposedModel { fragments, binding: binding.clone(), variables })
}

fn find_cycle(vars: &BTreeMap<String, CompositionVariable>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: BTreeMap<&str, Mark> = vars.keys().map(|k| (k.as_str(), Mark::New)).collect();
    let mut stack: Vec<&str> = Vec::new();

    fn visit<'a>(
        v: &'a str,
        vars: &'a BTreeMap<String, CompositionVariable>,
        mark: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        mark.insert(v, Mark::Active);
        stack.push(v);
        if let Some(var) = vars.get(v) {
            for p in &var.parents {
                match mark.get(p.as_str()).copied() {
                    Some(Mark::Active) => {
                        let start = stack.iter().position(|s| *s == p).unwrap_or(0);
                        let mut cycle: Vec<String> = stack[start..].iter().rev().map(|s| s.to_string()).collect();
                        cycle.rotate_right(1);
                        return Some(cycle);
                    }
                    Some(Mark::New) => {
                        if let Some(c) = visit(p.as_str(), vars, mark, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
        }
        stack.pop();
        mark.insert(v, Mark::Done);
        None
    }

    for name in vars.keys() {
        if mark[name.as_str()] == Mark::New {
            if let Some(c) = visit(name, vars, &mut mark, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

/// Swaps a stub for a fuller fragment exposing the same interface, re-points
/// bindings and re-runs every separability check.
pub fn substitute_stub(
    model: &ComposedModel,
    stub_name: &str,
    replacement: Fragment,
    hierarchy: &ClassHierarchy,
) -> Result<ComposedModel, FragmentError> {
    let stub = model
        .fragment(stub_name)
        .filter(|f| f.is_stub)
        .ok_or_else(|| FragmentError::NotAStub(stub_name.to_string()))?;

    for (input_ref, target_ref) in &model.binding.connections {
        if target_ref.fragment == stub_name {
            let old = stub
                .resident(&target_ref.variable)
                .ok_or_else(|| FragmentError::UnknownResident(target_ref.clone()))?;
            let new = replacement.resident(&target_ref.variable).ok_or_else(|| {
                FragmentError::StubInterface(format!("replacement has no resident `{}`", target_ref.variable))
            })?;
            let a = resolve_states(&old.name, old.states.as_ref(), old.class_ref.as_deref(), hierarchy)?;
            let b = resolve_states(&new.name, new.states.as_ref(), new.class_ref.as_deref(), hierarchy)?;
            if a != b {
                return Err(FragmentError::StubInterface(format!("`{}` has states {b}, stub has {a}", new.name)));
            }
        }
        if input_ref.fragment == stub_name {
            let old = stub.input(&input_ref.variable).ok_or_else(|| FragmentError::UnknownInput(input_ref.clone()))?;
            let new = replacement.input(&input_ref.variable).ok_or_else(|| {
                FragmentError::StubInterface(format!("replacement has no input `{}`", input_ref.variable))
            })?;
            let a = resolve_states(&old.name, old.states.as_ref(), old.class_ref.as_deref(), hierarchy)?;
            let b = resolve_states(&new.name, new.states.as_ref(), new.class_ref.as_deref(), hierarchy)?;
            if a != b {
                return Err(FragmentError::StubInterface(format!("input `{}` has states {b}, stub has {a}", new.name)));
            }
        }
    }

    let repoint = |r: &VarRef| -> VarRef {
        if r.fragment == stub_name {
            VarRef::new(replacement.name.clone(), r.variable.clone())
        } else {
            r.clone()
        }
    };
    let binding =
        Binding { connections: model.binding.connections.iter().map(|(k, v)| (repoint(k), repoint(v))).collect() };
    let mut fragments: Vec<Fragment> = model.fragments.iter().filter(|f| f.name != stub_name).cloned().collect();
    fragments.push(replacement);
    compose(fragments, &binding, hierarchy)
}
