//! Content addressing and structural diffs between knowledge-base versions.
//!
//! A version id is the lowercase hex SHA-256 of the canonical serialization,
//! so formatting-only edits never produce a new id. [`diff_kb`] compares two
//! KBs item by item (classes, fragments, variables, arcs, CPT rows,
//! constraints, scenarios) and [`apply_diff`] replays a diff onto the older
//! KB; replaying `diff_kb(a, b)` onto `a` yields `b` exactly. Renames show up
//! as a removal plus an addition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cpt::{configurations, CptSpec};
use crate::dsl::{
    format_number, fragment_body_text, serialize_kb, write_class, write_constraint, write_cpt, write_definition,
    write_fragment, write_instance, write_model, write_scenario, write_template, Definition, Instance, KnowledgeBase,
    ModelDecl, NamedConstraint,
};
use crate::fragments::{fragment_var_states, ClassHierarchy, Fragment, InputVar, ResidentVar, Template, VariableClass};
use crate::harness::Scenario;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = fmt::Write::write_fmt(&mut out, format_args!("{b:02x}"));
    }
    out
}

/// Version id of a knowledge base.
pub fn content_id(kb: &KnowledgeBase) -> String {
    sha256_hex(serialize_kb(kb).as_bytes())
}

/// Item kinds that keep a declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Classes,
    Templates,
    Fragments,
    Models,
    Constraints,
    Scenarios,
}

/// What a diff entry is about.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Definition {
        name: String,
    },
    Class {
        name: String,
    },
    Template {
        name: String,
    },
    Fragment {
        name: String,
    },
    /// Stub flag, description and comments of a fragment.
    FragmentHeader {
        fragment: String,
    },
    Input {
        fragment: String,
        input: String,
    },
    Var {
        fragment: String,
        var: String,
    },
    /// Class, states, description and comments of a variable.
    VarHeader {
        fragment: String,
        var: String,
    },
    Arc {
        fragment: String,
        var: String,
        parent: String,
    },
    /// Full parent list, when arcs alone do not fix the order.
    Parents {
        fragment: String,
        var: String,
    },
    Cpt {
        fragment: String,
        var: String,
    },
    Row {
        fragment: String,
        var: String,
        row: usize,
        configuration: Vec<(String, String)>,
    },
    InputOrder {
        fragment: String,
    },
    VarOrder {
        fragment: String,
    },
    Instance {
        index: usize,
    },
    Model {
        name: String,
    },
    Constraint {
        name: String,
    },
    Scenario {
        name: String,
    },
    Order {
        of: Kind,
    },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Definition { name } => write!(f, "definition {name}"),
            Target::Class { name } => write!(f, "class {name}"),
            Target::Template { name } => write!(f, "template {name}"),
            Target::Fragment { name } => write!(f, "fragment {name}"),
            Target::FragmentHeader { fragment } => write!(f, "fragment {fragment} / header"),
            Target::Input { fragment, input } => write!(f, "fragment {fragment} / input {input}"),
            Target::Var { fragment, var } => write!(f, "fragment {fragment} / var {var}"),
            Target::VarHeader { fragment, var } => write!(f, "fragment {fragment} / var {var} / header"),
            Target::Arc { fragment, var, parent } => write!(f, "fragment {fragment} / arc {parent} -> {var}"),
            Target::Parents { fragment, var } => write!(f, "fragment {fragment} / var {var} / parent order"),
            Target::Cpt { fragment, var } => write!(f, "fragment {fragment} / var {var} / cpt"),
            Target::Row { fragment, var, row, configuration } => {
                write!(f, "fragment {fragment} / var {var} / row {row}")?;
                if !configuration.is_empty() {
                    let parts: Vec<String> = configuration.iter().map(|(v, s)| format!("{v}={s}")).collect();
                    write!(f, " ({})", parts.join(", "))?;
                }
                Ok(())
            }
            Target::InputOrder { fragment } => write!(f, "fragment {fragment} / input order"),
            Target::VarOrder { fragment } => write!(f, "fragment {fragment} / var order"),
            Target::Instance { index } => write!(f, "instance #{index}"),
            Target::Model { name } => write!(f, "model {name}"),
            Target::Constraint { name } => write!(f, "constraint {name}"),
            Target::Scenario { name } => write!(f, "scenario {name}"),
            Target::Order { of } => write!(f, "order of {of:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentHeader {
    pub is_stub: bool,
    pub description: String,
    pub comments: Vec<String>,
}

/// The value on one side of a change.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum DiffValue {
    Definition(Definition),
    Class(VariableClass),
    Template(Template),
    Fragment(Fragment),
    FragmentHeader(FragmentHeader),
    Input(InputVar),
    /// A variable; for header changes the parents and CPT are left empty.
    Var(ResidentVar),
    /// Parent name and its position in the new parent list.
    Arc {
        parent: String,
        position: usize,
    },
    Cpt(Option<CptSpec>),
    Row(Vec<f64>),
    Instance(Instance),
    Model(ModelDecl),
    Constraint(NamedConstraint),
    Scenario(Scenario),
    Names(Vec<String>),
}

impl DiffValue {
    /// Canonical text of the value.
    pub fn text(&self) -> String {
        match self {
            DiffValue::Definition(d) => {
                // the name lives in the target
                write_definition("_", d)
            }
            DiffValue::Class(c) => write_class(c),
            DiffValue::Template(t) => write_template(t),
            DiffValue::Fragment(f) => write_fragment(f),
            DiffValue::FragmentHeader(h) => {
                let mut f = Fragment::new("_");
                f.is_stub = h.is_stub;
                f.description = h.description.clone();
                f.comments = h.comments.clone();
                write_fragment(&f)
            }
            DiffValue::Input(v) => {
                let mut f = Fragment::new("_");
                f.inputs.push(v.clone());
                fragment_body_text(&f, false)
            }
            DiffValue::Var(v) => {
                let mut f = Fragment::new("_");
                f.residents.push(v.clone());
                fragment_body_text(&f, false)
            }
            DiffValue::Arc { parent, position } => format!("{parent} at {position}"),
            DiffValue::Cpt(Some(c)) => write_cpt(c, "", false),
            DiffValue::Cpt(None) => "(inherited)".into(),
            DiffValue::Row(r) => {
                let parts: Vec<String> = r.iter().map(|x| format_number(*x)).collect();
                format!("({})", parts.join(", "))
            }
            DiffValue::Instance(i) => write_instance(i),
            DiffValue::Model(m) => write_model(m),
            DiffValue::Constraint(c) => write_constraint(c),
            DiffValue::Scenario(s) => write_scenario(s),
            DiffValue::Names(n) => n.join(", "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "change", rename_all = "lowercase")]
pub enum Change {
    Added { new: DiffValue },
    Removed { old: DiffValue },
    Changed { old: DiffValue, new: DiffValue },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffEntry {
    pub target: Target,
    #[serde(flatten)]
    pub change: Change,
}

impl fmt::Display for DiffEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = |v: &DiffValue| v.text().trim_end().replace('\n', " ");
        match &self.change {
            Change::Added { new } => write!(f, "+ {}: {}", self.target, one_line(new)),
            Change::Removed { old } => write!(f, "- {}: {}", self.target, one_line(old)),
            Change::Changed { old, new } => {
                write!(f, "~ {}: {} => {}", self.target, one_line(old), one_line(new))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KbDiff {
    pub entries: Vec<DiffEntry>,
}

impl KbDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("diff target `{0}` does not exist")]
    MissingTarget(String),
    #[error("diff entry for `{0}` has the wrong value type")]
    ValueType(String),
}

fn push(out: &mut Vec<DiffEntry>, target: Target, change: Change) {
    out.push(DiffEntry { target, change });
}

/// Diff for a list of named items; additions and removals by name,
/// changes by canonical text.
#[allow(clippy::too_many_arguments)]
fn diff_named<T: Clone>(
    out: &mut Vec<DiffEntry>,
    old: &[T],
    new: &[T],
    name: impl Fn(&T) -> &str,
    text: impl Fn(&T) -> String,
    target: impl Fn(&str) -> Target,
    wrap: impl Fn(T) -> DiffValue,
    mut detail: impl FnMut(&mut Vec<DiffEntry>, &T, &T) -> bool,
) {
    let new_names: BTreeSet<&str> = new.iter().map(&name).collect();
    for o in old {
        if !new_names.contains(name(o)) {
            push(out, target(name(o)), Change::Removed { old: wrap(o.clone()) });
        }
    }
    for n in new {
        if let Some(o) = old.iter().find(|o| name(o) == name(n)) {
            if text(o) != text(n) && !detail(out, o, n) {
                push(out, target(name(n)), Change::Changed { old: wrap(o.clone()), new: wrap(n.clone()) });
            }
        }
    }
    for n in new {
        if !old.iter().any(|o| name(o) == name(n)) {
            push(out, target(name(n)), Change::Added { new: wrap(n.clone()) });
        }
    }
}

fn var_header(v: &ResidentVar) -> ResidentVar {
    ResidentVar { parents: Vec::new(), cpt: None, ..v.clone() }
}

fn header(f: &Fragment) -> FragmentHeader {
    FragmentHeader { is_stub: f.is_stub, description: f.description.clone(), comments: f.comments.clone() }
}

fn row_configuration(f: &Fragment, v: &ResidentVar, row: usize, hierarchy: &ClassHierarchy) -> Vec<(String, String)> {
    let spaces: Option<Vec<_>> = v.parents.iter().map(|p| fragment_var_states(f, p, hierarchy)).collect();
    let Some(spaces) = spaces else { return Vec::new() };
    let cards: Vec<usize> = spaces.iter().map(|s| s.len()).collect();
    configurations(&cards)
        .nth(row)
        .map(|cfg| {
            v.parents
                .iter()
                .zip(cfg.iter().zip(&spaces))
                .map(|(p, (&s, space))| (p.clone(), space.states()[s].clone()))
                .collect()
        })
        .unwrap_or_default()
}

fn diff_var(out: &mut Vec<DiffEntry>, f_new: &Fragment, o: &ResidentVar, n: &ResidentVar, hierarchy: &ClassHierarchy) {
    let (frag, var) = (f_new.name.clone(), n.name.clone());
    let (ho, hn) = (var_header(o), var_header(n));
    if DiffValue::Var(ho.clone()).text() != DiffValue::Var(hn.clone()).text() {
        push(
            out,
            Target::VarHeader { fragment: frag.clone(), var: var.clone() },
            Change::Changed { old: DiffValue::Var(ho), new: DiffValue::Var(hn) },
        );
    }
    for (i, p) in o.parents.iter().enumerate() {
        if !n.parents.contains(p) {
            push(
                out,
                Target::Arc { fragment: frag.clone(), var: var.clone(), parent: p.clone() },
                Change::Removed { old: DiffValue::Arc { parent: p.clone(), position: i } },
            );
        }
    }
    for (i, p) in n.parents.iter().enumerate() {
        if !o.parents.contains(p) {
            push(
                out,
                Target::Arc { fragment: frag.clone(), var: var.clone(), parent: p.clone() },
                Change::Added { new: DiffValue::Arc { parent: p.clone(), position: i } },
            );
        }
    }
    let cpt_text = |c: &Option<CptSpec>| DiffValue::Cpt(c.clone()).text();
    if cpt_text(&o.cpt) == cpt_text(&n.cpt) {
        return;
    }
    match (&o.cpt, &n.cpt) {
        (Some(CptSpec::Explicit { rows: ro }), Some(CptSpec::Explicit { rows: rn })) if ro.len() == rn.len() => {
            for (i, (a, b)) in ro.iter().zip(rn).enumerate() {
                if DiffValue::Row(a.clone()).text() != DiffValue::Row(b.clone()).text() {
                    push(
                        out,
                        Target::Row {
                            fragment: frag.clone(),
                            var: var.clone(),
                            row: i,
                            configuration: row_configuration(f_new, n, i, hierarchy),
                        },
                        Change::Changed { old: DiffValue::Row(a.clone()), new: DiffValue::Row(b.clone()) },
                    );
                }
            }
        }
        _ => push(
            out,
            Target::Cpt { fragment: frag, var },
            Change::Changed { old: DiffValue::Cpt(o.cpt.clone()), new: DiffValue::Cpt(n.cpt.clone()) },
        ),
    }
}

fn diff_fragment(out: &mut Vec<DiffEntry>, o: &Fragment, n: &Fragment, hierarchy: &ClassHierarchy) -> bool {
    let name = n.name.clone();
    let (ho, hn) = (header(o), header(n));
    if DiffValue::FragmentHeader(ho.clone()).text() != DiffValue::FragmentHeader(hn.clone()).text() {
        push(
            out,
            Target::FragmentHeader { fragment: name.clone() },
            Change::Changed { old: DiffValue::FragmentHeader(ho), new: DiffValue::FragmentHeader(hn) },
        );
    }
    let input_text = |v: &InputVar| DiffValue::Input(v.clone()).text();
    diff_named(
        out,
        &o.inputs,
        &n.inputs,
        |v| v.name.as_str(),
        input_text,
        |v| Target::Input { fragment: name.clone(), input: v.to_string() },
        DiffValue::Input,
        |_, _, _| false,
    );
    let var_text = |v: &ResidentVar| DiffValue::Var(v.clone()).text();
    diff_named(
        out,
        &o.residents,
        &n.residents,
        |v| v.name.as_str(),
        var_text,
        |v| Target::Var { fragment: name.clone(), var: v.to_string() },
        DiffValue::Var,
        |out, a, b| {
            diff_var(out, n, a, b, hierarchy);
            true
        },
    );
    true
}

/// Structural differences from `old` to `new`; empty exactly when both
/// serialize identically.
pub fn diff_kb(old: &KnowledgeBase, new: &KnowledgeBase) -> KbDiff {
    let hierarchy = ClassHierarchy::new(new.classes.iter().cloned()).unwrap_or_default();
    let mut out = Vec::new();

    let defs_old: Vec<(String, Definition)> = old.definitions.clone().into_iter().collect();
    let defs_new: Vec<(String, Definition)> = new.definitions.clone().into_iter().collect();
    diff_named(
        &mut out,
        &defs_old,
        &defs_new,
        |d| d.0.as_str(),
        |d| write_definition(&d.0, &d.1),
        |n| Target::Definition { name: n.to_string() },
        |d| DiffValue::Definition(d.1),
        |_, _, _| false,
    );
    diff_named(
        &mut out,
        &old.classes,
        &new.classes,
        |c| c.name.as_str(),
        write_class,
        |n| Target::Class { name: n.to_string() },
        DiffValue::Class,
        |_, _, _| false,
    );
    diff_named(
        &mut out,
        &old.templates,
        &new.templates,
        |t| t.name.as_str(),
        write_template,
        |n| Target::Template { name: n.to_string() },
        DiffValue::Template,
        |_, _, _| false,
    );
    diff_named(
        &mut out,
        &old.fragments,
        &new.fragments,
        |f| f.name.as_str(),
        write_fragment,
        |n| Target::Fragment { name: n.to_string() },
        DiffValue::Fragment,
        |out, a, b| diff_fragment(out, a, b, &hierarchy),
    );

    let common = old.instances.len().min(new.instances.len());
    for i in 0..common {
        if write_instance(&old.instances[i]) != write_instance(&new.instances[i]) {
            push(
                &mut out,
                Target::Instance { index: i },
                Change::Changed {
                    old: DiffValue::Instance(old.instances[i].clone()),
                    new: DiffValue::Instance(new.instances[i].clone()),
                },
            );
        }
    }
    for i in (common..old.instances.len()).rev() {
        push(
            &mut out,
            Target::Instance { index: i },
            Change::Removed { old: DiffValue::Instance(old.instances[i].clone()) },
        );
    }
    for i in common..new.instances.len() {
        push(
            &mut out,
            Target::Instance { index: i },
            Change::Added { new: DiffValue::Instance(new.instances[i].clone()) },
        );
    }

    diff_named(
        &mut out,
        &old.models,
        &new.models,
        |m| m.name.as_str(),
        write_model,
        |n| Target::Model { name: n.to_string() },
        DiffValue::Model,
        |_, _, _| false,
    );
    diff_named(
        &mut out,
        &old.constraints,
        &new.constraints,
        |c| c.name.as_str(),
        write_constraint,
        |n| Target::Constraint { name: n.to_string() },
        DiffValue::Constraint,
        |_, _, _| false,
    );
    diff_named(
        &mut out,
        &old.scenarios,
        &new.scenarios,
        |s| s.name.as_str(),
        write_scenario,
        |n| Target::Scenario { name: n.to_string() },
        DiffValue::Scenario,
        |_, _, _| false,
    );

    // Orders that replaying the entries above does not already produce.
    let mut diff = KbDiff { entries: out };
    if let Ok(replayed) = apply_diff(old, &diff) {
        let mut extra = Vec::new();
        order_entries(&mut extra, &replayed, new);
        diff.entries.extend(extra);
    }
    diff
}

fn names<T>(items: &[T], name: impl Fn(&T) -> &str) -> Vec<String> {
    items.iter().map(|i| name(i).to_string()).collect()
}

fn order_entries(out: &mut Vec<DiffEntry>, got: &KnowledgeBase, want: &KnowledgeBase) {
    let mut order = |of: Kind, a: Vec<String>, b: Vec<String>| {
        if a != b {
            push(out, Target::Order { of }, Change::Changed { old: DiffValue::Names(a), new: DiffValue::Names(b) });
        }
    };
    order(Kind::Classes, names(&got.classes, |c| &c.name), names(&want.classes, |c| &c.name));
    order(Kind::Templates, names(&got.templates, |c| &c.name), names(&want.templates, |c| &c.name));
    order(Kind::Fragments, names(&got.fragments, |c| &c.name), names(&want.fragments, |c| &c.name));
    order(Kind::Models, names(&got.models, |c| &c.name), names(&want.models, |c| &c.name));
    order(Kind::Constraints, names(&got.constraints, |c| &c.name), names(&want.constraints, |c| &c.name));
    order(Kind::Scenarios, names(&got.scenarios, |c| &c.name), names(&want.scenarios, |c| &c.name));
    for wf in &want.fragments {
        let Some(gf) = got.fragment(&wf.name) else { continue };
        let fragment = wf.name.clone();
        let (a, b) = (names(&gf.inputs, |v| &v.name), names(&wf.inputs, |v| &v.name));
        if a != b {
            push(
                out,
                Target::InputOrder { fragment: fragment.clone() },
                Change::Changed { old: DiffValue::Names(a), new: DiffValue::Names(b) },
            );
        }
        let (a, b) = (names(&gf.residents, |v| &v.name), names(&wf.residents, |v| &v.name));
        if a != b {
            push(
                out,
                Target::VarOrder { fragment: fragment.clone() },
                Change::Changed { old: DiffValue::Names(a), new: DiffValue::Names(b) },
            );
        }
        for wv in &wf.residents {
            if let Some(gv) = gf.resident(&wv.name) {
                if gv.parents != wv.parents {
                    push(
                        out,
                        Target::Parents { fragment: fragment.clone(), var: wv.name.clone() },
                        Change::Changed {
                            old: DiffValue::Names(gv.parents.clone()),
                            new: DiffValue::Names(wv.parents.clone()),
                        },
                    );
                }
            }
        }
    }
}

fn reorder<T>(items: &mut Vec<T>, order: &[String], name: impl Fn(&T) -> &str, what: &str) -> Result<(), DiffError> {
    let mut pool: BTreeMap<String, T> = items.drain(..).map(|i| (name(&i).to_string(), i)).collect();
    for n in order {
        let item = pool.remove(n).ok_or_else(|| DiffError::MissingTarget(format!("{what} {n}")))?;
        items.push(item);
    }
    if let Some(extra) = pool.into_keys().next() {
        return Err(DiffError::MissingTarget(format!("{what} {extra} absent from new order")));
    }
    Ok(())
}

/// Applies a named-list change; `get` extracts the item from the value.
fn apply_named<T>(
    items: &mut Vec<T>,
    key: &str,
    change: &Change,
    name: impl Fn(&T) -> &str,
    get: impl Fn(&DiffValue) -> Option<T>,
    target: &Target,
) -> Result<(), DiffError> {
    let missing = || DiffError::MissingTarget(target.to_string());
    let bad = || DiffError::ValueType(target.to_string());
    match change {
        Change::Added { new } => items.push(get(new).ok_or_else(bad)?),
        Change::Removed { .. } => {
            let i = items.iter().position(|x| name(x) == key).ok_or_else(missing)?;
            items.remove(i);
        }
        Change::Changed { new, .. } => {
            let i = items.iter().position(|x| name(x) == key).ok_or_else(missing)?;
            items[i] = get(new).ok_or_else(bad)?;
        }
    }
    Ok(())
}

fn new_value(change: &Change) -> Option<&DiffValue> {
    match change {
        Change::Added { new } | Change::Changed { new, .. } => Some(new),
        Change::Removed { .. } => None,
    }
}

fn new_names(change: &Change, target: &Target) -> Result<Vec<String>, DiffError> {
    match new_value(change) {
        Some(DiffValue::Names(n)) => Ok(n.clone()),
        _ => Err(DiffError::ValueType(target.to_string())),
    }
}

/// Replays `diff` onto `kb`.
pub fn apply_diff(kb: &KnowledgeBase, diff: &KbDiff) -> Result<KnowledgeBase, DiffError> {
    let mut kb = kb.clone();
    for entry in &diff.entries {
        let t = &entry.target;
        let c = &entry.change;
        let missing = || DiffError::MissingTarget(t.to_string());
        let bad = || DiffError::ValueType(t.to_string());
        match t {
            Target::Definition { name } => match new_value(c) {
                None => {
                    kb.definitions.remove(name).ok_or_else(missing)?;
                }
                Some(DiffValue::Definition(d)) => {
                    kb.definitions.insert(name.clone(), d.clone());
                }
                Some(_) => return Err(bad()),
            },
            Target::Class { name } => apply_named(
                &mut kb.classes,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Class(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Template { name } => apply_named(
                &mut kb.templates,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Template(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Fragment { name } => apply_named(
                &mut kb.fragments,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Fragment(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Model { name } => apply_named(
                &mut kb.models,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Model(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Constraint { name } => apply_named(
                &mut kb.constraints,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Constraint(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Scenario { name } => apply_named(
                &mut kb.scenarios,
                name,
                c,
                |x| &x.name,
                |v| match v {
                    DiffValue::Scenario(x) => Some(x.clone()),
                    _ => None,
                },
                t,
            )?,
            Target::Instance { index } => match c {
                Change::Added { new: DiffValue::Instance(i) } => kb.instances.push(i.clone()),
                Change::Removed { .. } => {
                    if *index >= kb.instances.len() {
                        return Err(missing());
                    }
                    kb.instances.remove(*index);
                }
                Change::Changed { new: DiffValue::Instance(i), .. } => {
                    *kb.instances.get_mut(*index).ok_or_else(missing)? = i.clone();
                }
                _ => return Err(bad()),
            },
            Target::Order { of } => {
                let order = new_names(c, t)?;
                match of {
                    Kind::Classes => reorder(&mut kb.classes, &order, |x| &x.name, "class")?,
                    Kind::Templates => reorder(&mut kb.templates, &order, |x| &x.name, "template")?,
                    Kind::Fragments => reorder(&mut kb.fragments, &order, |x| &x.name, "fragment")?,
                    Kind::Models => reorder(&mut kb.models, &order, |x| &x.name, "model")?,
                    Kind::Constraints => reorder(&mut kb.constraints, &order, |x| &x.name, "constraint")?,
                    Kind::Scenarios => reorder(&mut kb.scenarios, &order, |x| &x.name, "scenario")?,
                }
            }
            Target::FragmentHeader { fragment }
            | Target::Input { fragment, .. }
            | Target::Var { fragment, .. }
            | Target::VarHeader { fragment, .. }
            | Target::Arc { fragment, .. }
            | Target::Parents { fragment, .. }
            | Target::Cpt { fragment, .. }
            | Target::Row { fragment, .. }
            | Target::InputOrder { fragment }
            | Target::VarOrder { fragment } => {
                let f = kb.fragments.iter_mut().find(|f| &f.name == fragment).ok_or_else(missing)?;
                apply_in_fragment(f, t, c)?;
            }
        }
    }
    Ok(kb)
}

fn apply_in_fragment(f: &mut Fragment, t: &Target, c: &Change) -> Result<(), DiffError> {
    let missing = || DiffError::MissingTarget(t.to_string());
    let bad = || DiffError::ValueType(t.to_string());
    let find_var = |f: &mut Fragment, var: &str| -> Result<usize, DiffError> {
        f.residents.iter().position(|v| v.name == var).ok_or_else(missing)
    };
    match t {
        Target::FragmentHeader { .. } => match new_value(c) {
            Some(DiffValue::FragmentHeader(h)) => {
                f.is_stub = h.is_stub;
                f.description = h.description.clone();
                f.comments = h.comments.clone();
            }
            _ => return Err(bad()),
        },
        Target::Input { input, .. } => apply_named(
            &mut f.inputs,
            input,
            c,
            |x| &x.name,
            |v| match v {
                DiffValue::Input(x) => Some(x.clone()),
                _ => None,
            },
            t,
        )?,
        Target::Var { var, .. } => apply_named(
            &mut f.residents,
            var,
            c,
            |x| &x.name,
            |v| match v {
                DiffValue::Var(x) => Some(x.clone()),
                _ => None,
            },
            t,
        )?,
        Target::VarHeader { var, .. } => {
            let i = find_var(f, var)?;
            let Some(DiffValue::Var(h)) = new_value(c) else { return Err(bad()) };
            let v = &mut f.residents[i];
            v.class_ref = h.class_ref.clone();
            v.states = h.states.clone();
            v.description = h.description.clone();
            v.comments = h.comments.clone();
        }
        Target::Arc { var, parent, .. } => {
            let i = find_var(f, var)?;
            let parents = &mut f.residents[i].parents;
            match c {
                Change::Added { new: DiffValue::Arc { position, .. } } => {
                    let at = (*position).min(parents.len());
                    parents.insert(at, parent.clone());
                }
                Change::Removed { .. } => {
                    let k = parents.iter().position(|p| p == parent).ok_or_else(missing)?;
                    parents.remove(k);
                }
                _ => return Err(bad()),
            }
        }
        Target::Parents { var, .. } => {
            let order = new_names(c, t)?;
            let i = find_var(f, var)?;
            f.residents[i].parents = order;
        }
        Target::Cpt { var, .. } => {
            let i = find_var(f, var)?;
            let Some(DiffValue::Cpt(spec)) = new_value(c) else { return Err(bad()) };
            f.residents[i].cpt = spec.clone();
        }
        Target::Row { var, row, .. } => {
            let i = find_var(f, var)?;
            let Some(DiffValue::Row(values)) = new_value(c) else { return Err(bad()) };
            match &mut f.residents[i].cpt {
                Some(CptSpec::Explicit { rows }) if *row < rows.len() => rows[*row] = values.clone(),
                _ => return Err(missing()),
            }
        }
        Target::InputOrder { .. } => {
            let order = new_names(c, t)?;
            reorder(&mut f.inputs, &order, |x| &x.name, "input")?;
        }
        Target::VarOrder { .. } => {
            let order = new_names(c, t)?;
            reorder(&mut f.residents, &order, |x| &x.name, "var")?;
        }
        _ => return Err(bad()),
    }
    Ok(())
}
