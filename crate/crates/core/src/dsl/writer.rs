use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Definition, Instance, KnowledgeBase, ModelDecl, NamedConstraint, KEYWORDS};
use crate::constraint::Constraint;
use crate::cpt::{ConfigPattern, CptSpec, Selector};
use crate::fragments::{
    is_identifier, Fragment, InputVar, ParamKind, ParamValue, ResidentVar, Template, VariableClass,
};
use crate::harness::{Allowed, Generation, Scenario};
use crate::network::StateSpace;

/// Shortest decimal that reads back to the same `f64`; exponent notation
/// outside `[1e-5, 1e16)`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn is_placeholder(s: &str) -> bool {
    s.strip_prefix("${")
        .and_then(|r| r.strip_suffix('}'))
        .is_some_and(|inner| !inner.is_empty() && inner.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A name as written: bare when it is a non-keyword identifier (or a
/// placeholder, when allowed), quoted otherwise.
pub fn format_name(name: &str, placeholders: bool) -> String {
    if (placeholders && is_placeholder(name)) || (is_identifier(name) && !KEYWORDS.contains(&name)) {
        name.to_string()
    } else {
        quote(name)
    }
}

/// Like [`format_name`], but plain digit strings stay bare.
pub fn format_label(label: &str, placeholders: bool) -> String {
    if !label.is_empty() && label.chars().all(|c| c.is_ascii_digit()) {
        label.to_string()
    } else {
        format_name(label, placeholders)
    }
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format_number(*x)).collect();
    format!("({})", parts.join(", "))
}

fn labels(ls: &[String], ph: bool) -> String {
    let parts: Vec<String> = ls.iter().map(|l| format_label(l, ph)).collect();
    format!("{{{}}}", parts.join(", "))
}

fn names(ns: &[String], ph: bool) -> String {
    let parts: Vec<String> = ns.iter().map(|n| format_name(n, ph)).collect();
    parts.join(", ")
}

fn space(s: &StateSpace, ph: bool) -> String {
    let body = labels(s.states(), ph);
    if s.is_ordered() {
        format!("ordered {body}")
    } else {
        body
    }
}

fn comments(out: &mut String, cs: &[String], indent: &str) {
    for c in cs {
        if c.is_empty() {
            let _ = writeln!(out, "{indent}#");
        } else {
            let _ = writeln!(out, "{indent}# {c}");
        }
    }
}

fn selector(s: &Selector, ph: bool) -> String {
    match s {
        Selector::Any => "*".into(),
        Selector::States(v) if v.len() == 1 => format_label(&v[0], ph),
        Selector::States(v) => labels(v, ph),
    }
}

fn pattern(p: &ConfigPattern, ph: bool) -> String {
    let parts: Vec<String> = p.0.iter().map(|s| selector(s, ph)).collect();
    format!("({})", parts.join(", "))
}

/// CPT clause; multi-line forms close at `indent`.
pub(crate) fn write_cpt(spec: &CptSpec, indent: &str, ph: bool) -> String {
    match spec {
        CptSpec::Explicit { rows } if rows.len() == 1 => format!("prior {}", vector(&rows[0])),
        CptSpec::Explicit { rows } => {
            let mut s = String::from("cpt {\n");
            for r in rows {
                let _ = writeln!(s, "{indent}  {}", vector(r));
            }
            let _ = write!(s, "{indent}}}");
            s
        }
        CptSpec::Partition { elements } => {
            let mut s = String::from("partition {\n");
            for e in elements {
                let pats: Vec<String> = e.patterns.iter().map(|p| pattern(p, ph)).collect();
                let _ = write!(s, "{indent}  when {}", pats.join(" | "));
                if !e.rationale.is_empty() {
                    let _ = write!(s, " because {}", quote(&e.rationale));
                }
                let _ = writeln!(s, " -> {}", vector(&e.distribution));
            }
            let _ = write!(s, "{indent}}}");
            s
        }
        CptSpec::NoisyOr { links, leak } => {
            format!("noisyor {{ links {} leak {} }}", vector(links), format_number(*leak))
        }
        CptSpec::Deterministic { outcomes } => format!("deterministic {}", labels(outcomes, ph)),
    }
}

fn write_input(out: &mut String, v: &InputVar, ph: bool) {
    comments(out, &v.comments, "  ");
    let _ = write!(out, "  input {}", format_name(&v.name, ph));
    if let Some(c) = &v.class_ref {
        let _ = write!(out, " : {}", format_name(c, ph));
    }
    if let Some(s) = &v.states {
        let _ = write!(out, " states {}", space(s, ph));
    }
    if let Some(p) = &v.prior {
        let _ = write!(out, " prior {}", vector(p));
    }
    if !v.description.is_empty() {
        let _ = write!(out, " description {}", quote(&v.description));
    }
    out.push('\n');
}

fn write_var(out: &mut String, v: &ResidentVar, ph: bool) {
    comments(out, &v.comments, "  ");
    let _ = write!(out, "  var {}", format_name(&v.name, ph));
    if let Some(c) = &v.class_ref {
        let _ = write!(out, " : {}", format_name(c, ph));
    }
    if let Some(s) = &v.states {
        let _ = write!(out, " states {}", space(s, ph));
    }
    if !v.parents.is_empty() {
        let _ = write!(out, " given {}", names(&v.parents, ph));
    }
    if let Some(c) = &v.cpt {
        let _ = write!(out, " {}", write_cpt(c, "  ", ph));
    }
    if !v.description.is_empty() {
        let _ = write!(out, " description {}", quote(&v.description));
    }
    out.push('\n');
}

/// Lines between the braces of a fragment or template body.
pub(crate) fn fragment_body_text(f: &Fragment, placeholders: bool) -> String {
    let mut out = String::new();
    if !f.description.is_empty() {
        let _ = writeln!(out, "  description {}", quote(&f.description));
    }
    for v in &f.inputs {
        write_input(&mut out, v, placeholders);
    }
    for v in &f.residents {
        write_var(&mut out, v, placeholders);
    }
    out
}

pub(crate) fn write_fragment(f: &Fragment) -> String {
    let mut out = String::new();
    comments(&mut out, &f.comments, "");
    let kw = if f.is_stub { "stub" } else { "fragment" };
    let _ = writeln!(out, "{kw} {} {{", format_name(&f.name, false));
    out.push_str(&fragment_body_text(f, false));
    out.push_str("}\n");
    out
}

pub(crate) fn write_definition(name: &str, d: &Definition) -> String {
    let mut out = String::new();
    comments(&mut out, &d.comments, "");
    let _ = write!(out, "define {} states {}", format_name(name, false), space(&d.states, false));
    if !d.description.is_empty() {
        let _ = write!(out, " description {}", quote(&d.description));
    }
    out.push('\n');
    out
}

pub(crate) fn write_class(c: &VariableClass) -> String {
    let mut out = String::new();
    comments(&mut out, &c.comments, "");
    let _ = write!(out, "class {}", format_name(&c.name, false));
    if let Some(p) = &c.parent {
        let _ = write!(out, " : {}", format_name(p, false));
    }
    out.push_str(" {\n");
    if let Some(s) = &c.states {
        let _ = writeln!(out, "  states {}", space(s, false));
    }
    if let Some(d) = &c.description {
        let _ = writeln!(out, "  description {}", quote(d));
    }
    if let Some(spec) = &c.default_cpt {
        let _ = writeln!(out, "  {}", write_cpt(spec, "  ", false));
    }
    for k in c.constraints.iter().flatten() {
        let _ = writeln!(
            out,
            "  constraint P(self = {} | class {}) {}",
            format_label(&k.target, false),
            format_name(&k.parent_class, false),
            k.direction
        );
    }
    out.push_str("}\n");
    out
}

pub(crate) fn write_template(t: &Template) -> String {
    let mut out = String::new();
    comments(&mut out, &t.comments, "");
    let params: Vec<String> = t
        .params
        .iter()
        .map(|p| {
            let kind = match p.kind {
                ParamKind::Identifier => "ident",
                ParamKind::StateRange => "states",
            };
            format!("{}: {kind}", p.name)
        })
        .collect();
    let _ = writeln!(out, "template {}({}) {{", format_name(&t.name, false), params.join(", "));
    out.push_str(&fragment_body_text(&t.body, true));
    out.push_str("}\n");
    out
}

pub(crate) fn write_instance(i: &Instance) -> String {
    let mut out = String::new();
    comments(&mut out, &i.comments, "");
    let args: Vec<String> = i
        .bindings
        .iter()
        .map(|(p, v)| match v {
            ParamValue::Identifier(id) => format!("{p} = {}", format_name(id, false)),
            ParamValue::States(ls) => format!("{p} = {}", labels(ls, false)),
        })
        .collect();
    let _ = writeln!(out, "instance {}({})", format_name(&i.template, false), args.join(", "));
    out
}

pub(crate) fn write_model(m: &ModelDecl) -> String {
    let mut out = String::new();
    comments(&mut out, &m.comments, "");
    let _ = writeln!(out, "model {} {{", format_name(&m.name, false));
    if !m.description.is_empty() {
        let _ = writeln!(out, "  description {}", quote(&m.description));
    }
    if !m.fragments.is_empty() {
        let _ = writeln!(out, "  fragments {}", names(&m.fragments, false));
    }
    for b in &m.bindings {
        let _ = writeln!(
            out,
            "  bind {}.{} = {}.{}",
            format_name(&b.input.fragment, false),
            format_name(&b.input.variable, false),
            format_name(&b.target.fragment, false),
            format_name(&b.target.variable, false)
        );
    }
    for (stub, with) in &m.replacements {
        let _ = writeln!(out, "  replace {} with {}", format_name(stub, false), format_name(with, false));
    }
    out.push_str("}\n");
    out
}

fn term(child: &str, target: &str, condition: &[(String, String)]) -> String {
    let mut s = format!("P({} = {}", format_name(child, false), format_label(target, false));
    if !condition.is_empty() {
        let parts: Vec<String> =
            condition.iter().map(|(v, l)| format!("{} = {}", format_name(v, false), format_label(l, false))).collect();
        let _ = write!(s, " | {}", parts.join(", "));
    }
    s.push(')');
    s
}

/// The constraint expression after the constraint's name.
pub(crate) fn constraint_text(c: &Constraint) -> String {
    match c {
        Constraint::Monotone { child, target, parent, direction } => format!(
            "P({} = {} | {}) {direction}",
            format_name(child, false),
            format_label(target, false),
            format_name(parent, false)
        ),
        Constraint::Inequality { child, target, lhs, rhs, relation } => {
            format!("{} {relation} {}", term(child, target, lhs), term(child, target, rhs))
        }
    }
}

pub(crate) fn write_constraint(c: &NamedConstraint) -> String {
    let mut out = String::new();
    comments(&mut out, &c.comments, "");
    let _ = writeln!(out, "constraint {} {}", format_name(&c.name, false), constraint_text(&c.constraint));
    out
}

pub(crate) fn write_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    comments(&mut out, &s.comments, "");
    let _ = writeln!(out, "scenario {} {{", format_name(&s.name, false));
    if !s.description.is_empty() {
        let _ = writeln!(out, "  description {}", quote(&s.description));
    }
    if let Some(m) = &s.model {
        let _ = writeln!(out, "  model {}", format_name(m, false));
    }
    if !s.focus.is_empty() {
        let _ = writeln!(out, "  focus {}", names(&s.focus, false));
    }
    for e in &s.evidence {
        let allowed = match &e.allowed {
            Allowed::All => "*".to_string(),
            Allowed::States(v) if v.len() == 1 => format_label(&v[0], false),
            Allowed::States(v) => labels(v, false),
        };
        let _ = writeln!(out, "  evidence {} = {allowed}", format_name(&e.variable, false));
    }
    match s.generation {
        Generation::Exhaustive => out.push_str("  exhaustive\n"),
        Generation::Sampled(g) => {
            let _ = writeln!(out, "  sampled {} seed {}", g.count, g.seed);
        }
    }
    if let Some(u) = s.unanticipated {
        let _ = writeln!(out, "  unanticipated {} seed {}", u.count, u.seed);
    }
    out.push_str("}\n");
    out
}

pub(super) fn write_kb(kb: &KnowledgeBase) -> String {
    let mut blocks: Vec<String> = Vec::new();
    blocks.extend(kb.definitions.iter().map(|(n, d)| write_definition(n, d)));
    blocks.extend(kb.classes.iter().map(write_class));
    blocks.extend(kb.templates.iter().map(write_template));
    blocks.extend(kb.fragments.iter().map(write_fragment));
    blocks.extend(kb.instances.iter().map(write_instance));
    blocks.extend(kb.models.iter().map(write_model));
    blocks.extend(kb.constraints.iter().map(write_constraint));
    blocks.extend(kb.scenarios.iter().map(write_scenario));
    blocks.join("\n")
}
