use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::check_constraints;
use crate::cpt::CptSpec;
use crate::dsl::{KnowledgeBase, SourceMap, SourceSpan};
use crate::fragments::{
    build_model, instance_name, instantiate_class_constraints, instantiate_template, ClassHierarchy, Fragment,
    FragmentError, VariableClass,
};
use crate::network::{Severity, StateSpace};
use crate::NORMALIZATION_TOLERANCE;

/// Stable identifiers of the review rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// A variable name used with differing state spaces.
    R1,
    /// Probability rows that do not sum to one or leave `[0, 1]`.
    R2,
    /// Identical rows without a declared partition; partitions without a
    /// rationale.
    R3,
    /// Declared or inherited constraint violations.
    R4,
    /// References to things that do not exist.
    R5,
    /// Stub inventory.
    R6,
    /// Class-hierarchy cycles and unused classes.
    R7,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewFinding {
    pub rule: Rule,
    pub severity: Severity,
    /// Line 0 when the item has no recorded position.
    pub location: SourceSpan,
    pub message: String,
}

impl fmt::Display for ReviewFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {} {}: {}", self.location.file, self.location.line, self.rule, self.severity, self.message)
    }
}

struct Review<'a> {
    kb: &'a KnowledgeBase,
    spans: &'a SourceMap,
    /// Instance fragment name → instance index.
    instance_of: BTreeMap<String, usize>,
    findings: Vec<ReviewFinding>,
}

impl Review<'_> {
    fn span(&self, paths: &[String]) -> SourceSpan {
        for p in paths {
            if let Some(s) = self.spans.get(p) {
                return s.clone();
            }
        }
        let file = self.spans.spans.values().next().map(|s| s.file.clone()).unwrap_or_default();
        SourceSpan { file, line: 0, column: 0, length: 0 }
    }

    /// Span of a variable of a declared fragment, template body or template
    /// instance.
    fn var_span(&self, owner: &str, var: &str) -> SourceSpan {
        let mut paths = Vec::new();
        for kind in ["fragment", "template"] {
            paths.push(format!("{kind}:{owner}/var:{var}"));
            paths.push(format!("{kind}:{owner}/input:{var}"));
            paths.push(format!("{kind}:{owner}"));
        }
        if let Some(i) = self.instance_of.get(owner) {
            paths.push(format!("instance:{i}"));
        }
        self.span(&paths)
    }

    fn push(&mut self, rule: Rule, severity: Severity, location: SourceSpan, message: String) {
        self.findings.push(ReviewFinding { rule, severity, location, message });
    }
}

fn space_text(s: &StateSpace) -> String {
    s.to_string()
}

/// Runs review rules R1–R7. Findings are ordered by file, line, rule,
/// column and message.
pub fn elicitation_review(kb: &KnowledgeBase, spans: &SourceMap) -> Vec<ReviewFinding> {
    let mut r = Review { kb, spans, instance_of: BTreeMap::new(), findings: Vec::new() };
    let hierarchy = ClassHierarchy::new(kb.classes.iter().cloned()).ok();

    let mut instances: Vec<Fragment> = Vec::new();
    for (i, inst) in kb.instances.iter().enumerate() {
        let Some(template) = kb.templates.iter().find(|t| t.name == inst.template) else {
            let loc = r.span(&[format!("instance:{i}")]);
            r.push(Rule::R5, Severity::Error, loc, format!("instance of unknown template `{}`", inst.template));
            continue;
        };
        let bindings: BTreeMap<String, _> = inst.bindings.iter().cloned().collect();
        match instantiate_template(template, &bindings) {
            Ok(f) => {
                r.instance_of.insert(f.name.clone(), i);
                instances.push(f);
            }
            Err(e) => {
                let loc = r.span(&[format!("instance:{i}")]);
                let name = instance_name(template, &bindings);
                r.push(Rule::R5, Severity::Error, loc, format!("instance `{name}` cannot be instantiated: {e}"));
            }
        }
    }
    let all: Vec<&Fragment> = kb.fragments.iter().chain(instances.iter()).collect();

    rule_r1(&mut r, &all, hierarchy.as_ref());
    rule_r2_r3(&mut r);
    rule_r4(&mut r);
    rule_r5(&mut r, &all);
    rule_r6(&mut r);
    rule_r7(&mut r, &all);

    let mut findings = r.findings;
    findings.sort_by(|a, b| {
        (&a.location.file, a.location.line, a.rule, a.location.column, &a.message).cmp(&(
            &b.location.file,
            b.location.line,
            b.rule,
            b.location.column,
            &b.message,
        ))
    });
    findings.dedup();
    findings
}

fn resolve(
    own: Option<&StateSpace>,
    class_ref: Option<&str>,
    hierarchy: Option<&ClassHierarchy>,
) -> Option<StateSpace> {
    own.cloned().or_else(|| {
        let c = class_ref?;
        crate::fragments::resolve_class(c, hierarchy?).ok()?.states.map(|s| s.value)
    })
}

fn rule_r1(r: &mut Review<'_>, all: &[&Fragment], hierarchy: Option<&ClassHierarchy>) {
    // name → occurrences (fragment, space) in declaration order
    let mut uses: BTreeMap<&str, Vec<(&str, StateSpace)>> = BTreeMap::new();
    for f in all {
        for v in &f.inputs {
            if let Some(s) = resolve(v.states.as_ref(), v.class_ref.as_deref(), hierarchy) {
                uses.entry(v.name.as_str()).or_default().push((f.name.as_str(), s));
            }
        }
        for v in &f.residents {
            if let Some(s) = resolve(v.states.as_ref(), v.class_ref.as_deref(), hierarchy) {
                uses.entry(v.name.as_str()).or_default().push((f.name.as_str(), s));
            }
        }
    }
    for (name, occurrences) in &uses {
        let (reference, source) = match r.kb.definitions.get(*name) {
            Some(d) => (d.states.clone(), String::from("the definitions registry")),
            None => (occurrences[0].1.clone(), format!("fragment `{}`", occurrences[0].0)),
        };
        for (fragment, space) in occurrences {
            if *space != reference {
                let loc = r.var_span(fragment, name);
                r.push(
                    Rule::R1,
                    Severity::Error,
                    loc,
                    format!(
                        "`{name}` has states {} in `{fragment}` but {} in {source}",
                        space_text(space),
                        space_text(&reference)
                    ),
                );
            }
        }
    }
}

fn row_problem(row: &[f64]) -> Option<String> {
    if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Some(format!("entry {x} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if libm::fabs(sum - 1.0) > NORMALIZATION_TOLERANCE {
        return Some(format!("sums to {sum}"));
    }
    None
}

fn check_spec(r: &mut Review<'_>, spec: &CptSpec, loc: SourceSpan, what: &str) {
    match spec {
        CptSpec::Explicit { rows } => {
            for (i, row) in rows.iter().enumerate() {
                if let Some(p) = row_problem(row) {
                    r.push(Rule::R2, Severity::Error, loc.clone(), format!("{what}: row {i} {p}"));
                }
            }
            let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
            for (i, row) in rows.iter().enumerate() {
                groups.entry(row.iter().map(|x| x.to_bits()).collect()).or_default().push(i);
            }
            let mut repeated: Vec<&Vec<usize>> = groups.values().filter(|g| g.len() > 1).collect();
            repeated.sort();
            for g in repeated {
                let ids: Vec<String> = g.iter().map(|i| i.to_string()).collect();
                r.push(
                    Rule::R3,
                    Severity::Warning,
                    loc.clone(),
                    format!(
                        "{what}: rows {} are identical; possible accidental equality (declare a partition with a rationale)",
                        ids.join(", ")
                    ),
                );
            }
        }
        CptSpec::Partition { elements } => {
            for (i, e) in elements.iter().enumerate() {
                if let Some(p) = row_problem(&e.distribution) {
                    r.push(Rule::R2, Severity::Error, loc.clone(), format!("{what}: partition element {i} {p}"));
                }
                if e.rationale.trim().is_empty() {
                    r.push(
                        Rule::R3,
                        Severity::Info,
                        loc.clone(),
                        format!("{what}: partition element {i} has no rationale"),
                    );
                }
            }
        }
        CptSpec::NoisyOr { links, leak } => {
            for x in links.iter().chain(core::iter::once(leak)) {
                if !(0.0..=1.0).contains(x) {
                    r.push(
                        Rule::R2,
                        Severity::Error,
                        loc.clone(),
                        format!("{what}: noisy-OR parameter {x} outside [0, 1]"),
                    );
                }
            }
        }
        CptSpec::Deterministic { .. } => {}
    }
}

fn check_fragment_tables(r: &mut Review<'_>, f: &Fragment) {
    for v in &f.inputs {
        if let Some(p) = &v.prior {
            if let Some(problem) = row_problem(p) {
                let loc = r.var_span(&f.name, &v.name);
                r.push(Rule::R2, Severity::Error, loc, format!("prior of `{}` in `{}` {problem}", v.name, f.name));
            }
        }
    }
    for v in &f.residents {
        if let Some(spec) = &v.cpt {
            let loc = r.var_span(&f.name, &v.name);
            check_spec(r, spec, loc, &format!("CPT of `{}` in `{}`", v.name, f.name));
        }
    }
}

fn rule_r2_r3(r: &mut Review<'_>) {
    let kb = r.kb;
    for f in &kb.fragments {
        check_fragment_tables(r, f);
    }
    for t in &kb.templates {
        check_fragment_tables(r, &t.body);
    }
    for c in &kb.classes {
        if let Some(spec) = &c.default_cpt {
            let loc = r.span(&[format!("class:{}", c.name)]);
            check_spec(r, spec, loc, &format!("default CPT of class `{}`", c.name));
        }
    }
}

fn rule_r4(r: &mut Review<'_>) {
    let kb = r.kb;
    let models: Vec<Option<&str>> = if kb.models.is_empty() {
        alloc::vec![None]
    } else {
        kb.models.iter().map(|m| Some(m.name.as_str())).collect()
    };
    for model in models {
        let model_loc = match model {
            Some(m) => r.span(&[format!("model:{m}")]),
            None => r.span(&[]),
        };
        let label = model.map(|m| format!("model `{m}`")).unwrap_or_else(|| "the default composition".into());
        let built = match build_model(kb, model) {
            Ok(b) => b,
            Err(e) => {
                if !matches!(e, FragmentError::UnknownFragment(_)) {
                    r.push(
                        Rule::R4,
                        Severity::Info,
                        model_loc,
                        format!("constraints not checked: {label} does not build: {e}"),
                    );
                }
                continue;
            }
        };
        let net = &built.network;
        for nc in &kb.constraints {
            if net.index_of(nc.constraint.child()).is_none() {
                continue;
            }
            let loc = r.span(&[format!("constraint:{}", nc.name)]);
            match check_constraints(net, core::slice::from_ref(&nc.constraint)) {
                Ok(report) => {
                    for v in report.violations {
                        r.push(
                            Rule::R4,
                            Severity::Error,
                            loc.clone(),
                            format!("constraint `{}` violated in {label}: {}", nc.name, v.message),
                        );
                    }
                }
                Err(e) => r.push(
                    Rule::R4,
                    Severity::Error,
                    loc,
                    format!("constraint `{}` cannot be checked in {label}: {e}", nc.name),
                ),
            }
        }
        for c in instantiate_class_constraints(net, &built.hierarchy) {
            let class = net.find(c.child()).and_then(|v| v.class_ref.clone()).unwrap_or_default();
            let loc = r.span(&[format!("class:{class}")]);
            match check_constraints(net, core::slice::from_ref(&c)) {
                Ok(report) => {
                    for v in report.violations {
                        r.push(
                            Rule::R4,
                            Severity::Error,
                            loc.clone(),
                            format!("inherited constraint violated in {label}: {}", v.message),
                        );
                    }
                }
                Err(e) => r.push(
                    Rule::R4,
                    Severity::Error,
                    loc,
                    format!("inherited constraint `{c}` cannot be checked in {label}: {e}"),
                ),
            }
        }
    }
}

fn rule_r5(r: &mut Review<'_>, all: &[&Fragment]) {
    let kb = r.kb;
    let classes: BTreeSet<&str> = kb.classes.iter().map(|c| c.name.as_str()).collect();
    let fragments: BTreeMap<&str, &Fragment> = all.iter().map(|f| (f.name.as_str(), *f)).collect();
    let variables: BTreeSet<&str> = all
        .iter()
        .flat_map(|f| f.inputs.iter().map(|v| v.name.as_str()).chain(f.residents.iter().map(|v| v.name.as_str())))
        .collect();

    for c in &kb.classes {
        let loc = r.span(&[format!("class:{}", c.name)]);
        if let Some(p) = &c.parent {
            if !classes.contains(p.as_str()) {
                r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("class `{}` extends unknown class `{p}`", c.name),
                );
            }
        }
        for k in c.constraints.iter().flatten() {
            if !classes.contains(k.parent_class.as_str()) {
                r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("class `{}` constrains unknown class `{}`", c.name, k.parent_class),
                );
            }
        }
    }

    let bodies = kb.templates.iter().map(|t| &t.body);
    for f in all.iter().copied().chain(bodies) {
        let local: BTreeSet<&str> =
            f.inputs.iter().map(|v| v.name.as_str()).chain(f.residents.iter().map(|v| v.name.as_str())).collect();
        let refs =
            f.inputs.iter().map(|v| (&v.name, &v.class_ref)).chain(f.residents.iter().map(|v| (&v.name, &v.class_ref)));
        for (name, class_ref) in refs {
            if let Some(c) = class_ref {
                if !classes.contains(c.as_str()) && !c.starts_with("${") {
                    let loc = r.var_span(&f.name, name);
                    r.push(
                        Rule::R5,
                        Severity::Error,
                        loc,
                        format!("`{name}` in `{}` refers to unknown class `{c}`", f.name),
                    );
                }
            }
        }
        for v in &f.residents {
            for p in &v.parents {
                if !local.contains(p.as_str()) {
                    let loc = r.var_span(&f.name, &v.name);
                    r.push(
                        Rule::R5,
                        Severity::Error,
                        loc,
                        format!("parent `{p}` of `{}` is not declared in `{}`", v.name, f.name),
                    );
                }
            }
        }
    }

    for m in &kb.models {
        let loc = r.span(&[format!("model:{}", m.name)]);
        for name in &m.fragments {
            if !fragments.contains_key(name.as_str()) {
                r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("model `{}` lists unknown fragment `{name}`", m.name),
                );
            }
        }
        for b in &m.bindings {
            match fragments.get(b.input.fragment.as_str()) {
                None => r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("binding from unknown fragment `{}`", b.input.fragment),
                ),
                Some(f) if f.input(&b.input.variable).is_none() => r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("binding from `{}`, which is not an input", b.input),
                ),
                _ => {}
            }
            match fragments.get(b.target.fragment.as_str()) {
                None => r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("binding to unknown fragment `{}`", b.target.fragment),
                ),
                Some(f) if f.resident(&b.target.variable).is_none() => r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("binding to `{}`, which is not a resident variable", b.target),
                ),
                _ => {}
            }
        }
        for (stub, with) in &m.replacements {
            match fragments.get(stub.as_str()) {
                Some(f) if f.is_stub => {}
                Some(_) => {
                    r.push(Rule::R5, Severity::Error, loc.clone(), format!("`{stub}` is replaced but is not a stub"))
                }
                None => r.push(Rule::R5, Severity::Error, loc.clone(), format!("replacement of unknown stub `{stub}`")),
            }
            if !fragments.contains_key(with.as_str()) {
                r.push(Rule::R5, Severity::Error, loc.clone(), format!("replacement fragment `{with}` does not exist"));
            }
        }
    }

    for nc in &kb.constraints {
        if !variables.contains(nc.constraint.child()) {
            let loc = r.span(&[format!("constraint:{}", nc.name)]);
            r.push(
                Rule::R5,
                Severity::Error,
                loc,
                format!("constraint `{}` refers to unknown variable `{}`", nc.name, nc.constraint.child()),
            );
        }
    }

    let models: BTreeSet<&str> = kb.models.iter().map(|m| m.name.as_str()).collect();
    for s in &kb.scenarios {
        let loc = r.span(&[format!("scenario:{}", s.name)]);
        if let Some(m) = &s.model {
            if !models.contains(m.as_str()) {
                r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("scenario `{}` uses unknown model `{m}`", s.name),
                );
            }
        }
        for v in s.focus.iter().chain(s.evidence.iter().map(|e| &e.variable)) {
            if !variables.contains(v.as_str()) {
                r.push(
                    Rule::R5,
                    Severity::Error,
                    loc.clone(),
                    format!("scenario `{}` refers to unknown variable `{v}`", s.name),
                );
            }
        }
    }
}

fn rule_r6(r: &mut Review<'_>) {
    let kb = r.kb;
    for f in kb.fragments.iter().filter(|f| f.is_stub) {
        let names: Vec<&str> = f.residents.iter().map(|v| v.name.as_str()).collect();
        let loc = r.span(&[format!("fragment:{}", f.name)]);
        r.push(Rule::R6, Severity::Info, loc, format!("stub `{}` stands in for: {}", f.name, names.join(", ")));
    }
}

fn rule_r7(r: &mut Review<'_>, all: &[&Fragment]) {
    let kb = r.kb;
    let hierarchy = match ClassHierarchy::new(kb.classes.iter().cloned()) {
        Ok(h) => h,
        Err(e) => {
            let loc = r.span(&[]);
            r.push(Rule::R7, Severity::Error, loc, e.to_string());
            return;
        }
    };
    for cycle in hierarchy.cycles() {
        let loc = r.span(&[format!("class:{}", cycle[0])]);
        r.push(Rule::R7, Severity::Error, loc, format!("class hierarchy cycle: {}", cycle.join(" -> ")));
    }
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let bodies = kb.templates.iter().map(|t| &t.body);
    for f in all.iter().copied().chain(bodies) {
        used.extend(f.inputs.iter().filter_map(|v| v.class_ref.as_deref()));
        used.extend(f.residents.iter().filter_map(|v| v.class_ref.as_deref()));
    }
    for c in &kb.classes {
        if let Some(p) = &c.parent {
            used.insert(p.as_str());
        }
        used.extend(c.constraints.iter().flatten().map(|k| k.parent_class.as_str()));
    }
    for VariableClass { name, .. } in &kb.classes {
        if !used.contains(name.as_str()) {
            let loc = r.span(&[format!("class:{name}")]);
            r.push(Rule::R7, Severity::Warning, loc, format!("class `{name}` is never used"));
        }
    }
}
