use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::lexer::{lex, Tok, Token};
use super::{
    BindDecl, Definition, Diagnostic, Instance, KnowledgeBase, ModelDecl, NamedConstraint, SourceMap, SourceSpan,
};
use crate::constraint::{Constraint, Direction, Relation};
use crate::cpt::{ConfigPattern, CptSpec, PartitionElement, Selector};
use crate::fragments::{
    ClassConstraint, Fragment, InputVar, ParamKind, ParamValue, ResidentVar, Template, TemplateParam, VarRef,
    VariableClass,
};
use crate::harness::{Allowed, EvidenceSpec, Generation, Sampling, Scenario};
use crate::network::StateSpace;

const TOP_LEVEL: [&str; 9] =
    ["define", "class", "template", "fragment", "stub", "instance", "model", "constraint", "scenario"];
const CPT_KEYWORDS: [&str; 5] = ["prior", "cpt", "partition", "noisyor", "deterministic"];
/// Largest `a..b` range accepted in an instance binding.
const MAX_RANGE: u64 = 10_000;

/// Marker for an error that has already been reported as a diagnostic.
struct Reported;

type PResult<T> = Result<T, Reported>;

/// Child, target state, assigned condition and an optional bare parent.
type Term = (String, String, Vec<(String, String)>, Option<String>);

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    diags: Vec<Diagnostic>,
    map: SourceMap,
    in_template: bool,
}

pub(super) fn parse(text: &str, file: &str) -> Result<(KnowledgeBase, SourceMap), Vec<Diagnostic>> {
    let (toks, diags) = lex(text, file);
    let mut p = Parser { toks, pos: 0, file, diags, map: SourceMap::default(), in_template: false };
    let kb = p.knowledge_base();
    if p.diags.is_empty() {
        Ok((kb, p.map))
    } else {
        Err(p.diags)
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn span(&self, t: &Token) -> SourceSpan {
        SourceSpan { file: self.file.to_string(), line: t.line, column: t.column, length: t.length.max(1) }
    }

    fn error_at(&mut self, span: SourceSpan, message: String, expected: &[&str]) -> Reported {
        self.diags.push(Diagnostic { span, message, expected: expected.iter().map(|s| s.to_string()).collect() });
        Reported
    }

    fn unexpected(&mut self, expected: &[&str]) -> Reported {
        let t = self.peek().clone();
        let msg = format!("expected {}, found {}", expected.join(" or "), t.tok.describe());
        self.error_at(self.span(&t), msg, expected)
    }

    fn is_kw(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == word)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, word: &'static str) -> PResult<Token> {
        if self.is_kw(word) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[word]))
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[p]))
        }
    }

    /// Identifier, string, or placeholder inside a template body.
    fn name(&mut self) -> PResult<(String, Token)> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) | Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok((s, t))
            }
            Tok::Placeholder(p) if self.in_template => {
                let s = format!("${{{p}}}");
                self.bump();
                Ok((s, t))
            }
            _ => Err(self.unexpected(&["name"])),
        }
    }

    fn label(&mut self) -> PResult<String> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => match self.name() {
                Ok((s, _)) => Ok(s),
                Err(r) => {
                    if let Some(d) = self.diags.last_mut() {
                        d.message = format!("expected state label, found {}", t.tok.describe());
                        d.expected = vec!["state label".into()];
                    }
                    Err(r)
                }
            },
        }
    }

    fn string(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(&["string"])),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(s) => match s.parse::<f64>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => Err(self.error_at(self.span(&t), format!("malformed number `{s}`"), &["number"])),
            },
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn integer(&mut self) -> PResult<u64> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(s) => match s.parse::<u64>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => Err(self.error_at(
                    self.span(&t),
                    format!("expected a non-negative integer, found `{s}`"),
                    &["integer"],
                )),
            },
            _ => Err(self.unexpected(&["integer"])),
        }
    }

    /// `( n, n, ... )`; commas are optional. A vector that never closes is
    /// reported at its opening parenthesis.
    fn vector(&mut self) -> PResult<Vec<f64>> {
        let open = self.expect_punct("(")?;
        let mut out = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Punct(")") => {
                    self.bump();
                    return Ok(out);
                }
                Tok::Punct(",") if !out.is_empty() => {
                    self.bump();
                }
                Tok::Number(_) => out.push(self.number()?),
                _ => {
                    let found = self.peek().tok.describe();
                    let span = self.span(&open);
                    return Err(self.error_at(
                        span,
                        format!("unclosed `(`: found {found} inside a probability vector"),
                        &["number", ",", ")"],
                    ));
                }
            }
        }
    }

    fn name_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.name()?.0];
        while self.eat_punct(",") {
            out.push(self.name()?.0);
        }
        Ok(out)
    }

    /// `{ l1, l2, ... }`, possibly empty.
    fn label_set(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        if self.eat_punct("}") {
            return Ok(out);
        }
        loop {
            out.push(self.label()?);
            if self.eat_punct("}") {
                return Ok(out);
            }
            if !self.eat_punct(",") {
                return Err(self.unexpected(&[",", "}"]));
            }
        }
    }

    fn state_space(&mut self) -> PResult<StateSpace> {
        let ordered = if self.is_kw("ordered") {
            self.bump();
            true
        } else {
            false
        };
        let open = self.peek().clone();
        let labels = self.label_set()?;
        if self.in_template {
            return Ok(StateSpace::unchecked(labels, ordered));
        }
        StateSpace::new(labels, ordered).map_err(|e| {
            let span = self.span(&open);
            self.error_at(span, format!("invalid state space: {e}"), &[])
        })
    }

    fn duplicate_clause(&mut self, t: &Token, what: &str) -> Reported {
        let span = self.span(t);
        self.error_at(span, format!("duplicate `{what}` clause"), &[])
    }

    fn knowledge_base(&mut self) -> KnowledgeBase {
        let mut kb = KnowledgeBase::default();
        let mut seen: [BTreeSet<String>; 6] = Default::default();
        let mut instance_refs: Vec<(String, SourceSpan)> = Vec::new();

        loop {
            let t = self.peek().clone();
            let Tok::Ident(word) = &t.tok else {
                if t.tok == Tok::Eof {
                    break;
                }
                let _ = self.unexpected(&TOP_LEVEL);
                self.recover();
                continue;
            };
            let word = word.clone();
            let comments = t.comments.clone();
            let result = match word.as_str() {
                "define" => self.definition(comments).map(|(name, tok, d)| {
                    if self.claim(&mut seen[0], "definition", &name, &tok, "define") {
                        kb.definitions.insert(name, d);
                    }
                }),
                "class" => self.class(comments).map(|(c, tok)| {
                    if self.claim(&mut seen[1], "class", &c.name, &tok, "class") {
                        kb.classes.push(c);
                    }
                }),
                "template" => self.template(comments).map(|(tp, tok)| {
                    if self.claim(&mut seen[2], "template", &tp.name, &tok, "template") {
                        kb.templates.push(tp);
                    }
                }),
                "fragment" | "stub" => self.fragment(comments).map(|(f, tok)| {
                    if self.claim(&mut seen[3], "fragment", &f.name, &tok, "fragment") {
                        kb.fragments.push(f);
                    }
                }),
                "instance" => self.instance(comments).map(|(inst, tok)| {
                    let span = self.span(&tok);
                    self.map.spans.insert(format!("instance:{}", kb.instances.len()), span.clone());
                    instance_refs.push((inst.template.clone(), span));
                    kb.instances.push(inst);
                }),
                "model" => self.model(comments).map(|(m, tok)| {
                    if self.claim(&mut seen[4], "model", &m.name, &tok, "model") {
                        kb.models.push(m);
                    }
                }),
                "constraint" => self.constraint(comments).map(|(c, tok)| {
                    if self.claim(&mut seen[5], "constraint", &c.name, &tok, "constraint") {
                        kb.constraints.push(c);
                    }
                }),
                "scenario" => self.scenario(comments).map(|(s, tok)| {
                    let mut names: BTreeSet<String> = kb.scenarios.iter().map(|s| s.name.clone()).collect();
                    if self.claim(&mut names, "scenario", &s.name, &tok, "scenario") {
                        kb.scenarios.push(s);
                    }
                }),
                _ => Err(self.unexpected(&TOP_LEVEL)),
            };
            if result.is_err() {
                self.recover();
            }
        }

        for (template, span) in instance_refs {
            if !kb.templates.iter().any(|t| t.name == template) {
                self.error_at(span, format!("unknown template `{template}`"), &[]);
            }
        }
        kb
    }

    /// Registers `name`, reporting a duplicate-name diagnostic when taken.
    fn claim(&mut self, seen: &mut BTreeSet<String>, kind: &str, name: &str, tok: &Token, prefix: &str) -> bool {
        let span = self.span(tok);
        if !seen.insert(name.to_string()) {
            self.error_at(span, format!("duplicate {kind} name `{name}`"), &[]);
            return false;
        }
        self.map.spans.insert(format!("{prefix}:{name}"), span);
        true
    }

    /// Skips to the next top-level keyword at the start of a line.
    fn recover(&mut self) {
        self.bump();
        loop {
            let t = self.peek();
            match &t.tok {
                Tok::Eof => return,
                Tok::Ident(w) if t.column == 1 && TOP_LEVEL.contains(&w.as_str()) => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn definition(&mut self, comments: Vec<String>) -> PResult<(String, Token, Definition)> {
        self.expect_kw("define")?;
        let (name, tok) = self.name()?;
        self.expect_kw("states")?;
        let states = self.state_space()?;
        let description = if self.is_kw("description") {
            self.bump();
            self.string()?
        } else {
            String::new()
        };
        Ok((name, tok, Definition { states, description, comments }))
    }

    fn class(&mut self, comments: Vec<String>) -> PResult<(VariableClass, Token)> {
        self.expect_kw("class")?;
        let (name, tok) = self.name()?;
        let mut class = VariableClass::new(name);
        class.comments = comments;
        if self.eat_punct(":") {
            class.parent = Some(self.name()?.0);
        }
        self.expect_punct("{")?;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct("}") => {
                    self.bump();
                    break;
                }
                Tok::Ident(w) if w == "states" => {
                    self.bump();
                    if class.states.is_some() {
                        return Err(self.duplicate_clause(&t, "states"));
                    }
                    class.states = Some(self.state_space()?);
                }
                Tok::Ident(w) if w == "description" => {
                    self.bump();
                    if class.description.is_some() {
                        return Err(self.duplicate_clause(&t, "description"));
                    }
                    class.description = Some(self.string()?);
                }
                Tok::Ident(w) if CPT_KEYWORDS.contains(&w.as_str()) => {
                    if class.default_cpt.is_some() {
                        return Err(self.duplicate_clause(&t, "CPT"));
                    }
                    class.default_cpt = Some(self.cpt()?);
                }
                Tok::Ident(w) if w == "constraint" => {
                    self.bump();
                    let c = self.class_constraint()?;
                    class.constraints.get_or_insert_with(Vec::new).push(c);
                }
                _ => {
                    let mut expected = vec!["states", "description", "constraint", "}"];
                    expected.extend(CPT_KEYWORDS);
                    return Err(self.unexpected(&expected));
                }
            }
        }
        Ok((class, tok))
    }

    /// `P(self = s | class C) nonincreasing`
    fn class_constraint(&mut self) -> PResult<ClassConstraint> {
        self.expect_kw("P")?;
        self.expect_punct("(")?;
        self.expect_kw("self")?;
        self.expect_punct("=")?;
        let target = self.label()?;
        self.expect_punct("|")?;
        self.expect_kw("class")?;
        let parent_class = self.name()?.0;
        self.expect_punct(")")?;
        let direction = self.direction()?;
        Ok(ClassConstraint { target, parent_class, direction })
    }

    fn direction(&mut self) -> PResult<Direction> {
        if self.is_kw("nonincreasing") {
            self.bump();
            Ok(Direction::NonIncreasing)
        } else if self.is_kw("nondecreasing") {
            self.bump();
            Ok(Direction::NonDecreasing)
        } else {
            Err(self.unexpected(&["nonincreasing", "nondecreasing"]))
        }
    }

    fn cpt(&mut self) -> PResult<CptSpec> {
        let t = self.bump();
        let Tok::Ident(w) = &t.tok else { unreachable_cpt() };
        match w.as_str() {
            "prior" => Ok(CptSpec::Explicit { rows: vec![self.vector()?] }),
            "cpt" => {
                self.expect_punct("{")?;
                let mut rows = Vec::new();
                while !self.eat_punct("}") {
                    if !self.is_punct("(") {
                        return Err(self.unexpected(&["(", "}"]));
                    }
                    rows.push(self.vector()?);
                }
                Ok(CptSpec::Explicit { rows })
            }
            "partition" => {
                self.expect_punct("{")?;
                let mut elements = Vec::new();
                while !self.eat_punct("}") {
                    if !self.is_kw("when") {
                        return Err(self.unexpected(&["when", "}"]));
                    }
                    self.bump();
                    let mut patterns = vec![self.pattern()?];
                    while self.eat_punct("|") {
                        patterns.push(self.pattern()?);
                    }
                    let rationale = if self.is_kw("because") {
                        self.bump();
                        self.string()?
                    } else {
                        String::new()
                    };
                    self.expect_punct("->")?;
                    let distribution = self.vector()?;
                    elements.push(PartitionElement { patterns, rationale, distribution });
                }
                Ok(CptSpec::Partition { elements })
            }
            "noisyor" => {
                self.expect_punct("{")?;
                self.expect_kw("links")?;
                let links = self.vector()?;
                self.expect_kw("leak")?;
                let leak = self.number()?;
                self.expect_punct("}")?;
                Ok(CptSpec::NoisyOr { links, leak })
            }
            _ => Ok(CptSpec::Deterministic { outcomes: self.label_set()? }),
        }
    }

    fn pattern(&mut self) -> PResult<ConfigPattern> {
        self.expect_punct("(")?;
        let mut sels = Vec::new();
        if self.eat_punct(")") {
            return Ok(ConfigPattern(sels));
        }
        loop {
            sels.push(self.selector()?);
            if self.eat_punct(")") {
                return Ok(ConfigPattern(sels));
            }
            if !self.eat_punct(",") {
                return Err(self.unexpected(&[",", ")"]));
            }
        }
    }

    fn selector(&mut self) -> PResult<Selector> {
        if self.eat_punct("*") {
            Ok(Selector::Any)
        } else if self.is_punct("{") {
            Ok(Selector::States(self.label_set()?))
        } else {
            Ok(Selector::state(self.label()?))
        }
    }

    fn template(&mut self, comments: Vec<String>) -> PResult<(Template, Token)> {
        self.expect_kw("template")?;
        let (name, tok) = self.name()?;
        self.expect_punct("(")?;
        let mut params: Vec<TemplateParam> = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let pt = self.peek().clone();
                let Tok::Ident(pname) = &pt.tok else {
                    return Err(self.unexpected(&["parameter name"]));
                };
                let pname = pname.clone();
                self.bump();
                if params.iter().any(|p| p.name == pname) {
                    let span = self.span(&pt);
                    return Err(self.error_at(span, format!("duplicate parameter `{pname}`"), &[]));
                }
                self.expect_punct(":")?;
                let kind = if self.is_kw("ident") {
                    ParamKind::Identifier
                } else if self.is_kw("states") {
                    ParamKind::StateRange
                } else {
                    return Err(self.unexpected(&["ident", "states"]));
                };
                self.bump();
                params.push(TemplateParam { name: pname, kind });
                if self.eat_punct(")") {
                    break;
                }
                if !self.eat_punct(",") {
                    return Err(self.unexpected(&[",", ")"]));
                }
            }
        }
        self.in_template = true;
        let body = self.fragment_body(&name, &format!("template:{name}"));
        self.in_template = false;
        let mut body = body?;
        body.name = name.clone();
        let template = Template { name, params, body, comments };
        for ph in template.placeholders() {
            if !template.params.iter().any(|p| p.name == ph) {
                let span = self.span(&tok);
                self.error_at(span, format!("undeclared placeholder `${{{ph}}}` in template `{}`", template.name), &[]);
            }
        }
        Ok((template, tok))
    }

    fn fragment(&mut self, comments: Vec<String>) -> PResult<(Fragment, Token)> {
        let is_stub = self.is_kw("stub");
        self.bump();
        let (name, tok) = self.name()?;
        let mut f = self.fragment_body(&name, &format!("fragment:{name}"))?;
        f.is_stub = is_stub;
        f.comments = comments;
        Ok((f, tok))
    }

    fn fragment_body(&mut self, name: &str, path: &str) -> PResult<Fragment> {
        let mut f = Fragment::new(name);
        self.expect_punct("{")?;
        let mut names = BTreeSet::new();
        let mut description_seen = false;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct("}") => {
                    self.bump();
                    return Ok(f);
                }
                Tok::Ident(w) if w == "description" => {
                    self.bump();
                    if description_seen {
                        return Err(self.duplicate_clause(&t, "description"));
                    }
                    description_seen = true;
                    f.description = self.string()?;
                }
                Tok::Ident(w) if w == "input" || w == "var" => {
                    let is_input = w == "input";
                    self.bump();
                    let (vname, vtok) = self.name()?;
                    let span = self.span(&vtok);
                    if !names.insert(vname.clone()) {
                        return Err(self.error_at(span, format!("`{vname}` declared twice in `{name}`"), &[]));
                    }
                    let kind = if is_input { "input" } else { "var" };
                    self.map.spans.insert(format!("{path}/{kind}:{vname}"), span);
                    if is_input {
                        let mut v = self.input_clauses(vname)?;
                        v.comments = t.comments.clone();
                        f.inputs.push(v);
                    } else {
                        let mut v = self.var_clauses(vname)?;
                        v.comments = t.comments.clone();
                        f.residents.push(v);
                    }
                }
                _ => return Err(self.unexpected(&["input", "var", "description", "}"])),
            }
        }
    }

    fn class_ref(&mut self) -> PResult<Option<String>> {
        if self.eat_punct(":") {
            Ok(Some(self.name()?.0))
        } else {
            Ok(None)
        }
    }

    fn input_clauses(&mut self, name: String) -> PResult<InputVar> {
        let mut v = InputVar {
            name,
            class_ref: self.class_ref()?,
            states: None,
            prior: None,
            description: String::new(),
            comments: Vec::new(),
        };
        let mut described = false;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Ident(w) if w == "states" => {
                    self.bump();
                    if v.states.is_some() {
                        return Err(self.duplicate_clause(&t, "states"));
                    }
                    v.states = Some(self.state_space()?);
                }
                Tok::Ident(w) if w == "prior" => {
                    self.bump();
                    if v.prior.is_some() {
                        return Err(self.duplicate_clause(&t, "prior"));
                    }
                    v.prior = Some(self.vector()?);
                }
                Tok::Ident(w) if w == "description" => {
                    self.bump();
                    if described {
                        return Err(self.duplicate_clause(&t, "description"));
                    }
                    described = true;
                    v.description = self.string()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn var_clauses(&mut self, name: String) -> PResult<ResidentVar> {
        let mut v = ResidentVar {
            name,
            class_ref: self.class_ref()?,
            states: None,
            parents: Vec::new(),
            cpt: None,
            description: String::new(),
            comments: Vec::new(),
        };
        let (mut described, mut given) = (false, false);
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Ident(w) if w == "states" => {
                    self.bump();
                    if v.states.is_some() {
                        return Err(self.duplicate_clause(&t, "states"));
                    }
                    v.states = Some(self.state_space()?);
                }
                Tok::Ident(w) if w == "given" => {
                    self.bump();
                    if given {
                        return Err(self.duplicate_clause(&t, "given"));
                    }
                    given = true;
                    v.parents = self.name_list()?;
                }
                Tok::Ident(w) if CPT_KEYWORDS.contains(&w.as_str()) => {
                    if v.cpt.is_some() {
                        return Err(self.duplicate_clause(&t, "CPT"));
                    }
                    v.cpt = Some(self.cpt()?);
                }
                Tok::Ident(w) if w == "description" => {
                    self.bump();
                    if described {
                        return Err(self.duplicate_clause(&t, "description"));
                    }
                    described = true;
                    v.description = self.string()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn instance(&mut self, comments: Vec<String>) -> PResult<(Instance, Token)> {
        self.expect_kw("instance")?;
        let (template, tok) = self.name()?;
        self.expect_punct("(")?;
        let mut bindings: Vec<(String, ParamValue)> = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let pt = self.peek().clone();
                let Tok::Ident(param) = &pt.tok else {
                    return Err(self.unexpected(&["parameter name"]));
                };
                let param = param.clone();
                self.bump();
                if bindings.iter().any(|(p, _)| *p == param) {
                    let span = self.span(&pt);
                    return Err(self.error_at(span, format!("parameter `{param}` bound twice"), &[]));
                }
                self.expect_punct("=")?;
                let value = self.param_value()?;
                bindings.push((param, value));
                if self.eat_punct(")") {
                    break;
                }
                if !self.eat_punct(",") {
                    return Err(self.unexpected(&[",", ")"]));
                }
            }
        }
        Ok((Instance { template, bindings, comments }, tok))
    }

    fn param_value(&mut self) -> PResult<ParamValue> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Punct("{") => Ok(ParamValue::States(self.label_set()?)),
            Tok::Number(_) => {
                let lo = self.integer()?;
                self.expect_punct("..")?;
                let hi_tok = self.peek().clone();
                let hi = self.integer()?;
                if hi < lo || hi - lo >= MAX_RANGE {
                    let span = self.span(&hi_tok);
                    return Err(self.error_at(span, format!("invalid range {lo}..{hi}"), &[]));
                }
                Ok(ParamValue::States((lo..=hi).map(|n| n.to_string()).collect()))
            }
            Tok::Ident(s) | Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(ParamValue::Identifier(s))
            }
            _ => Err(self.unexpected(&["identifier", "{", "range"])),
        }
    }

    fn var_ref(&mut self) -> PResult<VarRef> {
        let fragment = self.name()?.0;
        self.expect_punct(".")?;
        let variable = self.name()?.0;
        Ok(VarRef { fragment, variable })
    }

    fn model(&mut self, comments: Vec<String>) -> PResult<(ModelDecl, Token)> {
        self.expect_kw("model")?;
        let (name, tok) = self.name()?;
        let mut m = ModelDecl {
            name,
            fragments: Vec::new(),
            bindings: Vec::new(),
            replacements: Vec::new(),
            description: String::new(),
            comments,
        };
        let mut described = false;
        self.expect_punct("{")?;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct("}") => {
                    self.bump();
                    return Ok((m, tok));
                }
                Tok::Ident(w) if w == "description" => {
                    self.bump();
                    if described {
                        return Err(self.duplicate_clause(&t, "description"));
                    }
                    described = true;
                    m.description = self.string()?;
                }
                Tok::Ident(w) if w == "fragments" => {
                    self.bump();
                    m.fragments.extend(self.name_list()?);
                }
                Tok::Ident(w) if w == "bind" => {
                    self.bump();
                    let input = self.var_ref()?;
                    self.expect_punct("=")?;
                    let target = self.var_ref()?;
                    m.bindings.push(BindDecl { input, target });
                }
                Tok::Ident(w) if w == "replace" => {
                    self.bump();
                    let stub = self.name()?.0;
                    self.expect_kw("with")?;
                    let replacement = self.name()?.0;
                    m.replacements.push((stub, replacement));
                }
                _ => return Err(self.unexpected(&["fragments", "bind", "replace", "description", "}"])),
            }
        }
    }

    /// `P(C = s | A = a, ...)`, returning child, target and the condition;
    /// a bare parent name (`| A)`) comes back as the fourth element.
    fn probability_term(&mut self) -> PResult<Term> {
        self.expect_kw("P")?;
        self.expect_punct("(")?;
        let child = self.name()?.0;
        self.expect_punct("=")?;
        let target = self.label()?;
        let mut condition = Vec::new();
        if self.eat_punct("|") {
            let first = self.name()?.0;
            if self.eat_punct(")") {
                return Ok((child, target, condition, Some(first)));
            }
            self.expect_punct("=")?;
            condition.push((first, self.label()?));
            while self.eat_punct(",") {
                let v = self.name()?.0;
                self.expect_punct("=")?;
                condition.push((v, self.label()?));
            }
        }
        self.expect_punct(")")?;
        Ok((child, target, condition, None))
    }

    fn constraint(&mut self, comments: Vec<String>) -> PResult<(NamedConstraint, Token)> {
        self.expect_kw("constraint")?;
        let (name, tok) = self.name()?;
        let start = self.peek().clone();
        let (child, target, lhs, parent) = self.probability_term()?;
        let constraint = if let Some(parent) = parent {
            Constraint::Monotone { child, target, parent, direction: self.direction()? }
        } else {
            let relation = if self.eat_punct("<=") {
                Relation::LessEq
            } else if self.eat_punct("<") {
                Relation::Less
            } else {
                return Err(self.unexpected(&["<", "<="]));
            };
            let (child2, target2, rhs, bare) = self.probability_term()?;
            if child2 != child || target2 != target || bare.is_some() {
                let span = self.span(&start);
                return Err(self.error_at(
                    span,
                    "both sides of an inequality must condition the same `P(child = state | ...)` on full assignments"
                        .into(),
                    &[],
                ));
            }
            Constraint::Inequality { child, target, lhs, rhs, relation }
        };
        Ok((NamedConstraint { name, constraint, comments }, tok))
    }

    fn scenario(&mut self, comments: Vec<String>) -> PResult<(Scenario, Token)> {
        self.expect_kw("scenario")?;
        let (name, tok) = self.name()?;
        let mut s = Scenario::new(name);
        s.comments = comments;
        let (mut described, mut generation_seen) = (false, false);
        self.expect_punct("{")?;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct("}") => {
                    self.bump();
                    return Ok((s, tok));
                }
                Tok::Ident(w) => match w.as_str() {
                    "description" => {
                        self.bump();
                        if described {
                            return Err(self.duplicate_clause(&t, "description"));
                        }
                        described = true;
                        s.description = self.string()?;
                    }
                    "model" => {
                        self.bump();
                        if s.model.is_some() {
                            return Err(self.duplicate_clause(&t, "model"));
                        }
                        s.model = Some(self.name()?.0);
                    }
                    "focus" => {
                        self.bump();
                        s.focus.extend(self.name_list()?);
                    }
                    "evidence" => {
                        self.bump();
                        loop {
                            let variable = self.name()?.0;
                            self.expect_punct("=")?;
                            let allowed = if self.eat_punct("*") {
                                Allowed::All
                            } else if self.is_punct("{") {
                                Allowed::States(self.label_set()?)
                            } else {
                                Allowed::States(vec![self.label()?])
                            };
                            s.evidence.push(EvidenceSpec { variable, allowed });
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    "exhaustive" | "sampled" => {
                        if generation_seen {
                            return Err(self.duplicate_clause(&t, "generation"));
                        }
                        generation_seen = true;
                        self.bump();
                        s.generation = if w == "exhaustive" {
                            Generation::Exhaustive
                        } else {
                            Generation::Sampled(self.sampling()?)
                        };
                    }
                    "unanticipated" => {
                        self.bump();
                        if s.unanticipated.is_some() {
                            return Err(self.duplicate_clause(&t, "unanticipated"));
                        }
                        s.unanticipated = Some(self.sampling()?);
                    }
                    _ => return Err(self.unexpected(&SCENARIO_CLAUSES)),
                },
                _ => return Err(self.unexpected(&SCENARIO_CLAUSES)),
            }
        }
    }

    fn sampling(&mut self) -> PResult<Sampling> {
        let count = self.integer()?;
        self.expect_kw("seed")?;
        let seed = self.integer()?;
        Ok(Sampling { count, seed })
    }
}

const SCENARIO_CLAUSES: [&str; 8] =
    ["description", "model", "focus", "evidence", "exhaustive", "sampled", "unanticipated", "}"];

fn unreachable_cpt() -> ! {
    unreachable!("cpt() is only entered on a CPT keyword")
}
