use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use super::{Fragment, FragmentError};
use crate::dsl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    /// Substituted as a bare identifier, e.g. an equipment type.
    Identifier,
    /// Substituted as a comma-separated list of state labels.
    StateRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateParam {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParamValue {
    Identifier(String),
    States(Vec<String>),
}

/// Parameterized fragment. Placeholders `${name}` may appear as a whole
/// name, a state label, or inside quoted strings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Template {
    pub name: String,
    pub params: Vec<TemplateParam>,
    pub body: Fragment,
    pub comments: Vec<String>,
}

impl Template {
    /// Placeholder names used in the body, in first-use order.
    pub fn placeholders(&self) -> Vec<String> {
        let text = dsl::fragment_body_text(&self.body, true);
        let mut out: Vec<String> = Vec::new();
        let mut rest = text.as_str();
        while let Some(i) = rest.find("${") {
            rest = &rest[i + 2..];
            if let Some(j) = rest.find('}') {
                let name = &rest[..j];
                if !out.iter().any(|n| n == name) {
                    out.push(name.to_string());
                }
                rest = &rest[j + 1..];
            } else {
                break;
            }
        }
        out
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    }
}

/// `template/ident1/ident2...` using identifier bindings in parameter order.
pub fn instance_name(template: &Template, bindings: &BTreeMap<String, ParamValue>) -> String {
    let mut name = template.name.clone();
    for p in &template.params {
        if let Some(ParamValue::Identifier(v)) = bindings.get(&p.name) {
            name.push('/');
            name.push_str(v);
        }
    }
    name
}

/// Substitutes every placeholder textually, then parses the result as a
/// fragment.
pub fn instantiate_template(
    template: &Template,
    bindings: &BTreeMap<String, ParamValue>,
) -> Result<Fragment, FragmentError> {
    for key in bindings.keys() {
        if !template.params.iter().any(|p| &p.name == key) {
            return Err(FragmentError::UnknownParameter(key.clone()));
        }
    }
    let mut text = dsl::fragment_body_text(&template.body, true);
    for p in &template.params {
        let value = bindings.get(&p.name).ok_or_else(|| FragmentError::UnboundParameter(p.name.clone()))?;
        let replacement = match (p.kind, value) {
            (ParamKind::Identifier, ParamValue::Identifier(v)) => {
                if !is_identifier(v) {
                    return Err(FragmentError::IllegalIdentifier(v.clone()));
                }
                v.clone()
            }
            (ParamKind::StateRange, ParamValue::States(labels)) => {
                if labels.is_empty() {
                    return Err(FragmentError::ParameterKind(p.name.clone(), "a non-empty state list"));
                }
                let parts: Vec<String> = labels.iter().map(|l| dsl::format_label(l, false)).collect();
                parts.join(", ")
            }
            (ParamKind::Identifier, _) => return Err(FragmentError::ParameterKind(p.name.clone(), "an identifier")),
            (ParamKind::StateRange, _) => return Err(FragmentError::ParameterKind(p.name.clone(), "a state list")),
        };
        text = text.replace(&format!("${{{}}}", p.name), &replacement);
    }
    let name = instance_name(template, bindings);
    let source = format!("fragment {} {{\n{}}}\n", dsl::format_name(&name, false), text);
    match dsl::parse_kb(&source) {
        Ok(kb) if kb.fragments.len() == 1 => {
            let mut fragment = kb.fragments.into_iter().next().expect("one fragment");
            fragment.comments = Vec::new();
            Ok(fragment)
        }
        Ok(_) => Err(FragmentError::Instantiation(alloc::vec!["expected exactly one fragment".to_string()])),
        Err(diags) => Err(FragmentError::Instantiation(diags.into_iter().map(|d| d.message).collect())),
    }
}
