//! Declared qualitative constraints between conditional distributions.
//!
//! Violations are reported, never repaired.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cpt::{configuration_index, configurations};
use crate::network::CompiledNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::NonIncreasing => "nonincreasing",
            Direction::NonDecreasing => "nondecreasing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    Less,
    LessEq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Constraint {
    /// `P(child = target | parent = s, rest)` moves in `direction` along the
    /// parent's state order, for every configuration of the other parents.
    Monotone { child: String, target: String, parent: String, direction: Direction },
    /// `P(child = target | lhs) relation P(child = target | rhs)`, where each
    /// side assigns every parent of `child`.
    Inequality {
        child: String,
        target: String,
        lhs: Vec<(String, String)>,
        rhs: Vec<(String, String)>,
        relation: Relation,
    },
}

impl Constraint {
    pub fn child(&self) -> &str {
        match self {
            Constraint::Monotone { child, .. } | Constraint::Inequality { child, .. } => child,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn cond(pairs: &[(String, String)]) -> String {
            let parts: Vec<String> = pairs.iter().map(|(v, s)| format!("{v}={s}")).collect();
            parts.join(", ")
        }
        match self {
            Constraint::Monotone { child, target, parent, direction } => {
                write!(f, "P({child}={target} | {parent}) {direction}")
            }
            Constraint::Inequality { child, target, lhs, rhs, relation } => {
                write!(f, "P({child}={target} | {}) {relation} P({child}={target} | {})", cond(lhs), cond(rhs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("`{parent}` is not a parent of `{child}`")]
    NotAParent { child: String, parent: String },
    #[error("monotone constraint needs `{0}` to have an ordered state space")]
    UnorderedParent(String),
    #[error("condition must assign every parent of `{0}` exactly once")]
    IncompleteCondition(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Index into the checked constraint list.
    pub constraint: usize,
    /// The two parent configurations compared, as `parent=state` lists.
    pub first: Vec<(String, String)>,
    pub second: Vec<(String, String)>,
    pub first_probability: f64,
    pub second_probability: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_constraints(
    net: &CompiledNetwork,
    constraints: &[Constraint],
) -> Result<ConstraintReport, ConstraintError> {
    let mut report = ConstraintReport::default();
    for (ci, c) in constraints.iter().enumerate() {
        let child = net.index_of(c.child()).ok_or_else(|| ConstraintError::UnknownVariable(c.child().to_string()))?;
        let child_var = net.variable(child);
        let target = match c {
            Constraint::Monotone { target, .. } | Constraint::Inequality { target, .. } => target,
        };
        let t = child_var
            .states
            .index_of(target)
            .ok_or_else(|| ConstraintError::UnknownState { variable: child_var.name.clone(), state: target.clone() })?;
        let parents = net.parents(child);
        let cards: Vec<usize> = parents.iter().map(|&p| net.cardinality(p)).collect();
        let table = net.cpt(child);
        let prob = |config: &[usize]| table[configuration_index(&cards, config)][t];
        let label = |config: &[usize]| -> Vec<(String, String)> {
            parents
                .iter()
                .zip(config)
                .map(|(&p, &s)| (net.variable(p).name.clone(), net.variable(p).states.states()[s].clone()))
                .collect()
        };

        match c {
            Constraint::Monotone { parent, direction, .. } => {
                let p = net.index_of(parent).ok_or_else(|| ConstraintError::UnknownVariable(parent.clone()))?;
                let pos = parents.iter().position(|&x| x == p).ok_or_else(|| ConstraintError::NotAParent {
                    child: child_var.name.clone(),
                    parent: parent.clone(),
                })?;
                if !net.variable(p).states.is_ordered() {
                    return Err(ConstraintError::UnorderedParent(parent.clone()));
                }
                let mut rest_cards = cards.clone();
                rest_cards[pos] = 1;
                for base in configurations(&rest_cards) {
                    for s in 0..cards[pos].saturating_sub(1) {
                        let mut lo = base.clone();
                        lo[pos] = s;
                        let mut hi = base.clone();
                        hi[pos] = s + 1;
                        let (a, b) = (prob(&lo), prob(&hi));
                        let bad = match direction {
                            Direction::NonIncreasing => b > a,
                            Direction::NonDecreasing => b < a,
                        };
                        if bad {
                            let states = net.variable(p).states.states();
                            report.violations.push(Violation {
                                constraint: ci,
                                first: label(&lo),
                                second: label(&hi),
                                first_probability: a,
                                second_probability: b,
                                message: format!("{c}: ({}, {}) goes from {a} to {b}", states[s], states[s + 1]),
                            });
                        }
                    }
                }
            }
            Constraint::Inequality { lhs, rhs, relation, .. } => {
                let resolve =
                    |side: &[(String, String)]| -> Result<Vec<usize>, ConstraintError> {
                        if side.len() != parents.len() {
                            return Err(ConstraintError::IncompleteCondition(child_var.name.clone()));
                        }
                        let mut config = alloc::vec![usize::MAX; parents.len()];
                        for (v, s) in side {
                            let vi = net.index_of(v).ok_or_else(|| ConstraintError::UnknownVariable(v.clone()))?;
                            let pos = parents.iter().position(|&x| x == vi).ok_or_else(|| {
                                ConstraintError::NotAParent { child: child_var.name.clone(), parent: v.clone() }
                            })?;
                            let k = net.variable(vi).states.index_of(s).ok_or_else(|| {
                                ConstraintError::UnknownState { variable: v.clone(), state: s.clone() }
                            })?;
                            if config[pos] != usize::MAX {
                                return Err(ConstraintError::IncompleteCondition(child_var.name.clone()));
                            }
                            config[pos] = k;
                        }
                        Ok(config)
                    };
                let (ca, cb) = (resolve(lhs)?, resolve(rhs)?);
                let (a, b) = (prob(&ca), prob(&cb));
                let holds = match relation {
                    Relation::Less => a < b,
                    Relation::LessEq => a <= b,
                };
                if !holds {
                    report.violations.push(Violation {
                        constraint: ci,
                        first: label(&ca),
                        second: label(&cb),
                        first_probability: a,
                        second_probability: b,
                        message: format!("{c}: {a} {relation} {b} does not hold"),
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{StateSpace, Variable};
    use alloc::vec;

    fn detection(far: f64) -> CompiledNetwork {
        let distance = Variable::new("Distance", StateSpace::new(["near", "far"], true).unwrap());
        let det = Variable::new("Detect", StateSpace::new(["yes", "no"], false).unwrap());
        CompiledNetwork::builder()
            .variable(distance, &[], vec![vec![0.5, 0.5]])
            .variable(det, &["Distance"], vec![vec![0.9, 0.1], vec![far, 1.0 - far]])
            .build()
            .unwrap()
    }

    fn monotone() -> Constraint {
        Constraint::Monotone {
            child: "Detect".into(),
            target: "yes".into(),
            parent: "Distance".into(),
            direction: Direction::NonIncreasing,
        }
    }

    #[test]
    fn monotone_satisfied() {
        let report = check_constraints(&detection(0.4), &[monotone()]).unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn monotone_violation_names_pair() {
        let report = check_constraints(&detection(0.95), &[monotone()]).unwrap();
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.first, vec![("Distance".to_string(), "near".to_string())]);
        assert_eq!(v.second, vec![("Distance".to_string(), "far".to_string())]);
        assert!(v.message.contains("(near, far)"));
    }

    #[test]
    fn strict_inequality_fails_on_equal_rows() {
        let net = CompiledNetwork::builder()
            .node("A", &["a1", "a2"], &[], vec![vec![0.5, 0.5]])
            .node("Y", &["y", "n"], &["A"], vec![vec![0.3, 0.7], vec![0.3, 0.7]])
            .build()
            .unwrap();
        let c = |relation| Constraint::Inequality {
            child: "Y".into(),
            target: "y".into(),
            lhs: vec![("A".into(), "a1".into())],
            rhs: vec![("A".into(), "a2".into())],
            relation,
        };
        assert_eq!(check_constraints(&net, &[c(Relation::Less)]).unwrap().violations.len(), 1);
        assert!(check_constraints(&net, &[c(Relation::LessEq)]).unwrap().is_clean());
    }

    #[test]
    fn unordered_parent_is_rejected() {
        let net = CompiledNetwork::builder()
            .node("Distance", &["near", "far"], &[], vec![vec![0.5, 0.5]])
            .node("Detect", &["yes", "no"], &["Distance"], vec![vec![0.9, 0.1], vec![0.4, 0.6]])
            .build()
            .unwrap();
        assert_eq!(check_constraints(&net, &[monotone()]), Err(ConstraintError::UnorderedParent("Distance".into())));
    }

    #[test]
    fn unknown_reference() {
        let c = Constraint::Monotone {
            child: "Nope".into(),
            target: "yes".into(),
            parent: "Distance".into(),
            direction: Direction::NonIncreasing,
        };
        assert_eq!(check_constraints(&detection(0.4), &[c]), Err(ConstraintError::UnknownVariable("Nope".into())));
    }
}
