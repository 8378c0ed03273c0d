//! Conditional probability table forms and their expansion to explicit rows.
//!
//! Parent configurations are always enumerated in lexicographic order of the
//! parent list (first parent most significant, last parent varying fastest),
//! each parent walking its own state order.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::StateSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CptError {
    #[error("explicit table has {found} rows, expected {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("pattern has {found} selectors but the variable has {expected} parents")]
    PatternArity { expected: usize, found: usize },
    #[error("unknown state `{state}` for parent {parent}")]
    UnknownParentState { parent: usize, state: String },
    #[error("unknown child state `{0}`")]
    UnknownChildState(String),
    #[error("parent configuration ({0}) is covered by more than one partition element")]
    PartitionOverlap(String),
    #[error("parent configuration ({0}) is not covered by any partition element")]
    PartitionGap(String),
    #[error("noisy-OR needs a boolean child and boolean parents")]
    NoisyOrNotBoolean,
    #[error("noisy-OR has {found} link probabilities for {expected} parents")]
    NoisyOrArity { expected: usize, found: usize },
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("deterministic table has {found} entries, expected {expected}")]
    DeterministicCount { expected: usize, found: usize },
}

/// Tag for a [`CptSpec`] form, kept as provenance on compiled variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CptForm {
    Explicit,
    Partition,
    NoisyOr,
    Deterministic,
}

impl fmt::Display for CptForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CptForm::Explicit => "explicit",
            CptForm::Partition => "partition",
            CptForm::NoisyOr => "noisyor",
            CptForm::Deterministic => "deterministic",
        })
    }
}

/// Matches one parent's state inside a [`ConfigPattern`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Selector {
    Any,
    States(Vec<String>),
}

impl Selector {
    pub fn state(label: impl Into<String>) -> Self {
        Selector::States(vec![label.into()])
    }
}

/// One selector per parent, in parent order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ConfigPattern(pub Vec<Selector>);

/// Set of parent configurations sharing one distribution, with the reason
/// they share it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionElement {
    pub patterns: Vec<ConfigPattern>,
    pub rationale: String,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CptSpec {
    /// One probability vector per parent configuration.
    Explicit { rows: Vec<Vec<f64>> },
    /// Disjoint elements covering the parent configuration space.
    Partition { elements: Vec<PartitionElement> },
    /// Leaky noisy-OR over boolean parents; state 0 is "true".
    NoisyOr { links: Vec<f64>, leak: f64 },
    /// One child state per parent configuration.
    Deterministic { outcomes: Vec<String> },
}

impl CptSpec {
    pub fn form(&self) -> CptForm {
        match self {
            CptSpec::Explicit { .. } => CptForm::Explicit,
            CptSpec::Partition { .. } => CptForm::Partition,
            CptSpec::NoisyOr { .. } => CptForm::NoisyOr,
            CptSpec::Deterministic { .. } => CptForm::Deterministic,
        }
    }
}

/// Number of joint configurations of the given cardinalities (1 for none).
pub fn configuration_count(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Iterates parent configurations as state-index vectors in lexicographic
/// order, last position fastest.
#[derive(Debug, Clone)]
pub struct Configurations {
    cards: Vec<usize>,
    next: Option<Vec<usize>>,
}

pub fn configurations(cards: &[usize]) -> Configurations {
    let next = if cards.contains(&0) { None } else { Some(vec![0; cards.len()]) };
    Configurations { cards: cards.to_vec(), next }
}

impl Iterator for Configurations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.cards[pos] {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

/// Row index of a configuration under the lexicographic order.
pub fn configuration_index(cards: &[usize], config: &[usize]) -> usize {
    config.iter().zip(cards).fold(0, |acc, (&s, &c)| acc * c + s)
}

fn describe_config(config: &[usize], parents: &[&StateSpace]) -> String {
    let labels: Vec<&str> = config.iter().zip(parents).map(|(&s, p)| p.states()[s].as_str()).collect();
    labels.join(", ")
}

fn check_probability(x: f64) -> Result<(), CptError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(CptError::OutOfRange(x))
    }
}

impl ConfigPattern {
    /// Expands the pattern to the set of row indices it covers.
    pub fn rows(&self, parents: &[&StateSpace]) -> Result<BTreeSet<usize>, CptError> {
        if self.0.len() != parents.len() {
            return Err(CptError::PatternArity { expected: parents.len(), found: self.0.len() });
        }
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(parents.len());
        for (pi, (sel, space)) in self.0.iter().zip(parents).enumerate() {
            match sel {
                Selector::Any => choices.push((0..space.len()).collect()),
                Selector::States(labels) => {
                    let mut idx = Vec::with_capacity(labels.len());
                    for l in labels {
                        let k = space
                            .index_of(l)
                            .ok_or_else(|| CptError::UnknownParentState { parent: pi, state: l.clone() })?;
                        idx.push(k);
                    }
                    choices.push(idx);
                }
            }
        }
        let cards: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let lens: Vec<usize> = choices.iter().map(Vec::len).collect();
        Ok(configurations(&lens)
            .map(|pick| {
                let config: Vec<usize> = pick.iter().zip(&choices).map(|(&j, c)| c[j]).collect();
                configuration_index(&cards, &config)
            })
            .collect())
    }
}

/// Expands any CPT form into explicit rows, one per parent configuration.
///
/// Explicit rows are copied through unchecked for normalization; that is
/// the job of [`crate::validate_network`] and the review lints.
pub fn expand_cpt(spec: &CptSpec, child: &StateSpace, parents: &[&StateSpace]) -> Result<Vec<Vec<f64>>, CptError> {
    let cards: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let n_rows = configuration_count(&cards);
    match spec {
        CptSpec::Explicit { rows } => {
            if rows.len() != n_rows {
                return Err(CptError::RowCount { expected: n_rows, found: rows.len() });
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != child.len() {
                    return Err(CptError::RowLength { row: r, expected: child.len(), found: row.len() });
                }
            }
            Ok(rows.clone())
        }
        CptSpec::Partition { elements } => {
            let mut owner: Vec<Option<usize>> = vec![None; n_rows];
            for (e, element) in elements.iter().enumerate() {
                if element.distribution.len() != child.len() {
                    return Err(CptError::RowLength {
                        row: e,
                        expected: child.len(),
                        found: element.distribution.len(),
                    });
                }
                let mut covered = BTreeSet::new();
                for pattern in &element.patterns {
                    covered.extend(pattern.rows(parents)?);
                }
                for r in covered {
                    if owner[r].is_some() {
                        let config = configurations(&cards).nth(r).unwrap_or_default();
                        return Err(CptError::PartitionOverlap(describe_config(&config, parents)));
                    }
                    owner[r] = Some(e);
                }
            }
            let mut rows = Vec::with_capacity(n_rows);
            for (r, config) in configurations(&cards).enumerate() {
                match owner[r] {
                    Some(e) => rows.push(elements[e].distribution.clone()),
                    None => return Err(CptError::PartitionGap(describe_config(&config, parents))),
                }
            }
            Ok(rows)
        }
        CptSpec::NoisyOr { links, leak } => {
            if !child.is_boolean() || parents.iter().any(|p| !p.is_boolean()) {
                return Err(CptError::NoisyOrNotBoolean);
            }
            if links.len() != parents.len() {
                return Err(CptError::NoisyOrArity { expected: parents.len(), found: links.len() });
            }
            check_probability(*leak)?;
            for &p in links {
                check_probability(p)?;
            }
            Ok(configurations(&cards).map(|config| noisy_or_row(links, *leak, &config)).collect())
        }
        CptSpec::Deterministic { outcomes } => {
            if outcomes.len() != n_rows {
                return Err(CptError::DeterministicCount { expected: n_rows, found: outcomes.len() });
            }
            outcomes
                .iter()
                .map(|label| {
                    let k = child.index_of(label).ok_or_else(|| CptError::UnknownChildState(label.to_string()))?;
                    let mut row = vec![0.0; child.len()];
                    row[k] = 1.0;
                    Ok(row)
                })
                .collect()
        }
    }
}

/// `P(true | x) = 1 - (1 - leak) * prod over true parents of (1 - p_i)`.
fn noisy_or_row(links: &[f64], leak: f64, config: &[usize]) -> Vec<f64> {
    let mut fail = 1.0 - leak;
    for (&p, &s) in links.iter().zip(config) {
        if s == 0 {
            fail *= 1.0 - p;
        }
    }
    vec![1.0 - fail, fail]
}
