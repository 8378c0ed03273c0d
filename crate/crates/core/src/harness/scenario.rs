use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::network::{CompiledNetwork, Evidence};

/// States an evidence variable may take in a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allowed {
    /// Every state of the variable.
    All,
    States(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpec {
    pub variable: String,
    pub allowed: Allowed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub count: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generation {
    Exhaustive,
    Sampled(Sampling),
}

/// Focus variables plus the evidence variables experts vary, each with the
/// subset of states they consider in scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Model the scenario runs against; the default model when absent.
    pub model: Option<String>,
    pub focus: Vec<String>,
    pub evidence: Vec<EvidenceSpec>,
    pub generation: Generation,
    /// Extra sampled cases with at least one evidence variable outside its
    /// allowed subset.
    pub unanticipated: Option<Sampling>,
    pub description: String,
    pub comments: Vec<String>,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Scenario {
            name: name.into(),
            model: None,
            focus: Vec::new(),
            evidence: Vec::new(),
            generation: Generation::Exhaustive,
            unanticipated: None,
            description: String::new(),
            comments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub scenario: String,
    pub index: usize,
    pub evidence: Evidence,
    pub unanticipated: bool,
}

/// Per evidence variable: full state list and allowed state list.
pub(crate) struct Domain {
    pub variables: Vec<String>,
    pub full: Vec<Vec<String>>,
    pub allowed: Vec<Vec<String>>,
}

impl Domain {
    fn total(sets: &[Vec<String>]) -> Result<usize, HarnessError> {
        sets.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len())).ok_or(HarnessError::CaseSpaceTooLarge)
    }

    pub fn allowed_total(&self) -> Result<usize, HarnessError> {
        Self::total(&self.allowed)
    }

    fn decode(&self, sets: &[Vec<String>], mut idx: usize) -> Evidence {
        let mut labels: Vec<&str> = Vec::with_capacity(sets.len());
        for s in sets.iter().rev() {
            labels.push(&s[idx % s.len()]);
            idx /= s.len();
        }
        labels.reverse();
        let mut ev = Evidence::new();
        for (v, l) in self.variables.iter().zip(labels) {
            ev.insert(v.clone(), l).expect("evidence variables are distinct");
        }
        ev
    }

    pub fn in_domain(&self, ev: &Evidence) -> bool {
        ev.len() == self.variables.len()
            && self
                .variables
                .iter()
                .zip(&self.allowed)
                .all(|(v, a)| ev.get(v).is_some_and(|s| a.iter().any(|x| x == s)))
    }
}

pub(crate) fn domain(scenario: &Scenario, net: &CompiledNetwork) -> Result<Domain, HarnessError> {
    let mut seen = BTreeSet::new();
    for f in &scenario.focus {
        if net.index_of(f).is_none() {
            return Err(HarnessError::UnknownVariable(f.clone()));
        }
    }
    let mut d = Domain { variables: Vec::new(), full: Vec::new(), allowed: Vec::new() };
    for spec in &scenario.evidence {
        let var = net.find(&spec.variable).ok_or_else(|| HarnessError::UnknownVariable(spec.variable.clone()))?;
        if scenario.focus.contains(&spec.variable) {
            return Err(HarnessError::FocusInEvidence(spec.variable.clone()));
        }
        if !seen.insert(spec.variable.as_str()) {
            return Err(HarnessError::DuplicateEvidence(spec.variable.clone()));
        }
        let full = var.states.states().to_vec();
        let allowed = match &spec.allowed {
            Allowed::All => full.clone(),
            Allowed::States(states) => {
                if states.is_empty() {
                    return Err(HarnessError::EmptyAllowed(spec.variable.clone()));
                }
                let mut out: Vec<String> = Vec::new();
                for s in states {
                    if var.states.index_of(s).is_none() {
                        return Err(HarnessError::UnknownState { variable: spec.variable.clone(), state: s.clone() });
                    }
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
                out
            }
        };
        d.variables.push(spec.variable.clone());
        d.full.push(full);
        d.allowed.push(allowed);
    }
    Ok(d)
}

/// Test cases in a fixed order: in-scope cases first (lexicographic over the
/// allowed states, first evidence variable most significant), then any
/// unanticipated cases.
pub fn generate_cases(scenario: &Scenario, net: &CompiledNetwork) -> Result<Vec<TestCase>, HarnessError> {
    let d = domain(scenario, net)?;
    let total = d.allowed_total()?;
    let indices: Vec<usize> = match scenario.generation {
        Generation::Exhaustive => (0..total).collect(),
        Generation::Sampled(s) => sample_indices(total, s),
    };
    let mut cases: Vec<TestCase> = indices
        .into_iter()
        .map(|i| d.decode(&d.allowed, i))
        .enumerate()
        .map(|(index, evidence)| TestCase { scenario: scenario.name.clone(), index, evidence, unanticipated: false })
        .collect();

    if let Some(s) = scenario.unanticipated {
        let full_total = Domain::total(&d.full)?;
        let outside = full_total - total;
        let picked: Vec<Evidence> = if s.count as u128 >= outside as u128 {
            (0..full_total).map(|i| d.decode(&d.full, i)).filter(|e| !d.in_domain(e)).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let mut chosen = BTreeSet::new();
            while (chosen.len() as u64) < s.count {
                let i = rng.random_range(0..full_total);
                if !d.in_domain(&d.decode(&d.full, i)) {
                    chosen.insert(i);
                }
            }
            chosen.into_iter().map(|i| d.decode(&d.full, i)).collect()
        };
        let start = cases.len();
        cases.extend(picked.into_iter().enumerate().map(|(k, evidence)| TestCase {
            scenario: scenario.name.clone(),
            index: start + k,
            evidence,
            unanticipated: true,
        }));
    }
    Ok(cases)
}

/// `count` distinct sorted indices below `total`, or all of them.
fn sample_indices(total: usize, s: Sampling) -> Vec<usize> {
    if s.count as u128 >= total as u128 {
        return (0..total).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut picked = index::sample(&mut rng, total, s.count as usize).into_vec();
    picked.sort_unstable();
    picked
}

/// Fraction of the scenario's in-scope instances exercised by `cases`.
/// Duplicates count once; unanticipated cases do not count.
pub fn coverage(scenario: &Scenario, net: &CompiledNetwork, cases: &[TestCase]) -> Result<f64, HarnessError> {
    let d = domain(scenario, net)?;
    let total = d.allowed_total()?;
    let distinct: BTreeSet<&Evidence> = cases.iter().map(|c| &c.evidence).filter(|e| d.in_domain(e)).collect();
    Ok(distinct.len() as f64 / total as f64)
}
