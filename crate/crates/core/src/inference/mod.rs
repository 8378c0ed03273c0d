//! Exact posterior computation.
//!
//! [`posterior`] and [`evidence_probability`] run variable elimination with a
//! min-fill ordering (ties broken by variable name). Before eliminating,
//! variables that are not ancestors of the query or the evidence are pruned,
//! and only the connected component of the target is kept, so a query never
//! touches factors it is independent of.
//!
//! [`brute_force_posterior`] enumerates the full joint and shares no code
//! with the elimination path; tests and evaluation checks use it as the
//! oracle.

mod elimination;
mod factor;
mod oracle;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{CompiledNetwork, Evidence, NetworkError};

pub use oracle::{brute_force_evidence_probability, brute_force_posterior, ORACLE_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("joint state space of {size} configurations exceeds the oracle limit")]
    TooLargeForOracle { size: u128 },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

impl From<NetworkError> for InferenceError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::UnknownVariable(v) => InferenceError::UnknownVariable(v),
            NetworkError::UnknownState { variable, state } => InferenceError::UnknownState { variable, state },
            other => InferenceError::InvalidNetwork(other.to_string()),
        }
    }
}

/// Posterior distribution of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub variable: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Marginal {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states.iter().position(|s| s == state).map(|i| self.probabilities[i])
    }
}

pub(crate) fn resolve_targets<S: AsRef<str>>(
    net: &CompiledNetwork,
    targets: &[S],
) -> Result<Vec<usize>, InferenceError> {
    targets
        .iter()
        .map(|t| net.index_of(t.as_ref()).ok_or_else(|| InferenceError::UnknownVariable(t.as_ref().to_string())))
        .collect()
}

pub(crate) fn marginal(net: &CompiledNetwork, var: usize, probabilities: Vec<f64>) -> Marginal {
    let v = net.variable(var);
    Marginal { variable: v.name.clone(), states: v.states.states().to_vec(), probabilities }
}

/// Exact marginals of `targets` given `evidence`.
pub fn posterior<S: AsRef<str>>(
    net: &CompiledNetwork,
    evidence: &Evidence,
    targets: &[S],
) -> Result<BTreeMap<String, Marginal>, InferenceError> {
    let ev = net.resolve_evidence(evidence)?;
    let targets = resolve_targets(net, targets)?;
    let factors = elimination::cpt_factors(net)?;
    if elimination::evidence_probability(net, &factors, &ev) <= 0.0 {
        return Err(InferenceError::ZeroProbabilityEvidence);
    }
    let mut out = BTreeMap::new();
    for t in targets {
        let probs = match ev.iter().find(|(v, _)| *v == t) {
            Some(&(_, s)) => {
                let mut p = alloc::vec![0.0; net.cardinality(t)];
                p[s] = 1.0;
                p
            }
            None => elimination::query(net, &factors, &ev, t)?,
        };
        out.insert(net.variable(t).name.clone(), marginal(net, t, probs));
    }
    Ok(out)
}

/// Exact `P(evidence)`; 1 for empty evidence.
pub fn evidence_probability(net: &CompiledNetwork, evidence: &Evidence) -> Result<f64, InferenceError> {
    let ev = net.resolve_evidence(evidence)?;
    let factors = elimination::cpt_factors(net)?;
    Ok(elimination::evidence_probability(net, &factors, &ev))
}
