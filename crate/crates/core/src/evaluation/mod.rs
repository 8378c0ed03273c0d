//! Importance analysis, sampled synergy between evidence variables,
//! conflict scoring for out-of-scope evidence, and the importance report.
//!
//! The importance of evidence variable `E` for focus `F` given base
//! evidence `b` is the expected squared change of the focus distribution:
//!
//! ```text
//! I(F; E | b) = Σ_e P(e | b) · Σ_f (P(f | e, b) − P(f | b))²
//! ```
//!
//! which equals `E_e[Σ_f P(f | e, b)²] − Σ_f P(f | b)²`, the expected gain
//! in the quadratic score of `F`. Evidence states with `P(e | b) = 0`
//! contribute nothing.

mod conflict;
mod report;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpt::configurations;
use crate::inference::{evidence_probability, posterior, InferenceError};
use crate::network::{CompiledNetwork, Evidence};

pub use conflict::{conflict, ConflictScore, DEFAULT_CONFLICT_THRESHOLD};
pub use report::{render_importance_report, report_entries, ImportanceReport, ReportEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("focus variable `{0}` is also an evidence variable")]
    FocusInEvidence(String),
    #[error("variable `{0}` is already assigned in the base evidence")]
    AssignedInBase(String),
    #[error("evidence variable `{0}` listed twice")]
    DuplicateVariable(String),
    #[error("combination size {k} must be between 2 and {available}")]
    CombinationSize { k: usize, available: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("finding `{variable}={state}` has zero probability on its own")]
    ImpossibleFinding { variable: String, state: String },
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub name: String,
    pub importance: f64,
    /// `100 · I / I_max`, unrounded; 0 when every importance is 0.
    pub score: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceResult {
    pub focus: String,
    pub base: Evidence,
    /// Sorted by importance descending, ties by name.
    pub entries: Vec<ImportanceEntry>,
}

fn check_inputs<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    vars: &[S],
    base: &Evidence,
) -> Result<(), EvaluationError> {
    net.resolve_evidence(base).map_err(InferenceError::from)?;
    if net.index_of(focus).is_none() {
        return Err(InferenceError::UnknownVariable(focus.to_string()).into());
    }
    if base.contains(focus) {
        return Err(EvaluationError::AssignedInBase(focus.to_string()));
    }
    let mut seen = BTreeSet::new();
    for v in vars {
        let v = v.as_ref();
        if net.index_of(v).is_none() {
            return Err(InferenceError::UnknownVariable(v.to_string()).into());
        }
        if v == focus {
            return Err(EvaluationError::FocusInEvidence(v.to_string()));
        }
        if base.contains(v) {
            return Err(EvaluationError::AssignedInBase(v.to_string()));
        }
        if !seen.insert(v) {
            return Err(EvaluationError::DuplicateVariable(v.to_string()));
        }
    }
    Ok(())
}

/// Calls `visit(P(e⃗ | b), P(F | e⃗, b))` for every joint state `e⃗` of
/// `vars` with positive probability, and returns `P(F | b)`.
fn for_each_outcome<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    vars: &[S],
    base: &Evidence,
    mut visit: impl FnMut(f64, &[f64]),
) -> Result<Vec<f64>, EvaluationError> {
    let p_base = evidence_probability(net, base)?;
    if p_base == 0.0 {
        return Err(InferenceError::ZeroProbabilityEvidence.into());
    }
    let prior = posterior(net, base, &[focus])?.remove(focus).expect("focus queried").probabilities;
    let idx: Vec<usize> = vars.iter().map(|v| net.index_of(v.as_ref()).expect("checked")).collect();
    let cards: Vec<usize> = idx.iter().map(|&i| net.cardinality(i)).collect();
    for config in configurations(&cards) {
        let mut ev = base.clone();
        for (&i, &s) in idx.iter().zip(&config) {
            let v = net.variable(i);
            ev.insert(v.name.clone(), v.states.states()[s].clone()).map_err(InferenceError::from)?;
        }
        let p = evidence_probability(net, &ev)? / p_base;
        if p == 0.0 {
            continue;
        }
        let post = posterior(net, &ev, &[focus])?.remove(focus).expect("focus queried").probabilities;
        visit(p, &post);
    }
    Ok(prior)
}

/// Importance of the joint state of `vars`, treated as one compound
/// evidence variable.
pub fn joint_importance<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    vars: &[S],
    base: &Evidence,
) -> Result<f64, EvaluationError> {
    check_inputs(net, focus, vars, base)?;
    let mut outcomes: Vec<(f64, Vec<f64>)> = Vec::new();
    let prior = for_each_outcome(net, focus, vars, base, |p, post| outcomes.push((p, post.to_vec())))?;
    Ok(outcomes.iter().map(|(p, post)| p * post.iter().zip(&prior).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum())
}

/// Right-hand side of the identity `I = E_e[Σ_f P(f|e,b)²] − Σ_f P(f|b)²`,
/// computed without forming differences.
pub fn expected_quadratic_gain<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    vars: &[S],
    base: &Evidence,
) -> Result<f64, EvaluationError> {
    check_inputs(net, focus, vars, base)?;
    let mut expected = 0.0;
    let prior = for_each_outcome(net, focus, vars, base, |p, post| {
        expected += p * post.iter().map(|x| x * x).sum::<f64>();
    })?;
    Ok(expected - prior.iter().map(|x| x * x).sum::<f64>())
}

fn rank(mut scored: Vec<(String, f64)>) -> Vec<ImportanceEntry> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let max = scored.first().map(|e| e.1).unwrap_or(0.0);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (name, importance))| ImportanceEntry {
            name,
            importance,
            score: if max > 0.0 { 100.0 * importance / max } else { 0.0 },
            rank: i + 1,
        })
        .collect()
}

/// One-at-a-time importance of each evidence variable for `focus`.
pub fn importance<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    evidence_vars: &[S],
    base: &Evidence,
) -> Result<ImportanceResult, EvaluationError> {
    check_inputs(net, focus, evidence_vars, base)?;
    let mut scored = Vec::with_capacity(evidence_vars.len());
    for v in evidence_vars {
        let i = joint_importance(net, focus, core::slice::from_ref(v), base)?;
        scored.push((v.as_ref().to_string(), i));
    }
    Ok(ImportanceResult { focus: focus.to_string(), base: base.clone(), entries: rank(scored) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyEntry {
    /// Evidence variables in the order given to [`synergy_sample`].
    pub combination: Vec<String>,
    pub joint: f64,
    /// Joint importance minus the sum of single importances; negative
    /// values mean redundancy.
    pub synergy: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The `r`-th `k`-subset of `0..m` in lexicographic order.
fn unrank(mut r: u128, m: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut c = 0;
    while out.len() < k {
        let remaining = k - out.len() - 1;
        let count = binomial(m - c - 1, remaining);
        if r < count {
            out.push(c);
        } else {
            r -= count;
        }
        c += 1;
    }
    out
}

/// Joint importance and synergy for `n` distinct `k`-combinations of
/// `evidence_vars`, drawn uniformly without replacement with a seeded
/// generator, or every combination when `n ≥ C(m, k)`. Output is in
/// lexicographic combination order.
pub fn synergy_sample<S: AsRef<str>>(
    net: &CompiledNetwork,
    focus: &str,
    evidence_vars: &[S],
    k: usize,
    n: usize,
    seed: u64,
    base: &Evidence,
) -> Result<Vec<SynergyEntry>, EvaluationError> {
    check_inputs(net, focus, evidence_vars, base)?;
    let m = evidence_vars.len();
    if k < 2 || k > m {
        return Err(EvaluationError::CombinationSize { k, available: m });
    }
    if n == 0 {
        return Err(EvaluationError::NoSamples);
    }
    let total = binomial(m, k);
    let ranks: Vec<u128> = if n as u128 >= total {
        (0..total).collect()
    } else {
        let total = usize::try_from(total).map_err(|_| EvaluationError::CombinationSize { k, available: m })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<u128> = index::sample(&mut rng, total, n).into_iter().map(|r| r as u128).collect();
        picked.sort_unstable();
        picked
    };

    let mut singles: Vec<Option<f64>> = alloc::vec![None; m];
    let mut out = Vec::with_capacity(ranks.len());
    for r in ranks {
        let combo = unrank(r, m, k);
        let names: Vec<String> = combo.iter().map(|&i| evidence_vars[i].as_ref().to_string()).collect();
        let joint = joint_importance(net, focus, &names, base)?;
        let mut sum = 0.0;
        for &i in &combo {
            let single = match singles[i] {
                Some(s) => s,
                None => {
                    let s = joint_importance(net, focus, core::slice::from_ref(&evidence_vars[i]), base)?;
                    singles[i] = Some(s);
                    s
                }
            };
            sum += single;
        }
        out.push(SynergyEntry { combination: names, joint, synergy: joint - sum });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_enumerates_in_lex_order() {
        let all: Vec<Vec<usize>> = (0..binomial(5, 3)).map(|r| unrank(r, 5, 3)).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], [0, 1, 2]);
        assert_eq!(all[9], [2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}
