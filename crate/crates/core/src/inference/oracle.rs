//! Full-joint enumeration. Slow and obviously correct.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{marginal, resolve_targets, InferenceError, Marginal};
use crate::network::{CompiledNetwork, Evidence};

/// Largest joint state space the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

fn check_size(net: &CompiledNetwork) -> Result<(), InferenceError> {
    let size = (0..net.len()).fold(1u128, |acc, i| acc.saturating_mul(net.cardinality(i) as u128));
    if size > ORACLE_LIMIT {
        return Err(InferenceError::TooLargeForOracle { size });
    }
    Ok(())
}

/// Calls `visit(assignment, joint probability)` for every full assignment
/// consistent with the evidence.
fn enumerate(net: &CompiledNetwork, fixed: &[Option<usize>], mut visit: impl FnMut(&[usize], f64)) {
    let n = net.len();
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut x: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
    loop {
        let mut p = 1.0;
        for i in 0..n {
            let mut row = 0;
            for &q in net.parents(i) {
                row = row * net.cardinality(q) + x[q];
            }
            p *= net.cpt(i)[row][x[i]];
        }
        visit(&x, p);

        let mut k = free.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let v = free[k];
            x[v] += 1;
            if x[v] < net.cardinality(v) {
                break;
            }
            x[v] = 0;
        }
    }
}

fn fixed_states(net: &CompiledNetwork, evidence: &Evidence) -> Result<Vec<Option<usize>>, InferenceError> {
    let mut fixed = vec![None; net.len()];
    for (v, s) in net.resolve_evidence(evidence)? {
        fixed[v] = Some(s);
    }
    Ok(fixed)
}

/// Posterior marginals by summing the full joint distribution.
pub fn brute_force_posterior<S: AsRef<str>>(
    net: &CompiledNetwork,
    evidence: &Evidence,
    targets: &[S],
) -> Result<BTreeMap<String, Marginal>, InferenceError> {
    let targets = resolve_targets(net, targets)?;
    check_size(net)?;
    let fixed = fixed_states(net, evidence)?;
    let mut acc: Vec<Vec<f64>> = targets.iter().map(|&t| vec![0.0; net.cardinality(t)]).collect();
    let mut z = 0.0;
    enumerate(net, &fixed, |x, p| {
        z += p;
        for (slot, &t) in acc.iter_mut().zip(&targets) {
            slot[x[t]] += p;
        }
    });
    if z.is_nan() || z <= 0.0 {
        return Err(InferenceError::ZeroProbabilityEvidence);
    }
    Ok(targets
        .iter()
        .zip(acc)
        .map(|(&t, mut probs)| {
            for p in &mut probs {
                *p /= z;
            }
            (net.variable(t).name.clone(), marginal(net, t, probs))
        })
        .collect())
}

/// `P(evidence)` by summing the full joint distribution.
pub fn brute_force_evidence_probability(net: &CompiledNetwork, evidence: &Evidence) -> Result<f64, InferenceError> {
    check_size(net)?;
    let fixed = fixed_states(net, evidence)?;
    let mut z = 0.0;
    enumerate(net, &fixed, |_, p| z += p);
    Ok(z)
}
