use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::factor::Factor;
use super::InferenceError;
use crate::cpt::configuration_count;
use crate::network::CompiledNetwork;

pub(super) fn cpt_factors(net: &CompiledNetwork) -> Result<Vec<Factor>, InferenceError> {
    (0..net.len())
        .map(|i| {
            let parents = net.parents(i);
            let pcards: Vec<usize> = parents.iter().map(|&p| net.cardinality(p)).collect();
            let card = net.cardinality(i);
            let rows = net.cpt(i);
            if rows.len() != configuration_count(&pcards) || rows.iter().any(|r| r.len() != card) {
                return Err(InferenceError::InvalidNetwork(format!(
                    "table of `{}` does not match its parents",
                    net.variable(i).name
                )));
            }
            Ok(Factor::from_cpt(i, card, parents, &pcards, rows))
        })
        .collect()
}

/// Ancestors of `seeds`, seeds included.
fn ancestral_set(net: &CompiledNetwork, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = seeds.into_iter().collect();
    while let Some(v) = stack.pop() {
        if keep[v] {
            continue;
        }
        keep[v] = true;
        stack.extend(net.parents(v).iter().copied());
    }
    keep
}

/// Relevant factors with evidence applied.
fn reduced_factors(
    net: &CompiledNetwork,
    factors: &[Factor],
    ev: &[(usize, usize)],
    extra: Option<usize>,
) -> Vec<Factor> {
    let keep = ancestral_set(net, ev.iter().map(|&(v, _)| v).chain(extra));
    factors
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, f)| ev.iter().fold(f.clone(), |acc, &(v, s)| acc.reduce(v, s)))
        .collect()
}

/// Groups factors into connected components by shared variables. Groups are
/// returned in order of their first factor; factors keep their order.
fn components(factors: Vec<Factor>) -> Vec<Vec<Factor>> {
    let n = factors.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if factors[i].vars.iter().any(|v| factors[j].vars.contains(v)) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Factor>)> = Vec::new();
    for (i, f) in factors.into_iter().enumerate() {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(f),
            None => groups.push((root, vec![f])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Eliminates every variable except `keep` using greedy min-fill, ties by
/// variable name, and returns the product of what remains.
fn eliminate(net: &CompiledNetwork, mut factors: Vec<Factor>, keep: Option<usize>) -> Factor {
    let mut remaining: BTreeSet<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
    if let Some(k) = keep {
        remaining.remove(&k);
    }
    let mut adjacency: alloc::collections::BTreeMap<usize, BTreeSet<usize>> = alloc::collections::BTreeMap::new();
    for f in &factors {
        for &a in &f.vars {
            let entry = adjacency.entry(a).or_default();
            for &b in &f.vars {
                if a != b {
                    entry.insert(b);
                }
            }
        }
    }

    while !remaining.is_empty() {
        let mut best: Option<(usize, &str, usize)> = None;
        for &v in &remaining {
            let nbrs: Vec<usize> = adjacency.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default();
            let mut fill = 0;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if !adjacency.get(&a).is_some_and(|s| s.contains(&b)) {
                        fill += 1;
                    }
                }
            }
            let name = net.variable(v).name.as_str();
            let better = match best {
                None => true,
                Some((bf, bn, _)) => (fill, name) < (bf, bn),
            };
            if better {
                best = Some((fill, name, v));
            }
        }
        let (_, _, var) = best.expect("non-empty");
        remaining.remove(&var);

        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        if let Some(first) = touching.first() {
            let prod = touching[1..].iter().fold(first.clone(), |acc, f| acc.product(f));
            factors.push(prod.sum_out(var));
        }

        let nbrs: Vec<usize> = adjacency.remove(&var).map(|s| s.into_iter().collect()).unwrap_or_default();
        for &a in &nbrs {
            if let Some(s) = adjacency.get_mut(&a) {
                s.remove(&var);
                for &b in &nbrs {
                    if a != b {
                        s.insert(b);
                    }
                }
            }
        }
    }

    match factors.split_first() {
        Some((first, rest)) => rest.iter().fold(first.clone(), |acc, f| acc.product(f)),
        None => Factor::scalar(1.0),
    }
}

pub(super) fn evidence_probability(net: &CompiledNetwork, factors: &[Factor], ev: &[(usize, usize)]) -> f64 {
    if ev.is_empty() {
        return 1.0;
    }
    let reduced = reduced_factors(net, factors, ev, None);
    let mut p = 1.0;
    for group in components(reduced) {
        let f = eliminate(net, group, None);
        p *= f.values.iter().sum::<f64>();
    }
    p
}

pub(super) fn query(
    net: &CompiledNetwork,
    factors: &[Factor],
    ev: &[(usize, usize)],
    target: usize,
) -> Result<Vec<f64>, InferenceError> {
    let reduced = reduced_factors(net, factors, ev, Some(target));
    let group =
        components(reduced).into_iter().find(|g| g.iter().any(|f| f.vars.contains(&target))).unwrap_or_default();
    let f = eliminate(net, group, Some(target));
    let card = net.cardinality(target);
    let mut values = if f.vars == [target] { f.values } else { vec![f.values.first().copied().unwrap_or(1.0); card] };
    let z: f64 = values.iter().sum();
    if z.is_nan() || z <= 0.0 {
        return Err(InferenceError::ZeroProbabilityEvidence);
    }
    for x in &mut values {
        *x /= z;
    }
    Ok(values)
}
