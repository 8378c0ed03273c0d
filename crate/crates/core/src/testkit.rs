//! Random generators for property tests and the acceptance suite.
//!
//! Only compiled with the `testkit` feature. Generated networks are always
//! valid; generated knowledge bases are only guaranteed to be syntactically
//! well formed (unique names, declared placeholders, known templates), which
//! is what round-trip and versioning properties need.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constraint::{Constraint, Direction, Relation};
use crate::cpt::{configuration_count, expand_cpt, ConfigPattern, CptSpec, PartitionElement, Selector};
use crate::dsl::{BindDecl, Definition, Instance, KnowledgeBase, ModelDecl, NamedConstraint};
use crate::fragments::{
    ClassConstraint, Fragment, InputVar, ParamKind, ParamValue, ResidentVar, Template, TemplateParam, VarRef,
    VariableClass,
};
use crate::harness::{Allowed, EvidenceSpec, Generation, Sampling, Scenario};
use crate::network::{CompiledNetwork, Evidence, NetworkBuilder, StateSpace, Variable};

/// Random probability vector; sometimes with exact zeros.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> =
        (0..len).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..len)] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Random CPT in any applicable form for `child` given `parents`.
pub fn random_cpt<R: Rng + ?Sized>(rng: &mut R, child: &StateSpace, parents: &[&StateSpace]) -> CptSpec {
    let cards: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let rows = configuration_count(&cards);
    let boolean = child.len() == 2 && parents.iter().all(|p| p.len() == 2);
    match rng.random_range(0..4) {
        1 if boolean && !parents.is_empty() => CptSpec::NoisyOr {
            links: (0..parents.len()).map(|_| rng.random::<f64>()).collect(),
            leak: if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() * 0.2 },
        },
        2 if !parents.is_empty() => {
            // Split on the first parent's states; each group shares a row.
            let first = parents[0];
            let rest = vec![Selector::Any; parents.len() - 1];
            let mut labels: Vec<String> = first.states().to_vec();
            labels.shuffle(rng);
            let cut = rng.random_range(1..=labels.len());
            let groups: Vec<Vec<String>> =
                if cut == labels.len() { vec![labels] } else { vec![labels[..cut].to_vec(), labels[cut..].to_vec()] };
            let elements = groups
                .into_iter()
                .map(|g| {
                    let mut sel = vec![Selector::States(g)];
                    sel.extend(rest.iter().cloned());
                    PartitionElement {
                        patterns: vec![ConfigPattern(sel)],
                        rationale: "shared".into(),
                        distribution: random_distribution(rng, child.len()),
                    }
                })
                .collect();
            CptSpec::Partition { elements }
        }
        3 => CptSpec::Deterministic {
            outcomes: (0..rows).map(|_| child.states()[rng.random_range(0..child.len())].clone()).collect(),
        },
        _ => CptSpec::Explicit { rows: (0..rows).map(|_| random_distribution(rng, child.len())).collect() },
    }
}

/// Random DAG of `n` binary or ternary variables with at most three
/// parents each and randomly permuted names.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CompiledNetwork {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let names: Vec<String> = ids.iter().map(|i| format!("X{i}")).collect();
    let spaces: Vec<StateSpace> = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                StateSpace::boolean()
            } else {
                StateSpace::new(["a", "b", "c"], false).unwrap()
            }
        })
        .collect();
    let mut builder = NetworkBuilder::default();
    for i in 0..n {
        let mut candidates: Vec<usize> = (0..i).collect();
        candidates.shuffle(rng);
        let k = rng.random_range(0..=candidates.len().min(3));
        let parents: Vec<usize> = candidates[..k].to_vec();
        let parent_spaces: Vec<&StateSpace> = parents.iter().map(|&p| &spaces[p]).collect();
        let spec = random_cpt(rng, &spaces[i], &parent_spaces);
        let rows = expand_cpt(&spec, &spaces[i], &parent_spaces).expect("generated CPT expands");
        let parent_names: Vec<&str> = parents.iter().map(|&p| names[p].as_str()).collect();
        builder = builder.variable(Variable::new(names[i].clone(), spaces[i].clone()), &parent_names, rows);
    }
    builder.build().expect("generated network is valid")
}

/// Observes each variable with probability `p`, in a random state.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &CompiledNetwork, p: f64) -> Evidence {
    let mut ev = Evidence::new();
    for v in net.variables() {
        if rng.random_bool(p) {
            let s = &v.states.states()[rng.random_range(0..v.states.len())];
            ev.insert(v.name.clone(), s.clone()).expect("fresh variable");
        }
    }
    ev
}

const PLAIN: [&str; 8] = ["Alpha", "beta", "Gamma_2", "delta", "Eps", "zeta9", "Eta", "theta"];
const AWKWARD: [&str; 8] = ["model", "has space", "Initial #TEL", "quote\"d", "back\\slash", "states", "12", "a-b"];

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

/// Name made unique by `index`, occasionally needing quotes.
fn random_name<R: Rng + ?Sized>(rng: &mut R, index: usize) -> String {
    if rng.random_bool(0.2) {
        format!("{} {index}", pick(rng, &AWKWARD))
    } else if index < 4 && rng.random_bool(0.2) {
        String::from(["given", "links", "when", "self"][index])
    } else {
        format!("{}{index}", pick(rng, &PLAIN))
    }
}

fn random_text<R: Rng + ?Sized>(rng: &mut R) -> String {
    const PARTS: [&str; 8] =
        ["plain words", "tab\there", "line\nbreak", "\"quoted\"", "back\\slash", "#hash", "", "ünïcode"];
    let n = rng.random_range(1..3);
    (0..n).map(|_| pick(rng, &PARTS)).collect::<Vec<_>>().join(" ")
}

fn random_comments<R: Rng + ?Sized>(rng: &mut R) -> Vec<String> {
    const LINES: [&str; 5] = ["note", " indented", "", "a # within", "trailing text"];
    let n = if rng.random_bool(0.6) { 0 } else { rng.random_range(1..3) };
    (0..n).map(|_| pick(rng, &LINES).to_string()).collect()
}

fn random_labels<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<String> {
    const LABELS: [&str; 10] = ["t", "f", "low", "high", "0", "12", "two words", "when", "*", "x#y"];
    let mut pool: Vec<&str> = LABELS.to_vec();
    pool.shuffle(rng);
    pool[..n].iter().map(|s| s.to_string()).collect()
}

fn random_space<R: Rng + ?Sized>(rng: &mut R) -> StateSpace {
    let n = rng.random_range(2..=4);
    StateSpace::new(random_labels(rng, n), rng.random_bool(0.3)).expect("distinct labels")
}

/// Number that round-trips through text, including extreme exponents.
fn random_number<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        2 => 1e-7 * rng.random::<f64>(),
        3 => 1e17 * rng.random::<f64>(),
        4 => -rng.random::<f64>(),
        _ => rng.random::<f64>(),
    }
}

fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| random_number(rng)).collect()
}

fn random_kb_cpt<R: Rng + ?Sized>(rng: &mut R, child: &StateSpace, parents: usize) -> CptSpec {
    match rng.random_range(0..4) {
        0 => CptSpec::Explicit { rows: (0..rng.random_range(1..4)).map(|_| random_vector(rng, child.len())).collect() },
        1 => CptSpec::NoisyOr { links: random_vector(rng, parents.max(1)), leak: random_number(rng) },
        2 => {
            let n = rng.random_range(1..4);
            CptSpec::Deterministic { outcomes: random_labels(rng, n) }
        }
        _ => {
            let elements = (0..rng.random_range(1..3))
                .map(|_| PartitionElement {
                    patterns: (0..rng.random_range(1..3))
                        .map(|_| {
                            ConfigPattern(
                                (0..parents)
                                    .map(|_| {
                                        if rng.random_bool(0.4) {
                                            Selector::Any
                                        } else {
                                            let n = rng.random_range(1..3);
                                            Selector::States(random_labels(rng, n))
                                        }
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                    rationale: if rng.random_bool(0.3) { String::new() } else { random_text(rng) },
                    distribution: random_vector(rng, child.len()),
                })
                .collect();
            CptSpec::Partition { elements }
        }
    }
}

/// Fragment with unique variable names; parents refer to earlier names.
pub fn random_fragment<R: Rng + ?Sized>(rng: &mut R, name: String, classes: &[String]) -> Fragment {
    let mut f = Fragment::new(name);
    f.is_stub = rng.random_bool(0.2);
    if rng.random_bool(0.4) {
        f.description = random_text(rng);
    }
    f.comments = random_comments(rng);
    let mut declared: Vec<String> = Vec::new();
    let mut counter = 0;
    for _ in 0..rng.random_range(0..3) {
        let mut v = InputVar::new(random_name(rng, counter), random_space(rng));
        counter += 1;
        if rng.random_bool(0.3) && !classes.is_empty() {
            v.class_ref = Some(classes[rng.random_range(0..classes.len())].clone());
            if rng.random_bool(0.5) {
                v.states = None;
            }
        }
        if rng.random_bool(0.5) {
            v.prior = Some(random_vector(rng, 2));
        }
        if rng.random_bool(0.2) {
            v.description = random_text(rng);
        }
        v.comments = random_comments(rng);
        declared.push(v.name.clone());
        f.inputs.push(v);
    }
    for _ in 0..rng.random_range(1..4) {
        let space = random_space(rng);
        let k = rng.random_range(0..=declared.len().min(2));
        let mut parents = declared.clone();
        parents.shuffle(rng);
        parents.truncate(k);
        let mut v = ResidentVar {
            name: random_name(rng, counter),
            class_ref: None,
            states: Some(space.clone()),
            parents,
            cpt: Some(random_kb_cpt(rng, &space, k)),
            description: String::new(),
            comments: random_comments(rng),
        };
        counter += 1;
        if rng.random_bool(0.2) && !classes.is_empty() {
            v.class_ref = Some(classes[rng.random_range(0..classes.len())].clone());
            if rng.random_bool(0.5) {
                v.states = None;
            }
            if rng.random_bool(0.5) {
                v.cpt = None;
            }
        }
        if rng.random_bool(0.2) {
            v.description = random_text(rng);
        }
        declared.push(v.name.clone());
        f.residents.push(v);
    }
    f
}

fn random_class<R: Rng + ?Sized>(rng: &mut R, name: String, earlier: &[String]) -> VariableClass {
    let mut c = VariableClass::new(name);
    if !earlier.is_empty() && rng.random_bool(0.5) {
        c.parent = Some(earlier[rng.random_range(0..earlier.len())].clone());
    }
    if rng.random_bool(0.6) {
        c.states = Some(random_space(rng));
    }
    if rng.random_bool(0.4) {
        c.description = Some(random_text(rng));
    }
    if rng.random_bool(0.3) {
        let space = random_space(rng);
        c.default_cpt = Some(random_kb_cpt(rng, &space, 0));
    }
    if rng.random_bool(0.3) {
        let n = rng.random_range(1..3);
        c.constraints = Some(
            (0..n)
                .map(|_| ClassConstraint {
                    target: random_labels(rng, 1).remove(0),
                    parent_class: earlier.first().cloned().unwrap_or_else(|| c.name.clone()),
                    direction: if rng.random_bool(0.5) { Direction::NonIncreasing } else { Direction::NonDecreasing },
                })
                .collect(),
        );
    }
    c.comments = random_comments(rng);
    c
}

fn random_template<R: Rng + ?Sized>(rng: &mut R, name: String) -> Template {
    let mut body = Fragment::new(name.clone());
    body.description = String::from("about ${X}");
    body.inputs.push(InputVar {
        name: "Hit".into(),
        class_ref: None,
        states: Some(StateSpace::boolean()),
        prior: Some(vec![0.5, 0.5]),
        description: String::new(),
        comments: random_comments(rng),
    });
    body.residents.push(ResidentVar {
        name: String::from(if rng.random_bool(0.5) { "${X}" } else { "Initial #${X}" }),
        class_ref: None,
        states: Some(StateSpace::unchecked(vec!["${S}".into()], rng.random_bool(0.5))),
        parents: vec!["Hit".into()],
        cpt: Some(CptSpec::Partition {
            elements: vec![PartitionElement {
                patterns: vec![ConfigPattern(vec![Selector::Any])],
                rationale: "no information".into(),
                distribution: random_vector(rng, 2),
            }],
        }),
        description: String::new(),
        comments: Vec::new(),
    });
    Template {
        name,
        params: vec![
            TemplateParam { name: "X".into(), kind: ParamKind::Identifier },
            TemplateParam { name: "S".into(), kind: ParamKind::StateRange },
        ],
        body,
        comments: random_comments(rng),
    }
}

fn random_constraint<R: Rng + ?Sized>(rng: &mut R, name: String, vars: &[String]) -> NamedConstraint {
    let child = vars.get(rng.random_range(0..vars.len().max(1))).cloned().unwrap_or_else(|| "C".into());
    let target = random_labels(rng, 1).remove(0);
    let constraint = if rng.random_bool(0.5) {
        Constraint::Monotone {
            child,
            target,
            parent: random_name(rng, 99),
            direction: if rng.random_bool(0.5) { Direction::NonIncreasing } else { Direction::NonDecreasing },
        }
    } else {
        let cond = |rng: &mut R| -> Vec<(String, String)> {
            (0..rng.random_range(0..3)).map(|i| (random_name(rng, i), random_labels(rng, 1).remove(0))).collect()
        };
        Constraint::Inequality {
            child,
            target,
            lhs: cond(rng),
            rhs: cond(rng),
            relation: if rng.random_bool(0.5) { Relation::Less } else { Relation::LessEq },
        }
    };
    NamedConstraint { name, constraint, comments: random_comments(rng) }
}

fn random_scenario<R: Rng + ?Sized>(rng: &mut R, name: String, vars: &[String], models: &[String]) -> Scenario {
    let mut s = Scenario::new(name);
    if rng.random_bool(0.3) {
        s.description = random_text(rng);
    }
    if !models.is_empty() && rng.random_bool(0.5) {
        s.model = Some(models[rng.random_range(0..models.len())].clone());
    }
    let mut pool = vars.to_vec();
    pool.sort();
    pool.dedup();
    pool.shuffle(rng);
    let nf = rng.random_range(0..=pool.len().min(2));
    s.focus = pool[..nf].to_vec();
    for v in &pool[nf..] {
        let allowed = if rng.random_bool(0.5) {
            Allowed::All
        } else {
            let n = rng.random_range(1..3);
            Allowed::States(random_labels(rng, n))
        };
        s.evidence.push(EvidenceSpec { variable: v.clone(), allowed });
    }
    if rng.random_bool(0.5) {
        s.generation = Generation::Sampled(Sampling { count: rng.random_range(0..1000), seed: rng.random() });
    }
    if rng.random_bool(0.4) {
        s.unanticipated = Some(Sampling { count: rng.random_range(0..50), seed: rng.random() });
    }
    s.comments = random_comments(rng);
    s
}

/// Random knowledge base exercising every item kind and quoting rule.
pub fn random_kb<R: Rng + ?Sized>(rng: &mut R) -> KnowledgeBase {
    let mut kb = KnowledgeBase::default();
    let mut next = 0usize;
    let mut fresh = |rng: &mut R| {
        next += 1;
        random_name(rng, next)
    };
    for _ in 0..rng.random_range(0..3) {
        let name = fresh(rng);
        let def = Definition {
            states: random_space(rng),
            description: if rng.random_bool(0.5) { random_text(rng) } else { String::new() },
            comments: random_comments(rng),
        };
        kb.definitions.insert(name, def);
    }
    let mut class_names: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let name = fresh(rng);
        kb.classes.push(random_class(rng, name.clone(), &class_names));
        class_names.push(name);
    }
    for _ in 0..rng.random_range(0..2) {
        let name = fresh(rng);
        kb.templates.push(random_template(rng, name));
    }
    let mut var_names: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        let name = fresh(rng);
        let f = random_fragment(rng, name, &class_names);
        var_names.extend(f.residents.iter().map(|v| v.name.clone()));
        kb.fragments.push(f);
    }
    for t in kb.templates.clone() {
        if rng.random_bool(0.7) {
            let n = rng.random_range(1..4);
            kb.instances.push(Instance {
                template: t.name.clone(),
                bindings: vec![
                    ("X".into(), ParamValue::Identifier(format!("{}{}", pick(rng, &PLAIN), rng.random_range(0..9)))),
                    ("S".into(), ParamValue::States(random_labels(rng, n))),
                ],
                comments: random_comments(rng),
            });
        }
    }
    let fragment_names: Vec<String> = kb.fragments.iter().map(|f| f.name.clone()).collect();
    let mut model_names = Vec::new();
    for _ in 0..rng.random_range(0..3) {
        let name = fresh(rng);
        let mut fragments = fragment_names.clone();
        fragments.shuffle(rng);
        fragments.truncate(rng.random_range(0..=fragments.len()));
        let mut bindings = Vec::new();
        if fragments.len() >= 2 && rng.random_bool(0.5) {
            bindings.push(BindDecl {
                input: VarRef::new(fragments[0].clone(), random_name(rng, 0)),
                target: VarRef::new(fragments[1].clone(), random_name(rng, 1)),
            });
        }
        let replacements = if rng.random_bool(0.3) { vec![(fresh(rng), fresh(rng))] } else { Vec::new() };
        kb.models.push(ModelDecl {
            name: name.clone(),
            fragments,
            bindings,
            replacements,
            description: if rng.random_bool(0.3) { random_text(rng) } else { String::new() },
            comments: random_comments(rng),
        });
        model_names.push(name);
    }
    for _ in 0..rng.random_range(0..3) {
        let name = fresh(rng);
        kb.constraints.push(random_constraint(rng, name, &var_names));
    }
    for _ in 0..rng.random_range(0..3) {
        let name = fresh(rng);
        kb.scenarios.push(random_scenario(rng, name, &var_names, &model_names));
    }
    kb
}

/// One random edit: CPT values, arcs, variables, fragments, comments,
/// constraints, scenarios or declaration order.
pub fn random_edit<R: Rng + ?Sized>(rng: &mut R, kb: &mut KnowledgeBase) {
    let salt = rng.random_range(1000..1_000_000);
    match rng.random_range(0..10) {
        0 | 1 => {
            // perturb one CPT number
            let cands: Vec<(usize, usize)> = kb
                .fragments
                .iter()
                .enumerate()
                .flat_map(|(i, f)| (0..f.residents.len()).map(move |j| (i, j)))
                .collect();
            if let Some(&(i, j)) = cands.get(rng.random_range(0..cands.len().max(1))) {
                let v = &mut kb.fragments[i].residents[j];
                match &mut v.cpt {
                    Some(CptSpec::Explicit { rows }) if !rows.is_empty() => {
                        let r = rng.random_range(0..rows.len());
                        let c = rng.random_range(0..rows[r].len().max(1));
                        if let Some(x) = rows[r].get_mut(c) {
                            *x += 0.05;
                        }
                    }
                    Some(CptSpec::NoisyOr { leak, .. }) => *leak += 0.05,
                    _ => v.cpt = Some(CptSpec::Explicit { rows: vec![vec![0.5, 0.5]] }),
                }
            }
        }
        2 => {
            let name = format!("Added{salt}");
            if kb.fragment(&name).is_some() {
                return;
            }
            let f = random_fragment(rng, name, &[]);
            let at = rng.random_range(0..=kb.fragments.len());
            kb.fragments.insert(at, f);
        }
        3 if !kb.fragments.is_empty() => {
            let i = rng.random_range(0..kb.fragments.len());
            kb.fragments.remove(i);
        }
        4 if !kb.fragments.is_empty() => {
            let i = rng.random_range(0..kb.fragments.len());
            let f = &mut kb.fragments[i];
            let space = StateSpace::boolean();
            let parents: Vec<String> = f.inputs.iter().take(1).map(|v| v.name.clone()).collect();
            let var = ResidentVar {
                name: format!("New{salt}"),
                class_ref: None,
                states: Some(space),
                parents,
                cpt: Some(CptSpec::Explicit { rows: vec![vec![0.2, 0.8]] }),
                description: String::new(),
                comments: Vec::new(),
            };
            let at = rng.random_range(0..=f.residents.len());
            f.residents.insert(at, var);
        }
        5 if !kb.fragments.is_empty() => {
            // add or drop an arc, or swap parent order
            let i = rng.random_range(0..kb.fragments.len());
            let f = &mut kb.fragments[i];
            let inputs: Vec<String> = f.inputs.iter().map(|v| v.name.clone()).collect();
            if let Some(v) = f.residents.last_mut() {
                if v.parents.len() >= 2 && rng.random_bool(0.5) {
                    v.parents.swap(0, 1);
                } else if let Some(p) = inputs.iter().find(|p| !v.parents.contains(p)) {
                    let at = rng.random_range(0..=v.parents.len());
                    v.parents.insert(at, p.clone());
                } else if !v.parents.is_empty() {
                    v.parents.remove(0);
                }
            }
        }
        6 if !kb.fragments.is_empty() => {
            let i = rng.random_range(0..kb.fragments.len());
            kb.fragments[i].comments.push(format!("edited {salt}"));
            if let Some(v) = kb.fragments[i].residents.first_mut() {
                v.description = format!("revised {salt}");
            }
        }
        7 => {
            let vars: Vec<String> =
                kb.fragments.iter().flat_map(|f| f.residents.iter().map(|v| v.name.clone())).collect();
            kb.constraints.push(random_constraint(rng, format!("c{salt}"), &vars));
        }
        8 => {
            let vars: Vec<String> =
                kb.fragments.iter().flat_map(|f| f.residents.iter().map(|v| v.name.clone())).collect();
            if kb.scenarios.is_empty() || rng.random_bool(0.5) {
                kb.scenarios.push(random_scenario(rng, format!("s{salt}"), &vars, &[]));
            } else {
                kb.scenarios.pop();
            }
        }
        _ => {
            kb.fragments.shuffle(rng);
            if let Some(f) = kb.fragments.first_mut() {
                f.residents.shuffle(rng);
                f.inputs.reverse();
            }
        }
    }
}
