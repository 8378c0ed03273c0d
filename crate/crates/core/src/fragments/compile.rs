use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::compose::{resolve_states, VarSource};
use super::{
    compose, instantiate_template, resolve_class, substitute_stub, Binding, ClassHierarchy, ComposedModel, Fragment,
    FragmentError,
};
use crate::constraint::Constraint;
use crate::cpt::{expand_cpt, CptForm};
use crate::dsl::KnowledgeBase;
use crate::network::{validate_network, CompiledNetwork, Provenance, StateSpace, Variable};

/// Resolves classes, expands every CPT and flattens the model into a
/// network whose variables are in topological order (ties by name).
pub fn compile(model: &ComposedModel, hierarchy: &ClassHierarchy) -> Result<CompiledNetwork, FragmentError> {
    let vars = model.variables();
    let mut variables = Vec::with_capacity(vars.len());
    let mut parents = Vec::with_capacity(vars.len());
    let mut tables = Vec::with_capacity(vars.len());
    let mut provenance = Vec::with_capacity(vars.len());

    for (name, cv) in vars {
        let fragment = model.fragment(&cv.home).expect("home fragment present");
        let (class_ref, description, table, form) = match cv.source {
            VarSource::Exogenous => {
                let input = fragment.input(name).expect("exogenous input present");
                let prior = input.prior.clone().unwrap_or_default();
                if prior.len() != cv.states.len() {
                    return Err(FragmentError::PriorLength {
                        variable: name.clone(),
                        expected: cv.states.len(),
                        found: prior.len(),
                    });
                }
                (input.class_ref.clone(), input.description.clone(), alloc::vec![prior], CptForm::Explicit)
            }
            VarSource::Resident => {
                let r = fragment.resident(name).expect("resident present");
                let resolved = match &r.class_ref {
                    Some(c) => Some(resolve_class(c, hierarchy)?),
                    None => None,
                };
                let spec = match (&r.cpt, resolved.as_ref().and_then(|c| c.default_cpt.as_ref())) {
                    (Some(spec), _) => spec.clone(),
                    (None, Some(inherited)) => inherited.value.clone(),
                    (None, None) => {
                        return Err(FragmentError::MissingFeature { variable: name.clone(), feature: "CPT" })
                    }
                };
                let parent_spaces: Vec<&StateSpace> = cv.parents.iter().map(|p| &vars[p].states).collect();
                let table = expand_cpt(&spec, &cv.states, &parent_spaces)
                    .map_err(|source| FragmentError::Cpt { variable: name.clone(), source })?;
                let description = if r.description.is_empty() {
                    resolved.as_ref().and_then(|c| c.description.as_ref()).map(|d| d.value.clone()).unwrap_or_default()
                } else {
                    r.description.clone()
                };
                (r.class_ref.clone(), description, table, spec.form())
            }
        };
        variables.push(Variable { name: name.clone(), states: cv.states.clone(), class_ref, description });
        parents.push(cv.parents.clone());
        tables.push(table);
        provenance.push(Provenance { fragment: cv.home.clone(), form });
    }

    let by_name = CompiledNetwork::new(variables, parents, tables, provenance)
        .map_err(|e| FragmentError::Instantiation(alloc::vec![e.to_string()]))?;
    let order = by_name.topological_order().ok_or_else(|| FragmentError::CrossCycle(Vec::new()))?;
    let mut variables = Vec::with_capacity(order.len());
    let mut parents = Vec::with_capacity(order.len());
    let mut tables = Vec::with_capacity(order.len());
    let mut provenance = Vec::with_capacity(order.len());
    for i in order {
        variables.push(by_name.variable(i).clone());
        parents.push(by_name.parent_names(i).into_iter().map(String::from).collect());
        tables.push(by_name.cpt(i).to_vec());
        provenance.push(by_name.provenance(i).clone());
    }
    let net = CompiledNetwork::new(variables, parents, tables, provenance)
        .map_err(|e| FragmentError::Instantiation(alloc::vec![e.to_string()]))?;
    let report = validate_network(&net);
    if !report.is_clean() {
        return Err(FragmentError::Invalid(report));
    }
    Ok(net)
}

/// Monotone constraints inherited through classes, instantiated for every
/// compiled variable and each parent whose class matches.
pub fn instantiate_class_constraints(net: &CompiledNetwork, hierarchy: &ClassHierarchy) -> Vec<Constraint> {
    let mut out = Vec::new();
    for (i, v) in net.variables().iter().enumerate() {
        let Some(class) = &v.class_ref else { continue };
        let Ok(resolved) = resolve_class(class, hierarchy) else { continue };
        let Some(constraints) = resolved.constraints else { continue };
        for cc in &constraints.value {
            for &p in net.parents(i) {
                let parent = net.variable(p);
                if parent.class_ref.as_deref().is_some_and(|pc| hierarchy.is_a(pc, &cc.parent_class)) {
                    out.push(Constraint::Monotone {
                        child: v.name.clone(),
                        target: cc.target.clone(),
                        parent: parent.name.clone(),
                        direction: cc.direction,
                    });
                }
            }
        }
    }
    out
}

/// A knowledge-base model, composed and compiled.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub name: Option<String>,
    pub hierarchy: ClassHierarchy,
    pub composed: ComposedModel,
    pub network: CompiledNetwork,
    /// Declared constraints on variables of this network, then
    /// class-inherited ones.
    pub constraints: Vec<Constraint>,
}

/// Declared fragments plus every template instance, in declaration order.
pub fn all_fragments(kb: &KnowledgeBase) -> Result<Vec<Fragment>, FragmentError> {
    let mut out = kb.fragments.clone();
    for inst in &kb.instances {
        let template = kb
            .templates
            .iter()
            .find(|t| t.name == inst.template)
            .ok_or_else(|| FragmentError::UnknownTemplate(inst.template.clone()))?;
        let bindings: BTreeMap<String, _> = inst.bindings.iter().cloned().collect();
        out.push(instantiate_template(template, &bindings)?);
    }
    Ok(out)
}

/// Composes and compiles the named model, the first declared model when
/// `name` is `None`, or every fragment with no bindings when the KB
/// declares no model.
pub fn build_model(kb: &KnowledgeBase, name: Option<&str>) -> Result<BuiltModel, FragmentError> {
    let hierarchy = ClassHierarchy::new(kb.classes.iter().cloned())?;
    let fragments = all_fragments(kb)?;
    let decl = match name {
        Some(n) => {
            Some(kb.models.iter().find(|m| m.name == n).ok_or_else(|| FragmentError::UnknownModel(n.to_string()))?)
        }
        None => kb.models.first(),
    };

    let composed = match decl {
        None => compose(fragments, &Binding::new(), &hierarchy)?,
        Some(decl) => {
            let find = |n: &str| {
                fragments
                    .iter()
                    .find(|f| f.name == n)
                    .cloned()
                    .ok_or_else(|| FragmentError::UnknownFragment(n.to_string()))
            };
            let selected = decl.fragments.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;
            let mut binding = Binding::new();
            for b in &decl.bindings {
                binding.connections.insert(b.input.clone(), b.target.clone());
            }
            let mut model = compose(selected, &binding, &hierarchy)?;
            for (stub, replacement) in &decl.replacements {
                model = substitute_stub(&model, stub, find(replacement)?, &hierarchy)?;
            }
            model
        }
    };
    let network = compile(&composed, &hierarchy)?;

    let mut constraints: Vec<Constraint> = kb
        .constraints
        .iter()
        .filter(|c| network.index_of(c.constraint.child()).is_some())
        .map(|c| c.constraint.clone())
        .collect();
    constraints.extend(instantiate_class_constraints(&network, &hierarchy));

    Ok(BuiltModel { name: decl.map(|d| d.name.clone()), hierarchy, composed, network, constraints })
}

/// State space of an input or resident, following the class chain.
pub fn fragment_var_states(fragment: &Fragment, variable: &str, hierarchy: &ClassHierarchy) -> Option<StateSpace> {
    if let Some(r) = fragment.resident(variable) {
        return resolve_states(&r.name, r.states.as_ref(), r.class_ref.as_deref(), hierarchy).ok();
    }
    let i = fragment.input(variable)?;
    resolve_states(&i.name, i.states.as_ref(), i.class_ref.as_deref(), hierarchy).ok()
}
