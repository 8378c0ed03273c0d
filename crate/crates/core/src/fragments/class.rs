use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use super::{ClassConstraint, FragmentError, VariableClass};
use crate::cpt::CptSpec;
use crate::network::StateSpace;

/// Is-a forest of variable classes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassHierarchy {
    classes: BTreeMap<String, VariableClass>,
}

/// A feature value together with the class that supplied it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sourced<T> {
    pub value: T,
    pub supplier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedClass {
    pub class: String,
    pub states: Option<Sourced<StateSpace>>,
    pub default_cpt: Option<Sourced<CptSpec>>,
    pub description: Option<Sourced<String>>,
    pub constraints: Option<Sourced<Vec<ClassConstraint>>>,
}

impl ClassHierarchy {
    pub fn new(classes: impl IntoIterator<Item = VariableClass>) -> Result<Self, FragmentError> {
        let mut map = BTreeMap::new();
        for c in classes {
            if map.contains_key(&c.name) {
                return Err(FragmentError::DuplicateClass(c.name));
            }
            map.insert(c.name.clone(), c);
        }
        Ok(ClassHierarchy { classes: map })
    }

    pub fn get(&self, name: &str) -> Option<&VariableClass> {
        self.classes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// `name` followed by its ancestors, nearest first.
    pub fn chain(&self, name: &str) -> Result<Vec<&VariableClass>, FragmentError> {
        let mut out: Vec<&VariableClass> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cur = Some(name);
        while let Some(n) = cur {
            let class = self.classes.get(n).ok_or_else(|| FragmentError::UnknownClass(n.to_string()))?;
            if !seen.insert(n) {
                let mut cycle: Vec<String> = out.iter().map(|c| c.name.clone()).collect();
                cycle.push(n.to_string());
                return Err(FragmentError::ClassCycle(cycle));
            }
            out.push(class);
            cur = class.parent.as_deref();
        }
        Ok(out)
    }

    /// True when `name` is `ancestor` or inherits from it.
    pub fn is_a(&self, name: &str, ancestor: &str) -> bool {
        self.chain(name).map(|c| c.iter().any(|k| k.name == ancestor)).unwrap_or(false)
    }

    /// Each class that sits on an is-a cycle, reported once per cycle.
    pub fn cycles(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        let mut reported = BTreeSet::new();
        for name in self.classes.keys() {
            if let Err(FragmentError::ClassCycle(path)) = self.chain(name) {
                let last = path.last().cloned().unwrap_or_default();
                let start = path.iter().position(|p| *p == last).unwrap_or(0);
                let cycle: Vec<String> = path[start..path.len() - 1].to_vec();
                let key: BTreeSet<String> = cycle.iter().cloned().collect();
                if reported.insert(key) {
                    out.push(cycle);
                }
            }
        }
        out
    }
}

/// Nearest-ancestor-wins resolution of every inheritable feature.
pub fn resolve_class(name: &str, hierarchy: &ClassHierarchy) -> Result<ResolvedClass, FragmentError> {
    let chain = hierarchy.chain(name)?;
    fn pick<T: Clone>(chain: &[&VariableClass], get: impl Fn(&VariableClass) -> Option<&T>) -> Option<Sourced<T>> {
        chain.iter().find_map(|c| get(c).map(|v| Sourced { value: v.clone(), supplier: c.name.clone() }))
    }
    Ok(ResolvedClass {
        class: name.to_string(),
        states: pick(&chain, |c| c.states.as_ref()),
        default_cpt: pick(&chain, |c| c.default_cpt.as_ref()),
        description: pick(&chain, |c| c.description.as_ref()),
        constraints: pick(&chain, |c| c.constraints.as_ref()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn hierarchy() -> ClassHierarchy {
        let mut distance = VariableClass::new("Distance");
        distance.states = Some(StateSpace::new(["near", "mid", "far"], true).unwrap());
        distance.description = Some("distance between two objects".into());
        let mut to_target = VariableClass::new("DistanceToTarget");
        to_target.parent = Some("Distance".into());
        let mut coarse = VariableClass::new("CoarseDistance");
        coarse.parent = Some("Distance".into());
        coarse.states = Some(StateSpace::new(["close", "remote"], true).unwrap());
        ClassHierarchy::new(vec![distance, to_target, coarse]).unwrap()
    }

    #[test]
    fn subclass_without_overrides_matches_parent() {
        let h = hierarchy();
        let parent = resolve_class("Distance", &h).unwrap();
        let child = resolve_class("DistanceToTarget", &h).unwrap();
        assert_eq!(child.states.as_ref().unwrap().value, parent.states.as_ref().unwrap().value);
        assert_eq!(child.description.as_ref().unwrap().value, parent.description.as_ref().unwrap().value);
        assert_eq!(child.states.unwrap().supplier, "Distance");
    }

    #[test]
    fn override_wins_other_features_inherited() {
        let r = resolve_class("CoarseDistance", &hierarchy()).unwrap();
        let states = r.states.unwrap();
        assert_eq!(states.supplier, "CoarseDistance");
        assert_eq!(states.value.states(), ["close", "remote"]);
        assert_eq!(r.description.unwrap().supplier, "Distance");
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let mut c = VariableClass::new("Loop");
        c.parent = Some("Loop".into());
        let h = ClassHierarchy::new(vec![c]).unwrap();
        assert_eq!(resolve_class("Loop", &h), Err(FragmentError::ClassCycle(vec!["Loop".into(), "Loop".into()])));
        assert_eq!(h.cycles(), vec![vec![String::from("Loop")]]);
    }

    #[test]
    fn is_a_follows_chain() {
        let h = hierarchy();
        assert!(h.is_a("DistanceToTarget", "Distance"));
        assert!(!h.is_a("Distance", "DistanceToTarget"));
    }
}
