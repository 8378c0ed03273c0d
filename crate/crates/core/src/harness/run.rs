use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::scenario::domain;
use super::{HarnessError, Scenario, TestCase};
use crate::evaluation::{conflict, DEFAULT_CONFLICT_THRESHOLD};
use crate::inference::{evidence_probability, posterior};
use crate::network::{CompiledNetwork, Evidence};

/// Version of the run-result and golden-file layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Focus variable → state → posterior probability.
pub type FocusMarginals = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    /// The evidence has probability zero under the model.
    Impossible,
    Evaluated {
        evidence_probability: f64,
        conflict: f64,
        focus: FocusMarginals,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub index: usize,
    pub evidence: Evidence,
    pub unanticipated: bool,
    /// Free-text expert verdict; carried along, never interpreted.
    #[serde(default)]
    pub verdict: Option<String>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub schema_version: u32,
    pub scenario: String,
    pub focus: Vec<String>,
    pub cases: Vec<CaseResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub schema_version: u32,
    pub kb_version_id: String,
    pub scenario: String,
    pub focus: Vec<String>,
    pub cases: Vec<CaseResult>,
}

/// Evaluates every case independently; zero-probability evidence is
/// recorded as [`Outcome::Impossible`].
pub fn run_cases(net: &CompiledNetwork, scenario: &Scenario, cases: &[TestCase]) -> Result<RunResults, HarnessError> {
    domain(scenario, net)?;
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let p = evidence_probability(net, &case.evidence).map_err(|e| HarnessError::Inference(e.to_string()))?;
        let outcome = if p == 0.0 {
            Outcome::Impossible
        } else {
            let post =
                posterior(net, &case.evidence, &scenario.focus).map_err(|e| HarnessError::Inference(e.to_string()))?;
            let focus =
                post.into_iter().map(|(v, m)| (v, m.states.into_iter().zip(m.probabilities).collect())).collect();
            let c = conflict(net, &case.evidence, DEFAULT_CONFLICT_THRESHOLD)
                .map_err(|e| HarnessError::Inference(e.to_string()))?;
            Outcome::Evaluated { evidence_probability: p, conflict: c.value, focus }
        };
        out.push(CaseResult {
            index: case.index,
            evidence: case.evidence.clone(),
            unanticipated: case.unanticipated,
            verdict: None,
            outcome,
        });
    }
    Ok(RunResults {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        focus: scenario.focus.clone(),
        cases: out,
    })
}

pub fn record_golden(results: &RunResults, version_id: &str) -> GoldenRecord {
    GoldenRecord {
        schema_version: SCHEMA_VERSION,
        kb_version_id: version_id.to_string(),
        scenario: results.scenario.clone(),
        focus: results.focus.clone(),
        cases: results.cases.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub case: usize,
    pub evidence: Evidence,
    pub variable: String,
    pub state: String,
    pub golden: f64,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusChange {
    pub case: usize,
    pub evidence: Evidence,
    pub golden_impossible: bool,
    pub current_impossible: bool,
}

/// Empty when the run matches the golden record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub drifts: Vec<Drift>,
    pub status_changes: Vec<StatusChange>,
}

impl RegressionReport {
    pub fn is_empty(&self) -> bool {
        self.drifts.is_empty() && self.status_changes.is_empty()
    }

    /// Distinct cases with any drift or status change.
    pub fn flagged_cases(&self) -> usize {
        let mut cases: Vec<usize> =
            self.drifts.iter().map(|d| d.case).chain(self.status_changes.iter().map(|s| s.case)).collect();
        cases.sort_unstable();
        cases.dedup();
        cases.len()
    }
}

/// Every `(case, focus, state)` whose probability moved by more than `tol`,
/// plus every impossibility-status change.
pub fn compare_golden(results: &RunResults, golden: &GoldenRecord, tol: f64) -> Result<RegressionReport, HarnessError> {
    if results.scenario != golden.scenario {
        return Err(HarnessError::CaseSetMismatch(format!(
            "scenario `{}` compared against golden for `{}`",
            results.scenario, golden.scenario
        )));
    }
    if results.focus != golden.focus {
        return Err(HarnessError::CaseSetMismatch("focus variables differ".into()));
    }
    if results.cases.len() != golden.cases.len() {
        return Err(HarnessError::CaseSetMismatch(format!(
            "{} cases against {} in the golden record",
            results.cases.len(),
            golden.cases.len()
        )));
    }
    let mut report = RegressionReport::default();
    for (cur, old) in results.cases.iter().zip(&golden.cases) {
        if cur.index != old.index || cur.evidence != old.evidence || cur.unanticipated != old.unanticipated {
            return Err(HarnessError::CaseSetMismatch(format!("case {} has different evidence", cur.index)));
        }
        match (&cur.outcome, &old.outcome) {
            (Outcome::Evaluated { focus: now, .. }, Outcome::Evaluated { focus: then, .. }) => {
                for (var, states) in then {
                    let current = now
                        .get(var)
                        .filter(|m| m.len() == states.len() && m.keys().eq(states.keys()))
                        .ok_or_else(|| HarnessError::CaseSetMismatch(format!("focus `{var}` changed shape")))?;
                    for (state, &g) in states {
                        let c = current[state];
                        let within = libm::fabs(c - g) <= tol;
                        if !within {
                            report.drifts.push(Drift {
                                case: cur.index,
                                evidence: cur.evidence.clone(),
                                variable: var.clone(),
                                state: state.clone(),
                                golden: g,
                                current: c,
                            });
                        }
                    }
                }
            }
            (Outcome::Impossible, Outcome::Impossible) => {}
            (now, _) => report.status_changes.push(StatusChange {
                case: cur.index,
                evidence: cur.evidence.clone(),
                golden_impossible: !matches!(now, Outcome::Impossible),
                current_impossible: matches!(now, Outcome::Impossible),
            }),
        }
    }
    Ok(report)
}
