use alloc::string::ToString;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::inference::{evidence_probability, InferenceError};
use crate::network::{CompiledNetwork, Evidence};

pub const DEFAULT_CONFLICT_THRESHOLD: f64 = 2.0;

/// `log2(Π P(e_i) / P(e))` in bits. Positive values mean the findings are
/// less likely together than apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictScore {
    /// Infinite when the findings are jointly impossible.
    pub value: f64,
    pub threshold: f64,
    /// `value > threshold`, and always set when impossible.
    pub flagged: bool,
    pub impossible: bool,
}

pub fn conflict(net: &CompiledNetwork, evidence: &Evidence, threshold: f64) -> Result<ConflictScore, EvaluationError> {
    net.resolve_evidence(evidence).map_err(InferenceError::from)?;
    let mut product = 1.0;
    for (v, s) in evidence.iter() {
        let p = evidence_probability(net, &Evidence::new().with(v, s))?;
        if p == 0.0 {
            return Err(EvaluationError::ImpossibleFinding { variable: v.to_string(), state: s.to_string() });
        }
        product *= p;
    }
    let joint = evidence_probability(net, evidence)?;
    if joint == 0.0 {
        return Ok(ConflictScore { value: f64::INFINITY, threshold, flagged: true, impossible: true });
    }
    let value = libm::log2(product / joint);
    Ok(ConflictScore { value, threshold, flagged: value > threshold, impossible: false })
}
