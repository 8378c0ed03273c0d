use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ImportanceResult;
use crate::network::Evidence;

/// Machine-readable form of an importance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub focus: String,
    pub base: Evidence,
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub importance: f64,
    pub score: f64,
    pub stars: u32,
}

fn stars(score: f64) -> u32 {
    if score <= 0.0 {
        0
    } else {
        libm::ceil(5.0 * score / 100.0).clamp(0.0, 5.0) as u32
    }
}

/// Printed score: `0` for zero, `0+` for a nonzero score below 1, else the
/// rounded score.
fn score_text(score: f64) -> String {
    if score <= 0.0 {
        "0".into()
    } else if score < 1.0 {
        "0+".into()
    } else {
        format!("{}", libm::round(score) as u64)
    }
}

pub fn report_entries(result: &ImportanceResult) -> ImportanceReport {
    ImportanceReport {
        focus: result.focus.clone(),
        base: result.base.clone(),
        entries: result
            .entries
            .iter()
            .map(|e| ReportEntry {
                name: e.name.clone(),
                importance: e.importance,
                score: e.score,
                stars: stars(e.score),
            })
            .collect(),
    }
}

/// Fixed-width text table: a bar of up to five asterisks, the score, then
/// the variable name, in rank order.
pub fn render_importance_report(result: &ImportanceResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Importance analysis for {}", result.focus);
    let observations = if result.base.is_empty() { String::from("none") } else { format!("{}", result.base) };
    let _ = writeln!(out, "Current Observations: {observations}");
    let _ = writeln!(out);
    let _ = writeln!(out, "IMPORTANCE    ##  NAME");
    for e in report_entries(result).entries {
        let bar = "*".repeat(e.stars as usize);
        let _ = writeln!(out, "{bar:<10} {:>5}  {}", score_text(e.score), e.name);
    }
    out
}
