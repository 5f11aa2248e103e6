use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{DiscrepancyKind, DiscrepancyReport};
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reviewer {
    pub reviewer_id: String,
    pub display_name: String,
    /// Calculator ids the reviewer is qualified to adjudicate.
    pub specialties: BTreeSet<String>,
}

impl Reviewer {
    pub fn new(reviewer_id: &str, display_name: &str, specialties: &[&str]) -> Self {
        Self {
            reviewer_id: reviewer_id.to_string(),
            display_name: display_name.to_string(),
            specialties: specialties.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.specialties.is_empty() {
            return Err(format!("reviewer {} has no specialties", self.reviewer_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub unique_id: String,
    pub calculator_id: String,
    pub kind: DiscrepancyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_err: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_days: Option<f64>,
    pub reviewer_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub unique_id: String,
    pub reason: String,
}

/// Flagged instances in adjudication order, each assigned to one reviewer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageQueue {
    pub entries: Vec<QueueEntry>,
    pub skipped: Vec<SkippedEntry>,
}

impl TriageQueue {
    pub fn assignments(&self) -> IndexMap<&str, &str> {
        self.entries
            .iter()
            .map(|e| (e.unique_id.as_str(), e.reviewer_id.as_str()))
            .collect()
    }

    pub fn get(&self, unique_id: &str) -> Option<&QueueEntry> {
        self.entries.iter().find(|e| e.unique_id == unique_id)
    }
}

fn tier(kind: DiscrepancyKind) -> u8 {
    match kind {
        DiscrepancyKind::NaMismatch | DiscrepancyKind::TypeMismatch => 0,
        DiscrepancyKind::Numeric => 1,
        DiscrepancyKind::Datetime => 2,
        DiscrepancyKind::BothNa => 3,
    }
}

/// Adjudication priority: NA mismatches first, then numeric pairs by
/// descending `rel_err`, then datetime pairs by descending separation. Ties
/// fall back to ascending unique id.
pub fn priority(a: &DiscrepancyReport, b: &DiscrepancyReport) -> Ordering {
    tier(a.kind)
        .cmp(&tier(b.kind))
        .then_with(|| b.rel_err.unwrap_or_default().cmp(&a.rel_err.unwrap_or_default()))
        .then_with(|| b.delta_days.unwrap_or(0.0).total_cmp(&a.delta_days.unwrap_or(0.0)))
        .then_with(|| a.unique_id.cmp(&b.unique_id))
}

/// Sorts flagged reports and assigns the first `limit` that some reviewer can
/// take. Among qualified reviewers the one with the fewest assignments wins,
/// ties by reviewer id.
pub fn build_queue(
    reports: &[DiscrepancyReport],
    instances: &[Instance],
    reviewers: &[Reviewer],
    limit: usize,
) -> TriageQueue {
    let calculators: HashMap<&str, &str> = instances
        .iter()
        .map(|i| (i.unique_id.as_str(), i.question.calculator_id.as_str()))
        .collect();
    let mut flagged: Vec<&DiscrepancyReport> = reports.iter().filter(|r| r.flagged).collect();
    flagged.sort_by(|a, b| priority(a, b));

    let mut load: HashMap<&str, usize> = reviewers.iter().map(|r| (r.reviewer_id.as_str(), 0)).collect();
    let mut queue = TriageQueue::default();
    for report in flagged {
        if queue.entries.len() >= limit {
            break;
        }
        let Some(calculator_id) = calculators.get(report.unique_id.as_str()) else {
            queue.skipped.push(SkippedEntry {
                unique_id: report.unique_id.clone(),
                reason: "instance not found".into(),
            });
            continue;
        };
        let chosen = reviewers
            .iter()
            .filter(|r| r.specialties.contains(*calculator_id))
            .min_by(|a, b| {
                load[a.reviewer_id.as_str()]
                    .cmp(&load[b.reviewer_id.as_str()])
                    .then_with(|| a.reviewer_id.cmp(&b.reviewer_id))
            });
        match chosen {
            Some(reviewer) => {
                *load.get_mut(reviewer.reviewer_id.as_str()).expect("known reviewer") += 1;
                queue.entries.push(QueueEntry {
                    unique_id: report.unique_id.clone(),
                    calculator_id: calculator_id.to_string(),
                    kind: report.kind,
                    rel_err: report.rel_err,
                    delta_days: report.delta_days,
                    reviewer_id: reviewer.reviewer_id.clone(),
                });
            }
            None => queue.skipped.push(SkippedEntry {
                unique_id: report.unique_id.clone(),
                reason: format!("no reviewer covers calculator {calculator_id}"),
            }),
        }
    }
    queue
}
