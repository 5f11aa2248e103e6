use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::queue::{Reviewer, TriageQueue};
use crate::calculators::CalculatorRegistry;
use crate::dataset::{append_jsonl, read_jsonl_or_empty, DatasetError};
use crate::discrepancy::{self, StatsError, ValidationPair, ValidationSummary, DEFAULT_RESAMPLES};
use crate::model::{parse_label, Instance, Label, OutputKind};

/// What a reviewer sees: the note and the question, nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindPacket {
    pub unique_id: String,
    pub note_id: String,
    pub note_text: String,
    pub question_text: String,
    pub calculator_id: String,
    pub calculator_name: String,
    /// Lets the reviewer know whether a number or a date is expected.
    pub output_kind: OutputKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRequest {
    pub reviewer_id: String,
    /// Answer text as typed by the reviewer; `unknown` records NA.
    pub label: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub unique_id: String,
    pub reviewer_id: String,
    pub label: Label,
    pub rationale: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub unique_id: String,
    pub reviewer_id: String,
    pub calculator_id: String,
    pub calculator_name: String,
    pub output_kind: OutputKind,
    pub adjudicated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_adjudicated: usize,
    pub original: ValidationSummary,
    pub new: ValidationSummary,
}

impl ValidationReport {
    pub fn table(&self) -> String {
        discrepancy::validation_table(&[("original", &self.original), ("new", &self.new)])
    }
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("instance {0} is not in the adjudication queue")]
    NotInQueue(String),
    #[error("instance {unique_id} is assigned to {assigned}, not {reviewer_id}")]
    WrongReviewer {
        unique_id: String,
        reviewer_id: String,
        assigned: String,
    },
    #[error("instance {0} was already adjudicated")]
    AlreadyAdjudicated(String),
    #[error("cannot read {text:?} as a {kind} answer")]
    ParseFailure { text: String, kind: &'static str },
    #[error("no adjudications recorded yet")]
    EmptyInput,
    #[error("event log: {0}")]
    Log(#[from] std::io::Error),
    #[error("event log: {0}")]
    LogRead(#[from] DatasetError),
    #[error("validation statistics: {0}")]
    Stats(StatsError),
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            n_resamples: DEFAULT_RESAMPLES,
            level: 0.95,
            seed: 0,
        }
    }
}

struct State {
    instances: IndexMap<String, Instance>,
    queue: TriageQueue,
    records: IndexMap<String, AdjudicationRecord>,
}

/// Adjudication backend. Reads run concurrently; submissions go through a
/// single writer and are appended to the event log before they take effect.
pub struct TriageService {
    state: RwLock<State>,
    reviewers: Vec<Reviewer>,
    log_path: Option<PathBuf>,
    clock: Clock,
    validation: ValidationConfig,
}

impl TriageService {
    pub fn new(instances: Vec<Instance>, queue: TriageQueue, reviewers: Vec<Reviewer>) -> Self {
        Self {
            state: RwLock::new(State {
                instances: instances.into_iter().map(|i| (i.unique_id.clone(), i)).collect(),
                queue,
                records: IndexMap::new(),
            }),
            reviewers,
            log_path: None,
            clock: Arc::new(Utc::now),
            validation: ValidationConfig::default(),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_validation(mut self, validation: ValidationConfig) -> Self {
        self.validation = validation;
        self
    }

    /// Attaches an append-only event log, first replaying any records it
    /// already holds.
    pub fn with_event_log(mut self, path: &Path) -> Result<Self, TriageError> {
        let events: Vec<AdjudicationRecord> = read_jsonl_or_empty(path)?;
        {
            let mut state = self.state.write().expect("triage state poisoned");
            for record in events {
                Self::check(&state, &record.unique_id, &record.reviewer_id)?;
                Self::apply(&mut state, record);
            }
        }
        self.log_path = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn reviewers(&self) -> &[Reviewer] {
        &self.reviewers
    }

    pub fn queue(&self) -> TriageQueue {
        self.state.read().expect("triage state poisoned").queue.clone()
    }

    /// Queue items, optionally restricted to one reviewer, in priority order.
    pub fn queue_for(&self, reviewer: Option<&str>) -> Vec<QueueItem> {
        let state = self.state.read().expect("triage state poisoned");
        state
            .queue
            .entries
            .iter()
            .filter(|e| reviewer.is_none_or(|r| r == e.reviewer_id))
            .filter_map(|e| {
                let inst = state.instances.get(&e.unique_id)?;
                Some(QueueItem {
                    unique_id: e.unique_id.clone(),
                    reviewer_id: e.reviewer_id.clone(),
                    calculator_id: inst.question.calculator_id.clone(),
                    calculator_name: inst.question.calculator_name.clone(),
                    output_kind: inst.question.output_kind,
                    adjudicated: state.records.contains_key(&e.unique_id),
                })
            })
            .collect()
    }

    pub fn blind_packet(&self, unique_id: &str) -> Result<BlindPacket, TriageError> {
        let state = self.state.read().expect("triage state poisoned");
        let inst = state
            .queue
            .get(unique_id)
            .and_then(|_| state.instances.get(unique_id))
            .ok_or_else(|| TriageError::NotInQueue(unique_id.to_string()))?;
        Ok(BlindPacket {
            unique_id: inst.unique_id.clone(),
            note_id: inst.context.note_id.clone(),
            note_text: inst.context.note_text.clone(),
            question_text: inst.question.question_text.clone(),
            calculator_id: inst.question.calculator_id.clone(),
            calculator_name: inst.question.calculator_name.clone(),
            output_kind: inst.question.output_kind,
        })
    }

    pub fn submit(&self, unique_id: &str, request: AdjudicationRequest) -> Result<AdjudicationRecord, TriageError> {
        let mut state = self.state.write().expect("triage state poisoned");
        let kind = Self::check(&state, unique_id, &request.reviewer_id)?;
        let label = parse_label(&request.label, kind).map_err(|e| TriageError::ParseFailure {
            text: e.text,
            kind: e.kind,
        })?;
        let record = AdjudicationRecord {
            unique_id: unique_id.to_string(),
            reviewer_id: request.reviewer_id,
            label,
            rationale: request.rationale,
            timestamp: (self.clock)(),
        };
        if let Some(path) = &self.log_path {
            append_jsonl(path, std::slice::from_ref(&record))?;
        }
        Self::apply(&mut state, record.clone());
        Ok(record)
    }

    fn check(state: &State, unique_id: &str, reviewer_id: &str) -> Result<OutputKind, TriageError> {
        let entry = state
            .queue
            .get(unique_id)
            .ok_or_else(|| TriageError::NotInQueue(unique_id.to_string()))?;
        let inst = state
            .instances
            .get(unique_id)
            .ok_or_else(|| TriageError::NotInQueue(unique_id.to_string()))?;
        if entry.reviewer_id != reviewer_id {
            return Err(TriageError::WrongReviewer {
                unique_id: unique_id.to_string(),
                reviewer_id: reviewer_id.to_string(),
                assigned: entry.reviewer_id.clone(),
            });
        }
        if state.records.contains_key(unique_id) {
            return Err(TriageError::AlreadyAdjudicated(unique_id.to_string()));
        }
        Ok(inst.question.output_kind)
    }

    fn apply(state: &mut State, record: AdjudicationRecord) {
        if let Some(inst) = state.instances.get_mut(&record.unique_id) {
            inst.set_label_expert(record.label.clone());
        }
        state.records.insert(record.unique_id.clone(), record);
    }

    pub fn records(&self) -> Vec<AdjudicationRecord> {
        self.state.read().expect("triage state poisoned").records.values().cloned().collect()
    }

    /// All instances with expert labels filled in where adjudicated.
    pub fn snapshot(&self) -> Vec<Instance> {
        self.state.read().expect("triage state poisoned").instances.values().cloned().collect()
    }

    /// Original and new labels scored against the expert labels, in
    /// adjudication order.
    pub fn validation_report(&self) -> Result<ValidationReport, TriageError> {
        let state = self.state.read().expect("triage state poisoned");
        let adjudicated: Vec<&Instance> = state
            .records
            .keys()
            .filter_map(|id| state.instances.get(id))
            .collect();
        validation_report(&adjudicated, &self.validation)
    }
}

/// Copies expert labels from adjudication records onto the matching
/// instances. Returns the ids that matched, in record order.
pub fn apply_records(instances: &mut [Instance], records: &[AdjudicationRecord]) -> Vec<String> {
    let mut applied = Vec::new();
    for record in records {
        if let Some(inst) = instances.iter_mut().find(|i| i.unique_id == record.unique_id) {
            inst.set_label_expert(record.label.clone());
            applied.push(record.unique_id.clone());
        }
    }
    applied
}

/// Whether agreement for this instance uses the ordinal ±1 rule.
pub fn is_ordinal(instance: &Instance) -> bool {
    CalculatorRegistry::builtin()
        .get(&instance.question.calculator_id)
        .map(|spec| spec.is_ordinal)
        .unwrap_or(instance.question.output_kind == OutputKind::Ordinal)
}

pub fn validation_report(adjudicated: &[&Instance], config: &ValidationConfig) -> Result<ValidationReport, TriageError> {
    let pairs = |candidate: fn(&Instance) -> Option<Label>| -> Vec<ValidationPair> {
        adjudicated
            .iter()
            .filter_map(|inst| {
                Some(ValidationPair {
                    unique_id: inst.unique_id.clone(),
                    expert: inst.label_expert()?.clone(),
                    candidate: candidate(inst),
                    is_ordinal: is_ordinal(inst),
                })
            })
            .collect()
    };
    let original = pairs(|i| i.label_original.clone());
    let new = pairs(|i| i.label_new.clone());
    if original.is_empty() {
        return Err(TriageError::EmptyInput);
    }
    let summarize = |p: &[ValidationPair]| {
        discrepancy::summarize(p, config.n_resamples, config.level, config.seed).map_err(TriageError::Stats)
    };
    Ok(ValidationReport {
        n_adjudicated: original.len(),
        original: summarize(&original)?,
        new: summarize(&new)?,
    })
}
