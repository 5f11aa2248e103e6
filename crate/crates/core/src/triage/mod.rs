//! Routing of flagged instances to qualified reviewers and single-blind
//! adjudication.

pub mod http;
mod queue;
mod service;

pub use queue::{build_queue, priority, QueueEntry, Reviewer, SkippedEntry, TriageQueue};
pub use service::{
    apply_records, is_ordinal, validation_report, AdjudicationRecord, AdjudicationRequest, BlindPacket, Clock, QueueItem,
    TriageError, TriageService, ValidationConfig, ValidationReport,
};
