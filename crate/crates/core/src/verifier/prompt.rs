use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Phase;
use crate::dataset::{self, source_record};
use crate::model::Instance;

/// System prompt for the audit pass. Deliberately free of digits so the
/// blindness check never trips on it.
pub const AUDIT_SYSTEM_PROMPT: &str = "\
You are reviewing entries of a clinical calculation benchmark. Each entry pairs a \
patient note with a question about a medical score or formula, together with a \
reference answer that another model produced, the patient attributes it extracted \
and a worked explanation.

Decide whether the reference answer is clinically correct. Read the note yourself, \
check which attributes the calculator needs and whether they were taken from the \
note faithfully, check that the formula and any unit conversions follow the \
published calculator, and redo the arithmetic. If the note does not contain \
enough information to compute the score, the reference answer is wrong unless it \
says so. You may search the web or run code when that helps.

Be conservative. Minor rounding or presentation differences are not errors; only \
answer No when the reference answer is wrong in a way a clinician would care about.

End your reply with your verdict inside answer tags: <answer>Yes</answer> when the \
reference answer is correct, <answer>No</answer> when it is not.";

/// System prompt for the relabel pass.
pub const RELABEL_SYSTEM_PROMPT: &str = "\
You will receive a patient note and a question asking for a clinical score, \
formula value or date. Work out the answer from the note, reasoning step by step \
about which inputs the calculator requires, where each one appears in the note, \
the unit conversions involved and the arithmetic. You may search the web or run \
code when that helps.

Finish with the answer inside <answer> </answer> tags. The tags must hold only the \
value: a number without units or rounding, or a date written as YYYY-MM-DD. If \
information the calculation depends on is missing from the note and cannot be \
reasonably inferred, write <answer>unknown</answer> instead. Use that sparingly.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("instance {unique_id} has no {field:?} for the {phase:?} prompt")]
    MissingField {
        unique_id: String,
        field: &'static str,
        phase: Phase,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

pub fn render_prompt(instance: &Instance, phase: Phase) -> Result<Prompt, PromptError> {
    let missing = |field| PromptError::MissingField {
        unique_id: instance.unique_id.clone(),
        field,
        phase,
    };
    match phase {
        Phase::Audit => {
            let record = source_record(instance);
            for field in [dataset::COL_GROUND_TRUTH, dataset::COL_RELEVANT_ENTITIES] {
                if !record.contains_key(field) {
                    return Err(missing(field));
                }
            }
            Ok(Prompt {
                system: AUDIT_SYSTEM_PROMPT.to_string(),
                user: to_json(&record),
            })
        }
        Phase::Relabel => {
            let mut record = IndexMap::new();
            record.insert(dataset::COL_PATIENT_NOTE, instance.context.note_text.as_str());
            record.insert(dataset::COL_QUESTION, instance.question.question_text.as_str());
            Ok(Prompt {
                system: RELABEL_SYSTEM_PROMPT.to_string(),
                user: to_json(&record),
            })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("string maps always serialize")
}
