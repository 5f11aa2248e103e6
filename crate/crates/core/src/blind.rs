//! Machine check that a serialized artifact shown to a labeler (a relabel
//! prompt or a reviewer packet) leaks none of the stored candidate labels.

use crate::model::{render_label, Instance, Label};

/// Keys that must never reach a blinded labeler.
pub const FORBIDDEN_KEYS: &[&str] = &[
    "Ground Truth",
    "Relevant Entities",
    "Lower Limit",
    "Upper Limit",
    "label",
    "Label",
    "explanation",
];

/// Returns a description of every leak found in `text`.
///
/// The note, question and identifier values are removed first: a label value
/// may legitimately appear inside the note itself. The abstention token is not
/// treated as a leak because it is part of the answer protocol.
pub fn violations(text: &str, instance: &Instance) -> Vec<String> {
    let mut stripped = text.to_string();
    for long in [&instance.context.note_text, &instance.question.question_text] {
        if long.is_empty() {
            continue;
        }
        stripped = stripped.replace(long.as_str(), "");
        // Also as JSON-escaped text.
        if let Ok(escaped) = serde_json::to_string(long) {
            stripped = stripped.replace(escaped.trim_matches('"'), "");
        }
    }
    // Identifiers are short and may collide with digits of a label, so they
    // are only removed as whole JSON string values.
    for id in [
        &instance.unique_id,
        &instance.context.note_id,
        &instance.question.calculator_id,
        &instance.question.calculator_name,
    ] {
        if let Ok(quoted) = serde_json::to_string(id) {
            stripped = stripped.replace(&quoted, "\"\"");
        }
    }

    let mut found = Vec::new();
    for key in FORBIDDEN_KEYS {
        if stripped.contains(key) {
            found.push(format!("forbidden key {key:?}"));
        }
    }
    let labels = [
        instance.label_original.as_ref(),
        instance.label_new.as_ref(),
        instance.label_expert(),
    ];
    let mut needles: Vec<String> = labels
        .into_iter()
        .flatten()
        .filter(|l| !l.is_na())
        .map(render_label)
        .collect();
    if let Some(text) = &instance.metadata.original_answer_text {
        if !matches!(instance.label_original, Some(Label::Na)) {
            needles.push(text.trim().to_string());
        }
    }
    for needle in needles.into_iter().filter(|n| !n.is_empty()) {
        if stripped.contains(&needle) {
            found.push(format!("label value {needle:?}"));
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OutputKind, PatientContext, ScoreQuestion};

    fn instance() -> Instance {
        Instance::new(
            "7",
            PatientContext {
                note_text: "Weight 70 kg, height 175 cm.".into(),
                note_id: "n7".into(),
                source_tag: "t".into(),
            },
            ScoreQuestion {
                calculator_id: "bmi".into(),
                calculator_name: "Body Mass Index (BMI)".into(),
                question_text: "What is the BMI?".into(),
                output_kind: OutputKind::Real,
            },
        )
        .with_original(Label::Real("22.857".parse().unwrap()))
        .with_new(Label::Real("70".parse().unwrap()))
    }

    #[test]
    fn note_contents_are_not_leaks() {
        let inst = instance();
        let text = format!("{} / {}", inst.context.note_text, inst.question.question_text);
        assert!(violations(&text, &inst).is_empty());
    }

    #[test]
    fn detects_values_and_keys() {
        let inst = instance();
        assert_eq!(violations("answer is 22.857", &inst).len(), 1);
        assert_eq!(violations("{\"Ground Truth Answer\": 1}", &inst).len(), 1);
        assert_eq!(violations("value 70 outside the note", &inst).len(), 1);
    }
}
