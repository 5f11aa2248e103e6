//! Glasgow Coma Scale.

use super::{points, Builder, Inputs, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) const EYE: &[&str] = &["none", "to_pain", "to_sound", "spontaneous"];
pub(super) const VERBAL: &[&str] = &["none", "incomprehensible_sounds", "inappropriate_words", "confused", "oriented"];
pub(super) const MOTOR: &[&str] = &["none", "extension", "abnormal_flexion", "withdrawal", "localizes", "obeys"];

pub(super) fn entry() -> Builder {
    Builder {
        id: "gcs",
        name: "Glasgow Coma Scale",
        aliases: &["Glasgow Coma Score", "Glasgow Coma Scale (GCS)", "Glasgow Coma Scale/Score (GCS)", "GCS"],
        slots: vec![
            SlotSpec::categorical("eye", "Best eye response?", EYE),
            SlotSpec::categorical("verbal", "Best verbal response?", VERBAL),
            SlotSpec::categorical("motor", "Best motor response?", MOTOR),
        ],
        output_kind: OutputKind::Ordinal,
        guideline_versions: &[],
        rule,
    }
}

/// Position in the ordered response list, 1-based.
fn subscore(scale: &[&str], code: &str) -> u32 {
    scale.iter().position(|c| *c == code).map(|i| i as u32 + 1).expect("validated code")
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    // Each subscore enters the sum exactly once.
    let eye = subscore(EYE, x.code("eye"));
    let verbal = subscore(VERBAL, x.code("verbal"));
    let motor = subscore(MOTOR, x.code("motor"));
    points(eye + verbal + motor)
}
