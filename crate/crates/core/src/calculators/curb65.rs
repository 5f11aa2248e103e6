//! CURB-65 pneumonia severity score.

use super::{dec, points, Builder, Inputs, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) fn entry() -> Builder {
    Builder {
        id: "curb65",
        name: "CURB-65 Score for Pneumonia Severity",
        aliases: &["CURB-65", "CURB65"],
        slots: vec![
            SlotSpec::categorical("confusion", "Is the patient confused?", &["yes", "no"]),
            // urea mmol/L -> BUN mg/dL
            SlotSpec::real("bun", "Blood urea nitrogen?", "mg/dL", "0", "300").alt_unit("mmol/L", "2.8"),
            SlotSpec::real("respiratory_rate", "Respiratory rate?", "breaths/min", "0", "100"),
            SlotSpec::real("systolic_bp", "Systolic blood pressure?", "mmHg", "0", "300"),
            SlotSpec::real("diastolic_bp", "Diastolic blood pressure?", "mmHg", "0", "250"),
            SlotSpec::real("age", "Patient's age?", "years", "0", "130"),
        ],
        output_kind: OutputKind::Ordinal,
        guideline_versions: &[],
        rule,
    }
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    let criteria = [
        x.flag("confusion"),
        x.real("bun") > dec("19"),
        x.real("respiratory_rate") >= dec("30"),
        x.real("systolic_bp") < dec("90") || x.real("diastolic_bp") <= dec("60"),
        x.real("age") >= dec("65"),
    ];
    points(criteria.iter().filter(|c| **c).count() as u32)
}
