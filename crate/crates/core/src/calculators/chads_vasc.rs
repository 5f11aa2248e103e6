//! CHA2DS2-VASc stroke risk score for atrial fibrillation.

use super::{dec, points, Builder, Inputs, SlotSpec, Verdict};
use crate::model::OutputKind;

const YES_NO: &[&str] = &["yes", "no"];

pub(super) fn entry() -> Builder {
    Builder {
        id: "cha2ds2_vasc",
        name: "CHA2DS2-VASc Score for Atrial Fibrillation Stroke Risk",
        aliases: &["CHA2DS2-VASc", "CHA2DS2-VASc Score", "CHA₂DS₂-VASc"],
        slots: vec![
            SlotSpec::real("age", "Patient's age?", "years", "0", "130"),
            SlotSpec::categorical("sex", "Patient's sex?", &["female", "male"]),
            SlotSpec::categorical("chf", "History of congestive heart failure?", YES_NO),
            SlotSpec::categorical("hypertension", "History of hypertension?", YES_NO),
            SlotSpec::categorical("stroke_tia", "Prior stroke, TIA or thromboembolism?", YES_NO),
            SlotSpec::categorical("vascular_disease", "Vascular disease history?", YES_NO),
            SlotSpec::categorical("diabetes", "History of diabetes?", YES_NO),
        ],
        output_kind: OutputKind::Ordinal,
        guideline_versions: &[],
        rule,
    }
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    let age = x.real("age");
    let age_points = if age >= dec("75") {
        2
    } else if age >= dec("65") {
        1
    } else {
        0
    };
    let total = age_points
        + u32::from(x.code("sex") == "female")
        + u32::from(x.flag("chf"))
        + u32::from(x.flag("hypertension"))
        + 2 * u32::from(x.flag("stroke_tia"))
        + u32::from(x.flag("vascular_disease"))
        + u32::from(x.flag("diabetes"));
    points(total)
}
