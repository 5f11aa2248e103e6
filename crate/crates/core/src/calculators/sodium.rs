//! Sodium correction for hyperglycemia.

use super::{dec, round_score, Builder, Inputs, NaReason, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) fn entry() -> Builder {
    Builder {
        id: "sodium_correction",
        name: "Sodium Correction for Hyperglycemia",
        aliases: &["Corrected Sodium", "Sodium Correction"],
        slots: vec![
            SlotSpec::real("sodium", "Measured serum sodium?", "mEq/L", "90", "200").alt_unit("mmol/L", "1"),
            SlotSpec::real("glucose", "Serum glucose?", "mg/dL", "1", "5000").alt_unit("mmol/L", "18.016"),
        ],
        output_kind: OutputKind::Real,
        guideline_versions: &["hillier-1999", "katz-1973"],
        rule,
    }
}

fn rule(x: &Inputs<'_>, version: Option<&str>) -> Verdict {
    let glucose = x.real("glucose");
    if glucose < dec("70") {
        return Verdict::not_applicable(
            NaReason::PopulationMismatch,
            format!("glucose {glucose} mg/dL is hypoglycemic; a hyperglycemia correction does not apply"),
        );
    }
    let factor = match version {
        Some("katz-1973") => dec("0.016"),
        _ => dec("0.024"),
    };
    Verdict::computed(round_score(x.real("sodium") + factor * (glucose - dec("100"))))
}
