//! Body mass index.

use rust_decimal::Decimal;

use super::{dec, round_score, Builder, Inputs, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) fn entry() -> Builder {
    Builder {
        id: "bmi",
        name: "Body Mass Index (BMI)",
        aliases: &["BMI", "Body Mass Index"],
        slots: vec![weight_slot(), height_slot()],
        output_kind: OutputKind::Real,
        guideline_versions: &[],
        rule,
    }
}

pub(super) fn weight_slot() -> SlotSpec {
    SlotSpec::real("weight", "Patient's weight?", "kg", "0.5", "700")
        .alt_unit("lb", "0.45359237")
        .alt_unit("g", "0.001")
}

pub(super) fn height_slot() -> SlotSpec {
    SlotSpec::real("height", "Patient's height?", "cm", "20", "280")
        .alt_unit("m", "100")
        .alt_unit("in", "2.54")
}

/// kg / m^2, unrounded.
pub(super) fn bmi(weight_kg: Decimal, height_cm: Decimal) -> Decimal {
    let m = height_cm / dec("100");
    weight_kg / (m * m)
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    Verdict::computed(round_score(bmi(x.real("weight"), x.real("height"))))
}
