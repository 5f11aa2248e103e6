//! LACE index for 30-day readmission or death.

use super::{points, Builder, Inputs, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) fn entry() -> Builder {
    Builder {
        id: "lace",
        name: "LACE Index for Readmission",
        aliases: &["LACE", "LACE Index", "LACE Score"],
        slots: vec![
            SlotSpec::count("length_of_stay", "Patient's length of stay?", "days", "365"),
            SlotSpec::categorical("acuity", "Acuity of admission?", &["emergent", "elective"]),
            SlotSpec::count("charlson_index", "Charlson Comorbidity Index?", "points", "37"),
            SlotSpec::count("ed_visits", "Number of ED visits in the last 6 months?", "visits", "100"),
        ],
        output_kind: OutputKind::Ordinal,
        guideline_versions: &[],
        rule,
    }
}

fn stay_points(days: u32) -> u32 {
    match days {
        0 => 0,
        1..=3 => days,
        4..=6 => 4,
        7..=13 => 5,
        _ => 7,
    }
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    let los = x.real("length_of_stay").try_into().unwrap_or(u32::MAX);
    let cci: u32 = x.real("charlson_index").try_into().unwrap_or(u32::MAX);
    let ed: u32 = x.real("ed_visits").try_into().unwrap_or(u32::MAX);
    let acuity = if x.code("acuity") == "emergent" { 3 } else { 0 };
    let comorbidity = if cci >= 4 { 5 } else { cci };
    let visits = ed.min(4);
    points(stay_points(los) + acuity + comorbidity + visits)
}
