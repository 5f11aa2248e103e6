//! Creatinine clearance by the Cockcroft-Gault equation.
//!
//! Weight selection follows the benchmark question text: underweight patients
//! use actual weight, normal-BMI patients use min(ideal, actual), and
//! overweight or obese patients use adjusted body weight.

use rust_decimal::Decimal;

use super::bmi::{bmi, height_slot, weight_slot};
use super::{dec, round_score, Builder, Inputs, NaReason, SlotSpec, Verdict};
use crate::model::OutputKind;

pub(super) fn entry() -> Builder {
    Builder {
        id: "cockcroft_gault",
        name: "Creatinine Clearance (Cockcroft-Gault Equation)",
        aliases: &["Cockcroft-Gault", "Creatinine Clearance", "CrCl (Cockcroft-Gault)"],
        slots: vec![
            SlotSpec::categorical("sex", "Patient's sex?", &["male", "female"]),
            SlotSpec::real("age", "Patient's age?", "years", "0", "130"),
            weight_slot(),
            height_slot(),
            SlotSpec::real("creatinine", "Serum creatinine?", "mg/dL", "0.05", "40")
                .alt_unit("umol/L", "0.0113122171945701357466063348")
                .alt_unit("µmol/L", "0.0113122171945701357466063348"),
        ],
        output_kind: OutputKind::Real,
        guideline_versions: &[],
        rule,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum WeightBasis {
    Actual,
    MinIdealActual,
    Adjusted,
}

pub(crate) fn weight_basis(bmi: Decimal) -> WeightBasis {
    if bmi < dec("18.5") {
        WeightBasis::Actual
    } else if bmi < dec("25") {
        WeightBasis::MinIdealActual
    } else {
        WeightBasis::Adjusted
    }
}

/// Devine ideal body weight in kg.
pub(crate) fn ideal_body_weight(male: bool, height_cm: Decimal) -> Decimal {
    let inches = height_cm / dec("2.54");
    let base = if male { dec("50") } else { dec("45.5") };
    base + dec("2.3") * (inches - dec("60"))
}

fn rule(x: &Inputs<'_>, _: Option<&str>) -> Verdict {
    let age = x.real("age");
    if age < dec("18") {
        return Verdict::not_applicable(NaReason::PopulationMismatch, "Cockcroft-Gault is an adult equation");
    }
    let male = x.code("sex") == "male";
    let weight = x.real("weight");
    let height = x.real("height");
    let ibw = ideal_body_weight(male, height);
    let used = match weight_basis(bmi(weight, height)) {
        WeightBasis::Actual => weight,
        WeightBasis::MinIdealActual => ibw.min(weight),
        WeightBasis::Adjusted => ibw + dec("0.4") * (weight - ibw),
    };
    let sex_coefficient = if male { Decimal::ONE } else { dec("0.85") };
    let crcl = (dec("140") - age) * used * sex_coefficient / (x.real("creatinine") * dec("72"));
    Verdict::computed(round_score(crcl))
}
