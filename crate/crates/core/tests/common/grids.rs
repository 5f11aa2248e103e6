//! Calculator oracles shared by the calculator tests and the acceptance run.

use std::collections::HashMap;

use labelsteward::{CalculatorRegistry, FeatureValue, Label, Verdict};
use rust_decimal::Decimal;

pub fn reg() -> &'static CalculatorRegistry {
    CalculatorRegistry::builtin()
}

pub fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

pub fn score(id: &str, features: Vec<(&str, FeatureValue)>) -> Verdict {
    let fv = reg().features(id, features).unwrap();
    reg().compute(id, &fv, None).unwrap()
}

pub fn total(v: &Verdict) -> u32 {
    match v {
        Verdict::Computed { label: Label::Real(x) } => x.to_string().parse().unwrap(),
        other => panic!("expected a computed score, got {other:?}"),
    }
}

pub fn lace(los: u32, acuity: &str, cci: u32, ed: u32) -> Vec<(&'static str, FeatureValue)> {
    vec![
        ("length_of_stay", FeatureValue::real(los, "days")),
        ("acuity", FeatureValue::code(acuity)),
        ("charlson_index", FeatureValue::real(cci, "points")),
        ("ed_visits", FeatureValue::real(ed, "visits")),
    ]
}

pub fn lace_golden() {
    // 4 days -> 4, emergent -> 3, CCI 2 -> 2, two ED visits -> 2
    assert_eq!(score("lace", lace(4, "emergent", 2, 2)), Verdict::computed(Label::real(11)));
}

pub fn cockcroft_gault_golden() {
    // Underweight (BMI 18.07) so the actual 48 kg is used:
    // ((140 - 87) * 48.0 * 1) / (1.4 * 72) = 25.238
    let v = score(
        "cockcroft_gault",
        vec![
            ("sex", FeatureValue::code("male")),
            ("age", FeatureValue::real(87, "years")),
            ("weight", FeatureValue::real_str("48.0", "kg")),
            ("height", FeatureValue::real_str("163.0", "cm")),
            ("creatinine", FeatureValue::real_str("1.4", "mg/dL")),
        ],
    );
    assert_eq!(v, Verdict::computed(Label::Real(dec("25.238"))));
    let x = v.into_label().as_real().unwrap();
    assert!(x >= dec("23.9761") && x <= dec("26.4999"));
}

pub fn bmi_golden() {
    // 70 / (1.75 * 1.75) = 22.857
    let v = score("bmi", vec![("weight", FeatureValue::real(70, "kg")), ("height", FeatureValue::real(175, "cm"))]);
    assert_eq!(v, Verdict::computed(Label::Real(dec("22.857"))));
}

// ---- exhaustive grids against transcribed lookup tables ----

const LACE_LOS: [u32; 21] = [0, 1, 2, 3, 4, 4, 4, 5, 5, 5, 5, 5, 5, 5, 7, 7, 7, 7, 7, 7, 7];
const LACE_CCI: [u32; 9] = [0, 1, 2, 3, 5, 5, 5, 5, 5];
const LACE_ED: [u32; 9] = [0, 1, 2, 3, 4, 4, 4, 4, 4];

fn lace_grid() -> Vec<((u32, &'static str, u32, u32), [u32; 4])> {
    let mut out = Vec::new();
    for los in 0..21u32 {
        for acuity in ["emergent", "elective"] {
            for cci in 0..9u32 {
                for ed in 0..9u32 {
                    let a = if acuity == "emergent" { 3 } else { 0 };
                    out.push((
                        (los, acuity, cci, ed),
                        [LACE_LOS[los as usize], a, LACE_CCI[cci as usize], LACE_ED[ed as usize]],
                    ));
                }
            }
        }
    }
    out
}

pub fn lace_matches_oracle_and_is_monotone() {
    let grid = lace_grid();
    let mut totals = HashMap::new();
    for ((los, acuity, cci, ed), parts) in &grid {
        let got = total(&score("lace", lace(*los, acuity, *cci, *ed)));
        assert_eq!(got, parts.iter().sum::<u32>(), "LACE({los},{acuity},{cci},{ed})");
        totals.insert((*los, *acuity, *cci, *ed), (got, *parts));
    }
    check_monotone(&totals.values().copied().collect::<Vec<_>>());
}

/// For points vectors differing in a single component, more component points
/// never means a lower total.
pub fn check_monotone<const N: usize>(rows: &[(u32, [u32; N])]) {
    let mut by_others: HashMap<(usize, Vec<u32>), Vec<(u32, u32)>> = HashMap::new();
    for (total, parts) in rows {
        for k in 0..N {
            let mut others = parts.to_vec();
            others[k] = u32::MAX;
            by_others.entry((k, others)).or_default().push((parts[k], *total));
        }
    }
    for (_, mut col) in by_others {
        col.sort();
        for w in col.windows(2) {
            assert!(w[0].1 <= w[1].1, "monotonicity violated: {w:?}");
        }
    }
}

const EYE: [(&str, u32); 4] = [("none", 1), ("to_pain", 2), ("to_sound", 3), ("spontaneous", 4)];
const VERBAL: [(&str, u32); 5] = [
    ("none", 1),
    ("incomprehensible_sounds", 2),
    ("inappropriate_words", 3),
    ("confused", 4),
    ("oriented", 5),
];
const MOTOR: [(&str, u32); 6] = [
    ("none", 1),
    ("extension", 2),
    ("abnormal_flexion", 3),
    ("withdrawal", 4),
    ("localizes", 5),
    ("obeys", 6),
];

pub fn gcs_matches_oracle_and_counts_each_subscore_once() {
    let mut rows = Vec::new();
    for (e, ep) in EYE {
        for (v, vp) in VERBAL {
            for (m, mp) in MOTOR {
                let got = total(&score(
                    "gcs",
                    vec![("eye", FeatureValue::code(e)), ("verbal", FeatureValue::code(v)), ("motor", FeatureValue::code(m))],
                ));
                assert_eq!(got, ep + vp + mp, "GCS({e},{v},{m})");
                assert!((3..=15).contains(&got));
                rows.push((got, [ep, vp, mp]));
            }
        }
    }
    assert_eq!(rows.len(), 120);
    check_monotone(&rows);
}

// Each grid value paired with whether it meets its criterion.
const CURB_BUN: [(&str, u32); 5] = [("5", 0), ("19", 0), ("19.01", 1), ("20", 1), ("60", 1)];
const CURB_RR: [(&str, u32); 4] = [("12", 0), ("29", 0), ("30", 1), ("45", 1)];
const CURB_SBP: [(&str, bool); 4] = [("70", true), ("89", true), ("90", false), ("120", false)];
const CURB_DBP: [(&str, bool); 4] = [("50", true), ("60", true), ("61", false), ("80", false)];
const CURB_AGE: [(&str, u32); 4] = [("30", 0), ("64", 0), ("65", 1), ("90", 1)];

pub fn curb65_matches_oracle_and_is_monotone() {
    let mut rows = Vec::new();
    for (conf, cp) in [("yes", 1u32), ("no", 0)] {
        for (bun, bp) in CURB_BUN {
            for (rr, rp) in CURB_RR {
                for (sbp, sl) in CURB_SBP {
                    for (dbp, dl) in CURB_DBP {
                        for (age, ap) in CURB_AGE {
                            let bpp = u32::from(sl || dl);
                            let got = total(&score(
                                "curb65",
                                vec![
                                    ("confusion", FeatureValue::code(conf)),
                                    ("bun", FeatureValue::real_str(bun, "mg/dL")),
                                    ("respiratory_rate", FeatureValue::real_str(rr, "breaths/min")),
                                    ("systolic_bp", FeatureValue::real_str(sbp, "mmHg")),
                                    ("diastolic_bp", FeatureValue::real_str(dbp, "mmHg")),
                                    ("age", FeatureValue::real_str(age, "years")),
                                ],
                            ));
                            let parts = [cp, bp, rp, bpp, ap];
                            assert_eq!(got, parts.iter().sum::<u32>(), "CURB-65({conf},{bun},{rr},{sbp},{dbp},{age})");
                            rows.push((got, parts));
                        }
                    }
                }
            }
        }
    }
    check_monotone(&rows);
}

const CHADS_AGE: [(u32, u32); 6] = [(40, 0), (64, 0), (65, 1), (74, 1), (75, 2), (90, 2)];

pub fn cha2ds2_vasc_matches_oracle_and_is_monotone() {
    let yn = [("yes", 1u32), ("no", 0)];
    let mut rows = Vec::new();
    for (age, agep) in CHADS_AGE {
        for (sex, sp) in [("female", 1u32), ("male", 0)] {
            for (chf, cp) in yn {
                for (htn, hp) in yn {
                    for (stroke, stp) in [("yes", 2u32), ("no", 0)] {
                        for (vasc, vp) in yn {
                            for (dm, dp) in yn {
                                let got = total(&score(
                                    "cha2ds2_vasc",
                                    vec![
                                        ("age", FeatureValue::real(age, "years")),
                                        ("sex", FeatureValue::code(sex)),
                                        ("chf", FeatureValue::code(chf)),
                                        ("hypertension", FeatureValue::code(htn)),
                                        ("stroke_tia", FeatureValue::code(stroke)),
                                        ("vascular_disease", FeatureValue::code(vasc)),
                                        ("diabetes", FeatureValue::code(dm)),
                                    ],
                                ));
                                let parts = [agep, sp, cp, hp, stp, vp, dp];
                                assert_eq!(got, parts.iter().sum::<u32>());
                                rows.push((got, parts));
                            }
                        }
                    }
                }
            }
        }
    }
    assert_eq!(rows.len(), 6 * 64);
    check_monotone(&rows);
}
