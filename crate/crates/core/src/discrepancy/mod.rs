//! Label comparison: symmetric discrepancy flagging, the benchmark grading
//! rule, expert agreement and aggregate validation metrics.

mod stats;

pub use stats::{
    bootstrap_ci, mean, smape, summarize, validation_table, Interval, StatsError, ValidationPair,
    ValidationSummary, DEFAULT_RESAMPLES,
};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{Instance, Label};

/// Flag threshold on `rel_err`.
pub const FLAG_THRESHOLD: Decimal = Decimal::from_parts(5, 0, 0, false, 2);
/// Datetime pairs further apart than this many days are flagged.
pub const DATETIME_FLAG_DAYS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    Numeric,
    NaMismatch,
    Datetime,
    BothNa,
    /// A real compared against a datetime. Cannot arise from a single
    /// ingested column; treated like an NA mismatch.
    TypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub unique_id: String,
    pub kind: DiscrepancyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_err: Option<Decimal>,
    /// Absolute separation in days, datetime kind only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_days: Option<f64>,
    pub flagged: bool,
}

/// `|a - b| / max(|a|, |b|)`, with `rel_err(0, 0) = 0`.
pub fn rel_err(a: Decimal, b: Decimal) -> Decimal {
    let scale = a.abs().max(b.abs());
    if scale.is_zero() {
        return Decimal::ZERO;
    }
    ((a - b).abs() / scale).normalize()
}

/// Exact threshold test `|a - b| > 0.05 * max(|a|, |b|)`, free of division
/// rounding.
fn exceeds_threshold(a: Decimal, b: Decimal) -> bool {
    (a - b).abs() > FLAG_THRESHOLD * a.abs().max(b.abs())
}

pub fn compare(unique_id: &str, a: &Label, b: &Label) -> DiscrepancyReport {
    let (kind, rel, delta_days, flagged) = match (a, b) {
        (Label::Real(x), Label::Real(y)) => {
            (DiscrepancyKind::Numeric, Some(rel_err(*x, *y)), None, exceeds_threshold(*x, *y))
        }
        (Label::Na, Label::Na) => (DiscrepancyKind::BothNa, None, None, false),
        (Label::Na, _) | (_, Label::Na) => (DiscrepancyKind::NaMismatch, None, None, true),
        (Label::Datetime(x), Label::Datetime(y)) => {
            let d = x.days_since(y).abs();
            (DiscrepancyKind::Datetime, None, Some(d), d > DATETIME_FLAG_DAYS)
        }
        _ => (DiscrepancyKind::TypeMismatch, None, None, true),
    };
    DiscrepancyReport {
        unique_id: unique_id.to_string(),
        kind,
        rel_err: rel,
        delta_days,
        flagged,
    }
}

/// Reports for every instance carrying both an original and a new label, in
/// input order. Returns the ids that were skipped for lack of a label.
pub fn diff_instances(instances: &[Instance]) -> (Vec<DiscrepancyReport>, Vec<String>) {
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for inst in instances {
        match (&inst.label_original, &inst.label_new) {
            (Some(a), Some(b)) => reports.push(compare(&inst.unique_id, a, b)),
            _ => skipped.push(inst.unique_id.clone()),
        }
    }
    (reports, skipped)
}

/// Benchmark grading: a real prediction is correct within ±5% of the gold
/// value, datetimes need an exact match and NA gold only accepts NA.
pub fn grade(prediction: &Label, gold: &Label) -> bool {
    match (prediction, gold) {
        (Label::Real(p), Label::Real(g)) => (p - g).abs() <= FLAG_THRESHOLD * g.abs(),
        (Label::Datetime(p), Label::Datetime(g)) => p == g,
        (Label::Na, Label::Na) => true,
        _ => false,
    }
}

/// Whether `candidate` matches the expert label closely enough to count as
/// agreement. Ordinal expert values below 20 allow a difference of one point;
/// larger ordinal values fall back to the ±5% rule.
pub fn agreement(expert: &Label, candidate: &Label, is_ordinal: bool) -> bool {
    match (expert, candidate) {
        (Label::Real(e), Label::Real(c)) => {
            if is_ordinal && *e < Decimal::from(20) {
                (e - c).abs() <= Decimal::ONE
            } else {
                (e - c).abs() <= FLAG_THRESHOLD * e.abs()
            }
        }
        (Label::Na, Label::Na) => true,
        (Label::Datetime(e), Label::Datetime(c)) => e == c,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_label, OutputKind};

    fn r(s: &str) -> Label {
        Label::Real(s.parse().unwrap())
    }

    fn dt(s: &str) -> Label {
        parse_label(s, OutputKind::Datetime).unwrap()
    }

    #[test]
    fn rel_err_examples() {
        let rep = compare("a", &r("10"), &r("10"));
        assert_eq!((rep.kind, rep.rel_err, rep.flagged), (DiscrepancyKind::Numeric, Some(Decimal::ZERO), false));
        let rep = compare("a", &r("100"), &r("90"));
        assert_eq!(rep.rel_err, Some("0.1".parse().unwrap()));
        assert!(rep.flagged);
        let rep = compare("a", &Label::Na, &r("5"));
        assert_eq!((rep.kind, rep.flagged), (DiscrepancyKind::NaMismatch, true));
        let rep = compare("a", &r("0"), &r("0"));
        assert_eq!((rep.rel_err, rep.flagged), (Some(Decimal::ZERO), false));
        assert_eq!(rel_err(Decimal::ZERO, Decimal::from(3)), Decimal::ONE);
        let rep = compare("a", &Label::Na, &Label::Na);
        assert_eq!((rep.kind, rep.flagged), (DiscrepancyKind::BothNa, false));
    }

    #[test]
    fn threshold_is_strict() {
        assert!(!compare("a", &r("100"), &r("95")).flagged);
        assert!(compare("a", &r("100"), &r("94.999")).flagged);
    }

    #[test]
    fn datetime_flagging() {
        assert!(!compare("a", &dt("2024-03-01"), &dt("2024-03-02")).flagged);
        let rep = compare("a", &dt("2024-03-01"), &dt("2024-03-03"));
        assert_eq!((rep.kind, rep.delta_days, rep.flagged), (DiscrepancyKind::Datetime, Some(2.0), true));
        assert!(compare("a", &dt("2024-03-01"), &r("3")).flagged);
    }

    #[test]
    fn grade_examples() {
        let gold = r("25.238");
        assert!(grade(&r("25.0"), &gold));
        assert!(!grade(&r("26.6"), &gold));
        assert!(grade(&Label::Na, &Label::Na));
        assert!(!grade(&Label::Na, &gold));
        assert!(grade(&dt("2024-01-02"), &dt("2024-01-02")));
        assert!(!grade(&dt("2024-01-02"), &dt("2024-01-03")));
    }

    #[test]
    fn agreement_examples() {
        assert!(agreement(&r("11"), &r("12"), true));
        assert!(!agreement(&r("11"), &r("13"), true));
        assert!(!agreement(&Label::Na, &r("7"), false));
        assert!(agreement(&Label::Na, &Label::Na, true));
        // Ordinal at or above 20 uses ±5%.
        assert!(agreement(&r("40"), &r("42"), true));
        assert!(!agreement(&r("40"), &r("43"), true));
        assert!(!agreement(&r("11"), &r("12"), false));
    }
}
