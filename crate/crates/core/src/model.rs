//! Core data model: patient contexts, score questions, feature values and the
//! three-valued label space (real | datetime | NA) shared by every stage.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use indexmap::IndexMap;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shape of the answer a score question expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Real,
    /// Integer-valued point score. Stored as a real label.
    Ordinal,
    Datetime,
}

impl OutputKind {
    /// Maps the source benchmark's "Output Type" column.
    pub fn from_output_type(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "decimal" | "real" | "float" => Some(Self::Real),
            "integer" | "ordinal" | "int" => Some(Self::Ordinal),
            "date" | "datetime" | "time" => Some(Self::Datetime),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::Ordinal => "ordinal",
            Self::Datetime => "datetime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientContext {
    pub note_text: String,
    pub note_id: String,
    pub source_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreQuestion {
    pub calculator_id: String,
    pub calculator_name: String,
    pub question_text: String,
    pub output_kind: OutputKind,
}

/// One extracted feature: a measured value with its unit, a code from the
/// slot's declared categorical set, or the undefined token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureValue {
    Real { value: Decimal, unit: String },
    Categorical { code: String },
    Na,
}

impl FeatureValue {
    pub fn real(value: impl Into<Decimal>, unit: &str) -> Self {
        Self::Real {
            value: value.into(),
            unit: unit.to_string(),
        }
    }

    /// Convenience for literal decimals such as `"48.0"`. Panics on bad input.
    pub fn real_str(value: &str, unit: &str) -> Self {
        Self::Real {
            value: value.parse().expect("decimal literal"),
            unit: unit.to_string(),
        }
    }

    pub fn code(code: &str) -> Self {
        Self::Categorical {
            code: code.to_string(),
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Self::Na)
    }
}

/// A calendar date with an optional time of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelDateTime {
    pub date: NaiveDate,
    pub time: Option<NaiveTime>,
}

impl LabelDateTime {
    pub fn date(date: NaiveDate) -> Self {
        Self { date, time: None }
    }

    fn as_naive(&self) -> NaiveDateTime {
        self.date.and_time(self.time.unwrap_or(NaiveTime::MIN))
    }

    /// Signed difference `self - other` in (fractional) days.
    pub fn days_since(&self, other: &LabelDateTime) -> f64 {
        let secs = (self.as_naive() - other.as_naive()).num_seconds();
        secs as f64 / 86_400.0
    }
}

impl fmt::Display for LabelDateTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.time {
            None => write!(f, "{}", self.date.format("%Y-%m-%d")),
            Some(t) => write!(f, "{}T{}", self.date.format("%Y-%m-%d"), t.format("%H:%M:%S")),
        }
    }
}

impl Serialize for LabelDateTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelDateTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        parse_datetime(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid datetime {raw:?}")))
    }
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d"];
const DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

fn parse_datetime(text: &str) -> Option<LabelDateTime> {
    let text = text.trim();
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(LabelDateTime {
                date: dt.date(),
                time: Some(dt.time()),
            });
        }
    }
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(text, fmt).ok())
        .map(LabelDateTime::date)
}

/// A score answer. `Na` is the explicit "cannot be computed" abstention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Label {
    Real(Decimal),
    Datetime(LabelDateTime),
    Na,
}

impl Label {
    pub fn real(value: impl Into<Decimal>) -> Self {
        Self::Real(value.into())
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Self::Na)
    }

    pub fn as_real(&self) -> Option<Decimal> {
        match self {
            Self::Real(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_label(self))
    }
}

/// Text form of a label as it appears inside an answer tag.
/// Reals are rendered at full stored precision.
pub fn render_label(label: &Label) -> String {
    match label {
        Label::Real(v) => v.to_string(),
        Label::Datetime(dt) => dt.to_string(),
        Label::Na => NA_TOKEN.to_string(),
    }
}

pub const NA_TOKEN: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {text:?} as a {kind} label")]
pub struct ParseFailure {
    pub text: String,
    pub kind: &'static str,
}

/// Parses the content extracted from an answer tag.
pub fn parse_label(text: &str, kind: OutputKind) -> Result<Label, ParseFailure> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case(NA_TOKEN) {
        return Ok(Label::Na);
    }
    let fail = || ParseFailure {
        text: text.to_string(),
        kind: kind.as_str(),
    };
    match kind {
        OutputKind::Real | OutputKind::Ordinal => parse_decimal(trimmed).map(Label::Real).ok_or_else(fail),
        OutputKind::Datetime => parse_datetime(trimmed).map(Label::Datetime).ok_or_else(fail),
    }
}

fn parse_decimal(text: &str) -> Option<Decimal> {
    if text.is_empty() {
        return None;
    }
    let body = text.strip_prefix('+').unwrap_or(text);
    if !body
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | 'e' | 'E' | '+'))
    {
        return None;
    }
    Decimal::from_str(body)
        .ok()
        .or_else(|| Decimal::from_scientific(body).ok())
}

/// How two labels of the same kind are judged equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatetimeRule {
    Exact,
    SameDay,
    WithinDays(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonPolicy {
    /// Relative tolerance, measured against the larger magnitude of the pair.
    pub real_rel_tol: Decimal,
    pub datetime: DatetimeRule,
}

impl Default for ComparisonPolicy {
    fn default() -> Self {
        Self {
            real_rel_tol: Decimal::new(5, 2),
            datetime: DatetimeRule::SameDay,
        }
    }
}

/// Symmetric label comparison. NA equals only NA; cross-kind pairs never match.
pub fn label_equal(a: &Label, b: &Label, policy: &ComparisonPolicy) -> bool {
    match (a, b) {
        (Label::Na, Label::Na) => true,
        (Label::Real(x), Label::Real(y)) => {
            let scale = x.abs().max(y.abs());
            (x - y).abs() <= policy.real_rel_tol * scale
        }
        (Label::Datetime(x), Label::Datetime(y)) => match policy.datetime {
            DatetimeRule::Exact => x == y,
            DatetimeRule::SameDay => x.date == y.date,
            DatetimeRule::WithinDays(n) => x.days_since(y).abs() <= f64::from(n),
        },
        _ => false,
    }
}

/// Source-dataset metadata: extracted features, explanation text, grading
/// limits and any columns this crate does not interpret.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_entities: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_limit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_limit: Option<String>,
    /// Verbatim text of the original answer column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_answer_text: Option<String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub extra: IndexMap<String, String>,
}

/// One benchmark row: a (context, question) pair, its candidate labels and
/// provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub unique_id: String,
    pub context: PatientContext,
    pub question: ScoreQuestion,
    #[serde(default)]
    pub label_original: Option<Label>,
    #[serde(default)]
    pub label_new: Option<Label>,
    #[serde(default)]
    label_expert: Option<Label>,
    #[serde(default)]
    pub metadata: InstanceMetadata,
}

impl Instance {
    pub fn new(unique_id: impl Into<String>, context: PatientContext, question: ScoreQuestion) -> Self {
        Self {
            unique_id: unique_id.into(),
            context,
            question,
            label_original: None,
            label_new: None,
            label_expert: None,
            metadata: InstanceMetadata::default(),
        }
    }

    pub fn with_original(mut self, label: Label) -> Self {
        self.label_original = Some(label);
        self
    }

    pub fn with_new(mut self, label: Label) -> Self {
        self.label_new = Some(label);
        self
    }

    /// Physician label; only the adjudication flow writes it.
    pub fn label_expert(&self) -> Option<&Label> {
        self.label_expert.as_ref()
    }

    pub(crate) fn set_label_expert(&mut self, label: Label) {
        self.label_expert = Some(label);
    }
}
