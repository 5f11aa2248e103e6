//! Deterministic aggregation stage: a registry of clinical calculators that
//! reduce a feature vector to a score label.
//!
//! Every calculator goes through the same gate before its rule runs: the
//! vector must belong to the calculator and match its slot types, any NA
//! feature yields `not_applicable(missing_feature)`, and every real feature is
//! converted to the slot's canonical unit and range-checked. Rules themselves
//! only see validated, canonical inputs.

mod bmi;
mod chads_vasc;
mod cockcroft_gault;
mod curb65;
mod gcs;
mod lace;
mod mme;
mod sodium;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeatureValue, Label, OutputKind};

pub use mme::{mme_methadone_multiplier, MmeGuideline};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalcError {
    #[error("unknown calculator {0:?}")]
    UnknownCalculator(String),
    #[error("calculator {calculator} expects {expected} features, got {got}")]
    ArityMismatch {
        calculator: String,
        expected: usize,
        got: usize,
    },
    #[error("feature {position} of {calculator} should be {expected:?}, got {got:?}")]
    SlotNameMismatch {
        calculator: String,
        position: usize,
        expected: String,
        got: String,
    },
    #[error("feature {slot:?} of {calculator} has the wrong value type")]
    SlotTypeMismatch { calculator: String, slot: String },
    #[error("code {code:?} is not declared for feature {slot:?}")]
    UnknownCode { slot: String, code: String },
    #[error("unit {unit:?} is not accepted for feature {slot:?}")]
    UnsupportedUnit { slot: String, unit: String },
    #[error("calculator {calculator} has no guideline version {version:?}")]
    UnknownGuidelineVersion { calculator: String, version: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Value domain of one feature slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SlotDomain {
    Real {
        unit: String,
        /// Accepted alternative units and the factor converting them to `unit`.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        alt_units: Vec<(String, Decimal)>,
        min: Decimal,
        max: Decimal,
        #[serde(default)]
        integer: bool,
    },
    Categorical {
        codes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    /// The sub-question an extractor answers to fill this slot.
    pub question: String,
    pub domain: SlotDomain,
}

impl SlotSpec {
    fn real(name: &str, question: &str, unit: &str, min: &str, max: &str) -> Self {
        Self {
            name: name.into(),
            question: question.into(),
            domain: SlotDomain::Real {
                unit: unit.into(),
                alt_units: Vec::new(),
                min: min.parse().expect("range literal"),
                max: max.parse().expect("range literal"),
                integer: false,
            },
        }
    }

    fn count(name: &str, question: &str, unit: &str, max: &str) -> Self {
        let mut s = Self::real(name, question, unit, "0", max);
        if let SlotDomain::Real { integer, .. } = &mut s.domain {
            *integer = true;
        }
        s
    }

    fn alt_unit(mut self, unit: &str, factor: &str) -> Self {
        if let SlotDomain::Real { alt_units, .. } = &mut self.domain {
            alt_units.push((unit.into(), factor.parse().expect("factor literal")));
        }
        self
    }

    fn categorical(name: &str, question: &str, codes: &[&str]) -> Self {
        Self {
            name: name.into(),
            question: question.into(),
            domain: SlotDomain::Categorical {
                codes: codes.iter().map(|c| c.to_string()).collect(),
            },
        }
    }
}

/// Public description of a calculator. Serializes to the registry manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalculatorSpec {
    pub calculator_id: String,
    pub name: String,
    /// Alternative display names used by source datasets.
    pub aliases: Vec<String>,
    pub arity: usize,
    pub slots: Vec<SlotSpec>,
    pub output_kind: OutputKind,
    pub is_ordinal: bool,
    pub guideline_versions: Vec<String>,
    pub default_guideline: Option<String>,
}

impl CalculatorSpec {
    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    fn matches_name(&self, name: &str) -> bool {
        let name = name.trim();
        self.calculator_id.eq_ignore_ascii_case(name)
            || self.name.eq_ignore_ascii_case(name)
            || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaReason {
    MissingFeature,
    OutOfRange,
    PopulationMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Computed { label: Label },
    NotApplicable { reason: NaReason, detail: String },
}

impl Verdict {
    pub fn computed(label: Label) -> Self {
        Self::Computed { label }
    }

    pub fn not_applicable(reason: NaReason, detail: impl Into<String>) -> Self {
        Self::NotApplicable {
            reason,
            detail: detail.into(),
        }
    }

    /// Collapses to the label space: `not_applicable` becomes NA.
    pub fn into_label(self) -> Label {
        match self {
            Self::Computed { label } => label,
            Self::NotApplicable { .. } => Label::Na,
        }
    }

    pub fn na_reason(&self) -> Option<NaReason> {
        match self {
            Self::NotApplicable { reason, .. } => Some(*reason),
            Self::Computed { .. } => None,
        }
    }
}

/// An ordered feature vector bound to one calculator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    calculator_id: String,
    features: Vec<(String, FeatureValue)>,
}

impl FeatureVector {
    /// Validates length, slot order and categorical codes against `spec`.
    pub fn new(spec: &CalculatorSpec, features: Vec<(String, FeatureValue)>) -> Result<Self, CalcError> {
        if features.len() != spec.arity {
            return Err(CalcError::ArityMismatch {
                calculator: spec.calculator_id.clone(),
                expected: spec.arity,
                got: features.len(),
            });
        }
        for (position, ((name, value), slot)) in features.iter().zip(&spec.slots).enumerate() {
            if name != &slot.name {
                return Err(CalcError::SlotNameMismatch {
                    calculator: spec.calculator_id.clone(),
                    position,
                    expected: slot.name.clone(),
                    got: name.clone(),
                });
            }
            if let (FeatureValue::Categorical { code }, SlotDomain::Categorical { codes }) = (value, &slot.domain) {
                if !codes.contains(code) {
                    return Err(CalcError::UnknownCode {
                        slot: name.clone(),
                        code: code.clone(),
                    });
                }
            }
        }
        Ok(Self {
            calculator_id: spec.calculator_id.clone(),
            features,
        })
    }

    pub fn calculator_id(&self) -> &str {
        &self.calculator_id
    }

    pub fn features(&self) -> &[(String, FeatureValue)] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Copy with the value at `index` replaced. Re-validates codes.
    pub fn with_value(&self, spec: &CalculatorSpec, index: usize, value: FeatureValue) -> Result<Self, CalcError> {
        let mut features = self.features.clone();
        features[index].1 = value;
        Self::new(spec, features)
    }
}

/// Validated inputs in canonical units, as seen by a calculator rule.
pub(crate) struct Inputs<'a> {
    values: BTreeMap<&'a str, Input<'a>>,
}

enum Input<'a> {
    Real(Decimal),
    Code(&'a str),
}

impl<'a> Inputs<'a> {
    pub(crate) fn real(&self, name: &str) -> Decimal {
        match self.values.get(name) {
            Some(Input::Real(v)) => *v,
            _ => panic!("slot {name} is not a validated real"),
        }
    }

    pub(crate) fn code(&self, name: &str) -> &'a str {
        match self.values.get(name) {
            Some(Input::Code(c)) => c,
            _ => panic!("slot {name} is not a validated code"),
        }
    }

    pub(crate) fn flag(&self, name: &str) -> bool {
        self.code(name) == "yes"
    }
}

type Rule = fn(&Inputs<'_>, Option<&str>) -> Verdict;

struct Entry {
    spec: CalculatorSpec,
    rule: Rule,
}

pub struct CalculatorRegistry {
    entries: Vec<Entry>,
}

struct Builder {
    id: &'static str,
    name: &'static str,
    aliases: &'static [&'static str],
    slots: Vec<SlotSpec>,
    output_kind: OutputKind,
    guideline_versions: &'static [&'static str],
    rule: Rule,
}

impl Builder {
    fn build(self) -> Entry {
        let spec = CalculatorSpec {
            calculator_id: self.id.into(),
            name: self.name.into(),
            aliases: self.aliases.iter().map(|a| a.to_string()).collect(),
            arity: self.slots.len(),
            slots: self.slots,
            output_kind: self.output_kind,
            is_ordinal: self.output_kind == OutputKind::Ordinal,
            guideline_versions: self.guideline_versions.iter().map(|v| v.to_string()).collect(),
            default_guideline: self.guideline_versions.first().map(|v| v.to_string()),
        };
        Entry { spec, rule: self.rule }
    }
}

impl CalculatorRegistry {
    /// Registry seeded with every shipped calculator.
    pub fn builtin() -> &'static CalculatorRegistry {
        static REGISTRY: OnceLock<CalculatorRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let entries = vec![
                lace::entry().build(),
                cockcroft_gault::entry().build(),
                bmi::entry().build(),
                gcs::entry().build(),
                curb65::entry().build(),
                chads_vasc::entry().build(),
                sodium::entry().build(),
                mme::entry().build(),
            ];
            CalculatorRegistry { entries }
        })
    }

    /// All calculator specs, in registration order.
    pub fn list(&self) -> Vec<&CalculatorSpec> {
        self.entries.iter().map(|e| &e.spec).collect()
    }

    pub fn get(&self, calculator_id: &str) -> Option<&CalculatorSpec> {
        self.entry(calculator_id).map(|e| &e.spec)
    }

    /// Resolves a dataset's calculator reference by id, name or alias.
    pub fn resolve(&self, reference: &str) -> Option<&CalculatorSpec> {
        self.entries.iter().map(|e| &e.spec).find(|s| s.matches_name(reference))
    }

    fn entry(&self, calculator_id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.spec.calculator_id == calculator_id)
    }

    /// Builds a validated feature vector for `calculator_id`.
    pub fn features(
        &self,
        calculator_id: &str,
        features: Vec<(&str, FeatureValue)>,
    ) -> Result<FeatureVector, CalcError> {
        let spec = self
            .get(calculator_id)
            .ok_or_else(|| CalcError::UnknownCalculator(calculator_id.into()))?;
        FeatureVector::new(spec, features.into_iter().map(|(n, v)| (n.to_string(), v)).collect())
    }

    /// Applies the calculator's rule. Pure: equal inputs give equal verdicts.
    pub fn compute(
        &self,
        calculator_id: &str,
        features: &FeatureVector,
        guideline_version: Option<&str>,
    ) -> Result<Verdict, CalcError> {
        let entry = self
            .entry(calculator_id)
            .ok_or_else(|| CalcError::UnknownCalculator(calculator_id.into()))?;
        let spec = &entry.spec;
        if features.calculator_id != spec.calculator_id || features.len() != spec.arity {
            return Err(CalcError::ArityMismatch {
                calculator: spec.calculator_id.clone(),
                expected: spec.arity,
                got: features.len(),
            });
        }
        if let Some(v) = guideline_version {
            if !spec.guideline_versions.iter().any(|known| known == v) {
                return Err(CalcError::UnknownGuidelineVersion {
                    calculator: spec.calculator_id.clone(),
                    version: v.into(),
                });
            }
        }
        let version = guideline_version.or(spec.default_guideline.as_deref());

        // Type and unit checks come first so malformed vectors are errors
        // rather than silently absorbed by the NA rule.
        let mut values = BTreeMap::new();
        let mut missing = Vec::new();
        let mut out_of_range = Vec::new();
        for ((name, value), slot) in features.features.iter().zip(&spec.slots) {
            match (value, &slot.domain) {
                (FeatureValue::Na, _) => missing.push(name.as_str()),
                (FeatureValue::Categorical { code }, SlotDomain::Categorical { .. }) => {
                    values.insert(name.as_str(), Input::Code(code.as_str()));
                }
                (
                    FeatureValue::Real { value, unit },
                    SlotDomain::Real {
                        unit: canonical,
                        alt_units,
                        min,
                        max,
                        integer,
                    },
                ) => {
                    let factor = if unit == canonical {
                        Decimal::ONE
                    } else {
                        alt_units
                            .iter()
                            .find(|(u, _)| u == unit)
                            .map(|(_, f)| *f)
                            .ok_or_else(|| CalcError::UnsupportedUnit {
                                slot: name.clone(),
                                unit: unit.clone(),
                            })?
                    };
                    let v = value * factor;
                    if v < *min || v > *max || (*integer && !v.fract().is_zero()) {
                        out_of_range.push(format!("{name}={v} {canonical}"));
                    }
                    values.insert(name.as_str(), Input::Real(v));
                }
                _ => {
                    return Err(CalcError::SlotTypeMismatch {
                        calculator: spec.calculator_id.clone(),
                        slot: name.clone(),
                    })
                }
            }
        }
        if !missing.is_empty() {
            return Ok(Verdict::not_applicable(
                NaReason::MissingFeature,
                format!("missing: {}", missing.join(", ")),
            ));
        }
        if !out_of_range.is_empty() {
            return Ok(Verdict::not_applicable(
                NaReason::OutOfRange,
                format!("out of range: {}", out_of_range.join(", ")),
            ));
        }
        Ok((entry.rule)(&Inputs { values }, version))
    }

    /// Human-auditable manifest of every calculator (JSON).
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({ "calculators": self.list() })
    }
}

/// Real-valued scores are reported to three decimals.
pub(crate) fn round_score(v: Decimal) -> Label {
    Label::Real(v.round_dp_with_strategy(3, RoundingStrategy::MidpointAwayFromZero).normalize())
}

pub(crate) fn points(total: u32) -> Verdict {
    Verdict::computed(Label::real(total))
}

pub(crate) fn dec(s: &str) -> Decimal {
    s.parse().expect("decimal literal")
}
