//! Benchmark stewardship for clinical score-computation datasets.
//!
//! The crate audits and relabels benchmark rows with ensembles of external
//! verifier agents, measures label discrepancies, routes the most contentious
//! rows to specialty-matched reviewers under single-blind adjudication, and
//! ships a small GRPO lab showing how reward labels change a trained policy.

pub mod blind;
pub mod calculators;
pub mod dataset;
pub mod grpo;
pub mod discrepancy;
pub mod model;
pub mod triage;
pub mod verifier;

pub use calculators::{CalcError, CalculatorRegistry, CalculatorSpec, FeatureVector, NaReason, Verdict};
pub use model::{
    label_equal, parse_label, render_label, ComparisonPolicy, FeatureValue, Instance, Label, OutputKind,
    PatientContext, ScoreQuestion,
};
