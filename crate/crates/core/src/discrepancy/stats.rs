use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agreement;
use crate::model::Label;

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no samples")]
    EmptyInput,
    #[error("negative value {0} (scores must be nonnegative)")]
    NegativeInput(f64),
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
}

pub fn mean(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Symmetric mean absolute percentage error over `(expert, candidate)` pairs,
/// in percent. A `(0, 0)` pair contributes zero.
pub fn smape(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut total = 0.0;
    for &(y, yhat) in pairs {
        for v in [y, yhat] {
            if v < 0.0 {
                return Err(StatsError::NegativeInput(v));
            }
        }
        let denom = y + yhat;
        if denom > 0.0 {
            total += 2.0 * (y - yhat).abs() / denom;
        }
    }
    Ok(100.0 * total / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Percentile bootstrap interval for `statistic`.
///
/// Resample `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
/// result does not depend on how the resamples are split across threads.
pub fn bootstrap_ci<T, F>(
    statistic: F,
    samples: &[T],
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Interval, StatsError>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    if samples.is_empty() || n_resamples == 0 {
        return Err(StatsError::EmptyInput);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let n = samples.len();
    let mut stats: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let resample: Vec<T> = (0..n).map(|_| samples[rng.random_range(0..n)].clone()).collect();
            statistic(&resample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(Interval {
        lo: quantile(&stats, tail),
        hi: quantile(&stats, 1.0 - tail),
    })
}

/// One adjudicated instance: the expert label and the candidate it is scored
/// against (`None` when the candidate set has no label for the row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPair {
    pub unique_id: String,
    pub expert: Label,
    pub candidate: Option<Label>,
    pub is_ordinal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub n_instances: usize,
    /// Rows where both expert and candidate are real-valued; sMAPE runs over
    /// these only.
    pub n_numeric_pairs: usize,
    pub smape_percent: Option<f64>,
    pub smape_ci: Option<Interval>,
    pub agreement_count: usize,
    pub agreement_fraction: f64,
    pub agreement_ci: Interval,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

pub fn summarize(
    pairs: &[ValidationPair],
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<ValidationSummary, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let agrees: Vec<f64> = pairs
        .iter()
        .map(|p| match &p.candidate {
            Some(c) if agreement(&p.expert, c, p.is_ordinal) => 1.0,
            _ => 0.0,
        })
        .collect();
    let numeric: Vec<(f64, f64)> = pairs
        .iter()
        .filter_map(|p| match (&p.expert, &p.candidate) {
            (Label::Real(e), Some(Label::Real(c))) => Some((e.to_f64()?, c.to_f64()?)),
            _ => None,
        })
        .collect();
    let agreement_count = agrees.iter().filter(|&&a| a > 0.0).count();
    let agreement_fraction = agreement_count as f64 / pairs.len() as f64;
    let agreement_ci = bootstrap_ci(|xs| mean(xs).unwrap_or(0.0), &agrees, n_resamples, level, seed)?;
    let (smape_percent, smape_ci) = if numeric.is_empty() {
        (None, None)
    } else {
        let point = smape(&numeric)?;
        let ci = bootstrap_ci(|xs| smape(xs).unwrap_or(0.0), &numeric, n_resamples, level, seed)?;
        (Some(point), Some(ci))
    };
    Ok(ValidationSummary {
        n_instances: pairs.len(),
        n_numeric_pairs: numeric.len(),
        smape_percent,
        smape_ci,
        agreement_count,
        agreement_fraction,
        agreement_ci,
        level,
        n_resamples,
        seed,
    })
}

/// Plain-text table with one column per label set.
pub fn validation_table(columns: &[(&str, &ValidationSummary)]) -> String {
    let cell_smape = |s: &ValidationSummary| match (s.smape_percent, s.smape_ci) {
        (Some(v), Some(ci)) => format!("{v:.1} [{:.1}, {:.1}]", ci.lo, ci.hi),
        _ => "n/a".to_string(),
    };
    let cell_agree = |s: &ValidationSummary| {
        let n = s.n_instances as f64;
        format!(
            "{}/{} [{:.0}, {:.0}]",
            s.agreement_count,
            s.n_instances,
            s.agreement_ci.lo * n,
            s.agreement_ci.hi * n
        )
    };
    let cell_pairs = |s: &ValidationSummary| s.n_numeric_pairs.to_string();
    let rows: [(&str, &dyn Fn(&ValidationSummary) -> String); 3] = [
        ("sMAPE (%)", &cell_smape),
        ("Agreement", &cell_agree),
        ("Numeric pairs", &cell_pairs),
    ];
    let mut widths: Vec<usize> = columns.iter().map(|(name, _)| name.chars().count()).collect();
    for (_, f) in &rows {
        for (w, (_, s)) in widths.iter_mut().zip(columns) {
            *w = (*w).max(f(s).chars().count());
        }
    }
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for ((name, _), w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {name:>w$}");
    }
    out.push('\n');
    for (label, f) in &rows {
        let _ = write!(out, "{label:label_w$}");
        for ((_, s), w) in columns.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", f(s));
        }
        out.push('\n');
    }
    let level = columns.first().map(|(_, s)| s.level * 100.0).unwrap_or(95.0);
    let _ = writeln!(out, "Brackets: {level:.0}% percentile bootstrap intervals.");
    out
}
