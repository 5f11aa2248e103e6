use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::env::{generate_tasks, TaskSpec};
use super::train::{train, LabelSource, TrainConfig};
use super::GrpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub corruption_fraction: f64,
    pub initial_accuracy: f64,
    pub clean_accuracy: f64,
    pub corrupted_accuracy: f64,
}

impl SeedResult {
    pub fn difference(&self) -> f64 {
        self.clean_accuracy - self.corrupted_accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSwapReport {
    pub per_seed: Vec<SeedResult>,
    pub mean_difference: f64,
    pub sd_difference: f64,
    pub t_stat: f64,
    pub df: f64,
    /// One-sided p-value for "clean beats corrupted".
    pub p_value: f64,
    pub significant_95: bool,
}

/// Trains both arms on each seed and tests the paired accuracy differences.
pub fn run_label_swap(config: &TrainConfig, spec: &TaskSpec, seeds: &[u64]) -> Result<LabelSwapReport, GrpoError> {
    if seeds.len() < 2 {
        return Err(GrpoError::InvalidConfig("paired test needs at least 2 seeds".into()));
    }
    config.validate()?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let tasks = generate_tasks(spec, seed);
            let cfg = TrainConfig { seed, ..config.clone() };
            let clean = train(&tasks, &cfg, LabelSource::Clean)?;
            let corrupted = train(&tasks, &cfg, LabelSource::Corrupted)?;
            Ok(SeedResult {
                seed,
                corruption_fraction: tasks.corruption_fraction(),
                initial_accuracy: clean.initial_accuracy,
                clean_accuracy: clean.final_accuracy,
                corrupted_accuracy: corrupted.final_accuracy,
            })
        })
        .collect::<Result<Vec<_>, GrpoError>>()?;

    let diffs: Vec<f64> = per_seed.iter().map(SeedResult::difference).collect();
    let (t_stat, p_value, mean, sd) = paired_t(&diffs);
    Ok(LabelSwapReport {
        per_seed,
        mean_difference: mean,
        sd_difference: sd,
        t_stat,
        df: (diffs.len() - 1) as f64,
        p_value,
        significant_95: p_value < 0.05,
    })
}

/// One-sided one-sample t-test of `mean > 0`. Returns (t, p, mean, sd).
fn paired_t(diffs: &[f64]) -> (f64, f64, f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        let t = if mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean) };
        return (t, p, mean, sd);
    }
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("df >= 1");
    (t, 1.0 - dist.cdf(t), mean, sd)
}
