//! TOML configuration. Every value can also be given as a flag; flags win
//! over the file and the file wins over built-in defaults.

use std::path::Path;

use labelsteward::grpo::{CorruptionMode, TaskSpec, TrainConfig};
use labelsteward::triage::ValidationConfig;
use labelsteward::verifier::VerifierEndpoint;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub verifier: Option<VerifierEndpoint>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub triage: TriageSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub grpo: GrpoSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub concurrency: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriageSection {
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub n_resamples: Option<usize>,
    pub level: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrpoSection {
    /// "desk" (default) or "full".
    pub profile: Option<String>,
    pub group_size: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub kl_coef: Option<f64>,
    pub format_weight: Option<f64>,
    pub answer_tolerance: Option<f64>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<usize>,
    pub steps: Option<usize>,
    pub final_window: Option<usize>,
    pub seed: Option<u64>,
    pub families: Option<usize>,
    pub train_per_family: Option<usize>,
    pub test_per_family: Option<usize>,
    pub unanswerable_rate: Option<f64>,
    pub corruption_rate: Option<f64>,
    pub corruption: Option<CorruptionMode>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub bind: Option<String>,
    /// Environment variable holding the API bearer token.
    pub token_env: Option<String>,
    #[serde(default)]
    pub cors_origins: Vec<String>,
}

pub const DEFAULT_CONCURRENCY: usize = 8;
pub const DEFAULT_QUEUE_LIMIT: usize = 50;
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_TOKEN_ENV: &str = "LABELSTEWARD_API_TOKEN";

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn validation(&self, n_resamples: Option<usize>, level: Option<f64>, seed: Option<u64>) -> CliResult<ValidationConfig> {
        let d = ValidationConfig::default();
        let v = ValidationConfig {
            n_resamples: n_resamples.or(self.validation.n_resamples).unwrap_or(d.n_resamples),
            level: level.or(self.validation.level).unwrap_or(d.level),
            seed: seed.or(self.validation.seed).unwrap_or(d.seed),
        };
        if v.n_resamples == 0 || !(v.level > 0.0 && v.level < 1.0) {
            return Err(usage("validation needs n_resamples >= 1 and 0 < level < 1"));
        }
        Ok(v)
    }
}

/// Flag overrides for the GRPO settings.
#[derive(Debug, Clone, Default)]
pub struct GrpoOverrides {
    pub profile: Option<String>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub learning_rate: Option<f64>,
    pub minibatch_size: Option<usize>,
    pub group_size: Option<usize>,
    pub corruption: Option<CorruptionMode>,
    pub corruption_rate: Option<f64>,
}

impl GrpoSection {
    pub fn resolve(&self, flags: &GrpoOverrides) -> CliResult<(TrainConfig, TaskSpec)> {
        let profile = flags.profile.clone().or(self.profile.clone()).unwrap_or_else(|| "desk".into());
        let base = match profile.as_str() {
            "desk" => TrainConfig::desk_scale(),
            "full" => TrainConfig::default(),
            other => return Err(usage(format!("unknown GRPO profile {other:?} (expected desk or full)"))),
        };
        let train = TrainConfig {
            group_size: flags.group_size.or(self.group_size).unwrap_or(base.group_size),
            minibatch_size: flags.minibatch_size.or(self.minibatch_size).unwrap_or(base.minibatch_size),
            learning_rate: flags.learning_rate.or(self.learning_rate).unwrap_or(base.learning_rate),
            kl_coef: self.kl_coef.unwrap_or(base.kl_coef),
            format_weight: self.format_weight.unwrap_or(base.format_weight),
            answer_tolerance: self.answer_tolerance.unwrap_or(base.answer_tolerance),
            temperature: self.temperature.unwrap_or(base.temperature),
            max_tokens: self.max_tokens.unwrap_or(base.max_tokens),
            steps: flags.steps.or(self.steps).unwrap_or(base.steps),
            final_window: self.final_window.unwrap_or(base.final_window),
            seed: flags.seed.or(self.seed).unwrap_or(base.seed),
        };
        train.validate().map_err(usage)?;
        let d = TaskSpec::default();
        let spec = TaskSpec {
            families: self.families.unwrap_or(d.families),
            train_per_family: self.train_per_family.unwrap_or(d.train_per_family),
            test_per_family: self.test_per_family.unwrap_or(d.test_per_family),
            unanswerable_rate: self.unanswerable_rate.unwrap_or(d.unanswerable_rate),
            corruption_rate: flags.corruption_rate.or(self.corruption_rate).unwrap_or(d.corruption_rate),
            corruption: flags.corruption.or(self.corruption).unwrap_or(d.corruption),
        };
        if spec.families == 0 || spec.train_per_family == 0 || spec.test_per_family == 0 {
            return Err(usage("task families and per-family counts must be positive"));
        }
        for (name, v) in [("unanswerable_rate", spec.unanswerable_rate), ("corruption_rate", spec.corruption_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(usage(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok((train, spec))
    }
}
