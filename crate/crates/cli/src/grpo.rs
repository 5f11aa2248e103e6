use std::path::{Path, PathBuf};

use clap::ValueEnum;
use labelsteward::dataset::read_jsonl;
use labelsteward::grpo::{
    generate_tasks, run_label_swap, train, CorruptionMode, GrpoError, LabelSource, LogRow, TaskSpec, TrainConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{FileConfig, GrpoOverrides};
use crate::data::{require_file, write_json, write_lines};
use crate::error::{fatal, usage, CliResult};
use crate::manifest::ManifestBuilder;
use crate::{emit, plot, GrpoArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arm {
    Clean,
    Corrupted,
}

impl From<Arm> for LabelSource {
    fn from(arm: Arm) -> Self {
        match arm {
            Arm::Clean => LabelSource::Clean,
            Arm::Corrupted => LabelSource::Corrupted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Corruption {
    Systematic,
    Iid,
}

impl From<Corruption> for CorruptionMode {
    fn from(c: Corruption) -> Self {
        match c {
            Corruption::Systematic => CorruptionMode::Systematic,
            Corruption::Iid => CorruptionMode::Iid,
        }
    }
}

#[derive(Debug, Serialize)]
struct ArmSummary {
    arm: LabelSource,
    initial_accuracy: f64,
    final_accuracy: f64,
    log: PathBuf,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    config: TrainConfig,
    tasks: TaskSpec,
    corruption_fraction: f64,
    flawed_families: Vec<usize>,
    arms: Vec<ArmSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_swap: Option<labelsteward::grpo::LabelSwapReport>,
}

fn series(name: &str, log: &[LogRow]) -> (String, Vec<(f64, f64)>) {
    (name.to_string(), log.iter().map(|r| ((r.step + 1) as f64, r.heldout_accuracy)).collect())
}

pub fn run(cfg: &FileConfig, args: &GrpoArgs, json: bool) -> CliResult<()> {
    let flags = GrpoOverrides {
        profile: args.profile.clone(),
        seed: args.seed,
        steps: args.steps,
        learning_rate: args.learning_rate,
        minibatch_size: args.minibatch_size,
        group_size: args.group_size,
        corruption: args.corruption.map(Into::into),
        corruption_rate: args.corruption_rate,
    };
    let (config, spec) = cfg.grpo.resolve(&flags)?;
    let mut arms = args.arms.clone();
    if arms.is_empty() {
        arms = vec![Arm::Clean, Arm::Corrupted];
    }
    arms.dedup();
    let manifest = ManifestBuilder::start("grpo-run", json!({ "train": &config, "tasks": &spec, "swap_seeds": args.swap_seeds }))
        .seed(config.seed);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| fatal(format!("{}: {e}", args.out_dir.display())))?;

    let tasks = generate_tasks(&spec, config.seed);
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut chart = Vec::new();
    for arm in arms {
        let source: LabelSource = arm.into();
        let outcome = match train(&tasks, &config, source) {
            Ok(o) => o,
            Err(GrpoError::NonFiniteLoss { step, checkpoint }) => {
                let path = args.out_dir.join(format!("checkpoint_{}.json", source.as_str()));
                write_json(&path, &checkpoint)?;
                return Err(fatal(format!(
                    "{} arm diverged at step {}; parameters before the update saved to {}",
                    source.as_str(),
                    step.map_or("?".into(), |s| s.to_string()),
                    path.display()
                )));
            }
            Err(e) => return Err(usage(e)),
        };
        let log_path = args.out_dir.join(format!("log_{}.jsonl", source.as_str()));
        write_lines(&log_path, &outcome.log)?;
        chart.push(series(source.as_str(), &outcome.log));
        outputs.push(log_path.clone());
        summaries.push(ArmSummary {
            arm: source,
            initial_accuracy: outcome.initial_accuracy,
            final_accuracy: outcome.final_accuracy,
            log: log_path,
        });
    }
    let svg = args.out_dir.join("accuracy.svg");
    plot::accuracy_chart(&chart, &svg)?;
    outputs.push(svg);

    let label_swap = match args.swap_seeds {
        Some(n) => {
            let seeds: Vec<u64> = (0..n as u64).map(|i| config.seed + i).collect();
            Some(run_label_swap(&config, &spec, &seeds).map_err(usage)?)
        }
        None => None,
    };
    let summary = RunSummary {
        config: config.clone(),
        tasks: spec,
        corruption_fraction: tasks.corruption_fraction(),
        flawed_families: tasks.flawed_families.clone(),
        arms: summaries,
        label_swap,
    };
    let summary_path = args.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    outputs.push(summary_path);
    manifest.finish(&outputs, &args.out_dir.join("manifest.json"))?;

    emit(json, &summary, || {
        let mut s = format!(
            "{} training labels corrupted ({:.1}%), {} steps, seed {}\n",
            tasks.train.iter().filter(|t| t.is_corrupted).count(),
            100.0 * summary.corruption_fraction,
            config.steps,
            config.seed
        );
        for a in &summary.arms {
            s.push_str(&format!(
                "  {:<10} held-out accuracy {:.3} -> {:.3} (mean of last {})\n",
                a.arm.as_str(),
                a.initial_accuracy,
                a.final_accuracy,
                config.final_window
            ));
        }
        if let Some(r) = &summary.label_swap {
            s.push_str(&format!(
                "  label swap over {} seeds: mean gap {:.3}, t = {:.2}, one-sided p = {:.3e}{}\n",
                r.per_seed.len(),
                r.mean_difference,
                r.t_stat,
                r.p_value,
                if r.significant_95 { " (significant at 95%)" } else { "" }
            ));
        }
        s
    });
    Ok(())
}

pub fn plot_logs(logs: &[PathBuf], out: &Path) -> CliResult<()> {
    let mut chart = Vec::new();
    let mut manifest = ManifestBuilder::start("plot", json!({ "out": out }));
    for path in logs {
        require_file(path)?;
        let rows: Vec<LogRow> = read_jsonl(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        chart.push(series(stem.strip_prefix("log_").unwrap_or(stem), &rows));
        manifest = manifest.input(path);
    }
    plot::accuracy_chart(&chart, out)?;
    manifest.finish(&[out.to_path_buf()], &crate::manifest::manifest_for_file(out))
}
