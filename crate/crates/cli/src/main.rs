//! `labelsteward`: ingest, audit, relabel, diff, triage, validate, grpo-run,
//! plot and serve.

mod config;
mod data;
mod error;
mod grpo;
mod manifest;
mod plot;
mod review;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::FileConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "labelsteward", version, about = "Audit and repair ground-truth labels of clinical score datasets")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a benchmark CSV/TSV into instance JSONL.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ask the verifier ensemble whether each original label is correct.
    Audit(VerifyArgs),
    /// Ask the verifier ensemble for a fresh label and record the consensus.
    Relabel {
        #[command(flatten)]
        verify: VerifyArgs,
        /// Updated instances (defaults to OUT_DIR/instances.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two label columns.
    Diff {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value_t = Column::Original)]
        left: Column,
        #[arg(long, value_enum, default_value_t = Column::New)]
        right: Column,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the reviewer queue from flagged discrepancies.
    Triage {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        diff: PathBuf,
        #[arg(long)]
        reviewers: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score original and new labels against adjudicated expert labels.
    Validate {
        #[arg(long)]
        instances: PathBuf,
        /// Adjudication event log (JSONL).
        #[arg(long)]
        adjudications: PathBuf,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy policy on clean and/or corrupted labels.
    GrpoRun(GrpoArgs),
    /// Render held-out accuracy against step for one or more training logs.
    Plot {
        /// Training log JSONL; repeat for several arms.
        #[arg(long = "log", required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the adjudication API.
    Serve {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        queue: PathBuf,
        #[arg(long)]
        reviewers: PathBuf,
        /// Adjudication event log; replayed on start, appended on submit.
        #[arg(long)]
        adjudications: PathBuf,
        #[arg(long)]
        bind: Option<String>,
        /// Environment variable holding the bearer token.
        #[arg(long)]
        token_env: Option<String>,
        /// Serve without authentication (local testing only).
        #[arg(long)]
        no_auth: bool,
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Original,
    New,
    Expert,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Transcripts, consensus results and the manifest go here; reruns
    /// resume from it.
    #[arg(long)]
    out_dir: PathBuf,
    /// Scripted verifier responses (JSONL) instead of a live endpoint.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Runs per instance.
    #[arg(long)]
    n: Option<u32>,
    /// Agreeing runs required.
    #[arg(long)]
    k: Option<u32>,
    /// Only the first N instances.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GrpoArgs {
    /// clean or corrupted; repeat for both (default both).
    #[arg(long = "arm", value_enum)]
    arms: Vec<grpo::Arm>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// desk or full.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    minibatch_size: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long, value_enum)]
    corruption: Option<grpo::Corruption>,
    #[arg(long)]
    corruption_rate: Option<f64>,
    /// Also run the paired label-swap test over this many seeds.
    #[arg(long)]
    swap_seeds: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Prints `value` as JSON or the text produced by `human`.
pub fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
    } else {
        print!("{}", human());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let json = cli.json;
    match cli.command {
        Command::Ingest { input, out } => data::ingest(&input, &out, json),
        Command::Audit(args) => verify::run(&cfg, &args, labelsteward::verifier::Phase::Audit, None, json),
        Command::Relabel { verify, out } => {
            let out = out.unwrap_or_else(|| verify.out_dir.join("instances.jsonl"));
            verify::run(&cfg, &verify, labelsteward::verifier::Phase::Relabel, Some(&out), json)
        }
        Command::Diff { instances, left, right, out } => data::diff(&instances, left, right, &out, json),
        Command::Triage { instances, diff, reviewers, limit, out } => {
            let limit = limit.or(cfg.triage.limit).unwrap_or(config::DEFAULT_QUEUE_LIMIT);
            review::triage(&instances, &diff, &reviewers, limit, &out, json)
        }
        Command::Validate { instances, adjudications, resamples, level, seed, out } => {
            let v = cfg.validation(resamples, level, seed)?;
            review::validate(&instances, &adjudications, &v, &out, json)
        }
        Command::GrpoRun(args) => grpo::run(&cfg, &args, json),
        Command::Plot { logs, out } => grpo::plot_logs(&logs, &out),
        Command::Serve { instances, queue, reviewers, adjudications, bind, token_env, no_auth, cors_origins } => {
            let opts = review::ServeOptions {
                bind: bind.or(cfg.serve.bind.clone()).unwrap_or_else(|| config::DEFAULT_BIND.into()),
                token_env: token_env.or(cfg.serve.token_env.clone()).unwrap_or_else(|| config::DEFAULT_TOKEN_ENV.into()),
                no_auth,
                cors_origins: if cors_origins.is_empty() { cfg.serve.cors_origins.clone() } else { cors_origins },
                validation: cfg.validation(None, None, None)?,
            };
            review::serve(&instances, &queue, &reviewers, &adjudications, &opts)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("LABELSTEWARD_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Usage(_) => "usage error",
                CliError::Partial(_) => "partial failure",
                CliError::Fatal(_) => "error",
            };
            eprintln!("{kind}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
