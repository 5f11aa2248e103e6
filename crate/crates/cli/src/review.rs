use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use chrono::DateTime;
use labelsteward::dataset::read_jsonl;
use labelsteward::model::parse_label;
use labelsteward::Instance;
use labelsteward::discrepancy::DiscrepancyReport;
use labelsteward::triage::http::{router, HttpConfig};
use labelsteward::triage::{
    apply_records, build_queue, validation_report, AdjudicationRecord, Reviewer, TriageError, TriageQueue,
    TriageService, ValidationConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{read_instances, require_file, write_json};
use crate::emit;
use crate::error::{fatal, input, usage, CliResult};
use crate::manifest::{manifest_for_file, ManifestBuilder};

fn read_reviewers(path: &Path) -> CliResult<Vec<Reviewer>> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| fatal(format!("{}: {e}", path.display())))?;
    let reviewers: Vec<Reviewer> =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    for r in &reviewers {
        r.validate().map_err(usage)?;
    }
    if reviewers.is_empty() {
        return Err(usage(format!("{} lists no reviewers", path.display())));
    }
    Ok(reviewers)
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    require_file(path)?;
    read_jsonl(path).map_err(|e| input(path, e))
}

#[derive(Debug, Serialize)]
struct TriageSummary {
    queued: usize,
    per_reviewer: BTreeMap<String, usize>,
    skipped: Vec<labelsteward::triage::SkippedEntry>,
    order: Vec<String>,
}

pub fn triage(instances_path: &Path, diff: &Path, reviewers_path: &Path, limit: usize, out: &Path, json: bool) -> CliResult<()> {
    let instances = read_instances(instances_path)?;
    let reports: Vec<DiscrepancyReport> = read_lines(diff)?;
    let reviewers = read_reviewers(reviewers_path)?;
    let manifest = ManifestBuilder::start("triage", json!({ "limit": limit, "out": out }))
        .input(instances_path)
        .input(diff)
        .input(reviewers_path);
    let queue = build_queue(&reports, &instances, &reviewers, limit);
    write_json(out, &queue)?;
    manifest.finish(&[out.to_path_buf()], &manifest_for_file(out))?;

    let mut per_reviewer = BTreeMap::new();
    for e in &queue.entries {
        *per_reviewer.entry(e.reviewer_id.clone()).or_insert(0) += 1;
    }
    let summary = TriageSummary {
        queued: queue.entries.len(),
        per_reviewer,
        skipped: queue.skipped.clone(),
        order: queue.entries.iter().map(|e| e.unique_id.clone()).collect(),
    };
    emit(json, &summary, || {
        let mut s = format!("queued {} instances: {}\n", summary.queued, summary.order.join(", "));
        for (r, n) in &summary.per_reviewer {
            s.push_str(&format!("  {r}: {n}\n"));
        }
        for sk in &summary.skipped {
            s.push_str(&format!("  skipped {}: {}\n", sk.unique_id, sk.reason));
        }
        s
    });
    Ok(())
}

/// A line of an adjudication file: either a service event-log record or a
/// reviewer submission whose label is still free text.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AdjudicationLine {
    Record(AdjudicationRecord),
    Submission {
        unique_id: String,
        reviewer_id: String,
        label: String,
        #[serde(default)]
        rationale: String,
    },
}

fn to_records(lines: Vec<AdjudicationLine>, instances: &[Instance]) -> CliResult<Vec<AdjudicationRecord>> {
    lines
        .into_iter()
        .map(|line| match line {
            AdjudicationLine::Record(r) => Ok(r),
            AdjudicationLine::Submission { unique_id, reviewer_id, label, rationale } => {
                let inst = instances
                    .iter()
                    .find(|i| i.unique_id == unique_id)
                    .ok_or_else(|| usage(format!("adjudication for unknown instance {unique_id}")))?;
                let label = parse_label(&label, inst.question.output_kind)
                    .map_err(|e| usage(format!("instance {unique_id}: cannot read {:?} as a {} answer", e.text, e.kind)))?;
                Ok(AdjudicationRecord { unique_id, reviewer_id, label, rationale, timestamp: DateTime::UNIX_EPOCH })
            }
        })
        .collect()
}

pub fn validate(instances_path: &Path, log: &Path, config: &ValidationConfig, out: &Path, json: bool) -> CliResult<()> {
    let mut instances = read_instances(instances_path)?;
    let lines: Vec<AdjudicationLine> = read_lines(log)?;
    let records = to_records(lines, &instances)?;
    let manifest = ManifestBuilder::start("validate", config).input(instances_path).input(log).seed(config.seed);
    let applied = apply_records(&mut instances, &records);
    if applied.len() < records.len() {
        return Err(usage(format!(
            "{} adjudication record(s) refer to instances missing from {}",
            records.len() - applied.len(),
            instances_path.display()
        )));
    }
    let adjudicated: Vec<&Instance> = applied
        .iter()
        .filter_map(|id| instances.iter().find(|i| &i.unique_id == id))
        .collect();
    let report = validation_report(&adjudicated, config).map_err(|e| match e {
        TriageError::EmptyInput => usage(format!("{} holds no adjudications", log.display())),
        other => fatal(other),
    })?;
    let table = report.table();
    write_json(out, &json!({ "report": &report, "table": &table }))?;
    manifest.finish(&[out.to_path_buf()], &manifest_for_file(out))?;
    emit(json, &report, || table.clone());
    Ok(())
}

pub struct ServeOptions {
    pub bind: String,
    pub token_env: String,
    pub no_auth: bool,
    pub cors_origins: Vec<String>,
    pub validation: ValidationConfig,
}

pub fn serve(instances_path: &Path, queue_path: &Path, reviewers_path: &Path, log: &Path, opts: &ServeOptions) -> CliResult<()> {
    let instances = read_instances(instances_path)?;
    require_file(queue_path)?;
    let queue_text = std::fs::read_to_string(queue_path).map_err(|e| fatal(format!("{}: {e}", queue_path.display())))?;
    let queue: TriageQueue =
        serde_json::from_str(&queue_text).map_err(|e| usage(format!("{}: {e}", queue_path.display())))?;
    let reviewers = read_reviewers(reviewers_path)?;
    let bearer_token = if opts.no_auth {
        None
    } else {
        let token = std::env::var(&opts.token_env)
            .map_err(|_| usage(format!("set {} to the API bearer token, or pass --no-auth", opts.token_env)))?;
        Some(token)
    };
    let service = TriageService::new(instances, queue, reviewers)
        .with_validation(opts.validation)
        .with_event_log(log)
        .map_err(fatal)?;
    let app = router(Arc::new(service), &HttpConfig { bearer_token, cors_origins: opts.cors_origins.clone() });

    let rt = tokio::runtime::Runtime::new().map_err(fatal)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&opts.bind)
            .await
            .map_err(|e| usage(format!("cannot bind {}: {e}", opts.bind)))?;
        let addr = listener.local_addr().map_err(fatal)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(fatal)
    })
}
