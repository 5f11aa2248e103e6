use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use labelsteward::verifier::{
    apply_relabels, ConsensusOutcome, HttpVerifier, MockVerifier, Orchestrator, ParsedOutcome, Phase, RetryPolicy,
    TranscriptStore, Verifier,
};
use serde::Serialize;

use crate::config::{FileConfig, DEFAULT_CONCURRENCY};
use crate::data::{read_instances, require_file, write_lines};
use crate::error::{fatal, usage, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::{emit, VerifyArgs};

/// One settled instance without the per-run timing, so reruns give the same
/// bytes.
#[derive(Debug, Serialize)]
struct OutcomeLine<'a> {
    unique_id: &'a str,
    phase: Phase,
    #[serde(flatten)]
    outcome: &'a ConsensusOutcome,
    votes: Vec<&'a ParsedOutcome>,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    phase: Phase,
    instances: usize,
    settled: usize,
    resumed: usize,
    outcomes: BTreeMap<String, usize>,
    failures: Vec<labelsteward::verifier::BatchFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relabeled: Option<usize>,
}

fn outcome_name(o: &ConsensusOutcome) -> &'static str {
    match o {
        ConsensusOutcome::Pass => "pass",
        ConsensusOutcome::LikelyError => "likely_error",
        ConsensusOutcome::NoConsensus => "no_consensus",
        ConsensusOutcome::Labeled(_) => "labeled",
        ConsensusOutcome::Deferred => "deferred",
    }
}

fn orchestrator(cfg: &FileConfig, args: &VerifyArgs) -> CliResult<Orchestrator> {
    let store = TranscriptStore::open(&args.out_dir).map_err(|e| fatal(format!("{}: {e}", args.out_dir.display())))?;
    let orch = if let Some(mock) = &args.mock {
        require_file(mock)?;
        let verifier: Arc<dyn Verifier> =
            Arc::new(MockVerifier::from_path(mock).map_err(|e| usage(format!("{}: {e}", mock.display())))?);
        let n = args.n.or(cfg.verifier.as_ref().map(|v| v.n_samples)).unwrap_or(5);
        let k = args.k.or(cfg.verifier.as_ref().map(|v| v.k)).unwrap_or(4);
        // Scripted responses have no rate limits to back off from.
        Orchestrator::new(verifier, n, k).map_err(usage)?.with_retry(RetryPolicy::immediate())
    } else {
        let mut endpoint = cfg
            .verifier
            .clone()
            .ok_or_else(|| usage("no verifier configured: pass --mock or add a [verifier] section to the config"))?;
        if let Some(n) = args.n {
            endpoint.n_samples = n;
        }
        if let Some(k) = args.k {
            endpoint.k = k;
        }
        let verifier: Arc<dyn Verifier> = Arc::new(HttpVerifier::new(&endpoint).map_err(usage)?);
        Orchestrator::from_endpoint(verifier, &endpoint).map_err(usage)?
    };
    Ok(orch.with_store(store))
}

pub fn run(cfg: &FileConfig, args: &VerifyArgs, phase: Phase, out_instances: Option<&Path>, json: bool) -> CliResult<()> {
    let mut instances = read_instances(&args.instances)?;
    let take = args.limit.unwrap_or(instances.len()).min(instances.len());
    let concurrency = args.concurrency.or(cfg.run.concurrency).unwrap_or(DEFAULT_CONCURRENCY);
    if concurrency == 0 {
        return Err(usage("concurrency must be at least 1"));
    }
    let orch = orchestrator(cfg, args)?;
    let mut manifest = ManifestBuilder::start(phase.as_str(), args).input(&args.instances);
    if let Some(mock) = &args.mock {
        manifest = manifest.input(mock);
    }

    let rt = tokio::runtime::Runtime::new().map_err(fatal)?;
    let report = rt
        .block_on(orch.run_batch(&instances[..take], phase, concurrency))
        .map_err(fatal)?;

    let lines: Vec<OutcomeLine> = report
        .results
        .iter()
        .map(|r| OutcomeLine {
            unique_id: &r.unique_id,
            phase: r.phase,
            outcome: &r.outcome,
            votes: r.runs.iter().map(|run| &run.outcome).collect(),
        })
        .collect();
    let out = args.out_dir.join(format!("{}.jsonl", phase.as_str()));
    write_lines(&out, &lines)?;
    let mut outputs = vec![out];

    let relabeled = match out_instances {
        Some(path) => {
            let n = apply_relabels(&mut instances, &report.results);
            write_lines(path, &instances)?;
            outputs.push(path.to_path_buf());
            Some(n)
        }
        None => None,
    };
    manifest.finish(&outputs, &args.out_dir.join(format!("{}.manifest.json", phase.as_str())))?;

    let mut outcomes = BTreeMap::new();
    for r in &report.results {
        *outcomes.entry(outcome_name(&r.outcome).to_string()).or_insert(0) += 1;
    }
    let summary = VerifySummary {
        phase,
        instances: take,
        settled: report.results.len(),
        resumed: report.resumed,
        outcomes,
        failures: report.failures,
        relabeled,
    };
    emit(json, &summary, || {
        let mut s = format!(
            "{}: {} of {} instances settled ({} resumed)\n",
            phase.as_str(),
            summary.settled,
            summary.instances,
            summary.resumed
        );
        for (k, n) in &summary.outcomes {
            s.push_str(&format!("  {k}: {n}\n"));
        }
        if let Some(n) = summary.relabeled {
            s.push_str(&format!("  new labels written: {n}\n"));
        }
        for f in &summary.failures {
            s.push_str(&format!("  failed {}: {}\n", f.unique_id, f.reason));
        }
        s
    });
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "{} instance(s) could not be settled; rerun to retry them",
            summary.failures.len()
        )))
    }
}
