//! The mock end-to-end pipeline over the 20-row fixture, plus the blindness
//! sweep over every fixture instance.

use std::path::Path;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use labelsteward::dataset::{read_jsonl, write_jsonl};
use labelsteward::discrepancy::{diff_instances, DiscrepancyKind, DiscrepancyReport};
use labelsteward::triage::{
    build_queue, AdjudicationRequest, Clock, Reviewer, TriageQueue, TriageService, ValidationConfig, ValidationReport,
};
use labelsteward::verifier::{
    apply_relabels, render_prompt, ConsensusOutcome, MockVerifier, Orchestrator, Phase, RetryPolicy, TranscriptStore,
};
use labelsteward::{blind, render_label, Instance, Label};
use serde::Serialize;

use super::{fixture, pipeline_instances};

pub fn reviewers() -> Vec<Reviewer> {
    serde_json::from_str(&std::fs::read_to_string(fixture("reviewers.json")).unwrap()).unwrap()
}

pub fn fixed_clock() -> Clock {
    Arc::new(|| Utc.with_ymd_and_hms(2025, 1, 2, 3, 4, 5).unwrap())
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct ScriptedAdjudication {
    pub unique_id: String,
    pub reviewer_id: String,
    pub label: String,
    pub rationale: String,
}

pub struct PipelineRun {
    pub audit: Vec<(String, ConsensusOutcome)>,
    pub instances: Vec<Instance>,
    pub reports: Vec<DiscrepancyReport>,
    pub queue: TriageQueue,
    pub validation: ValidationReport,
    /// Output files, by name, in the order they were written.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

/// ingest -> audit -> relabel -> diff -> queue -> scripted adjudication ->
/// validation, writing each stage's output under `work`.
pub async fn run_pipeline(work: &Path) -> PipelineRun {
    let mut instances = pipeline_instances();
    let mock = Arc::new(MockVerifier::from_path(&fixture("pipeline_mock.jsonl")).unwrap());
    let orch = Orchestrator::new(mock, 5, 4)
        .unwrap()
        .with_retry(RetryPolicy::immediate())
        .with_store(TranscriptStore::open(&work.join("store")).unwrap());

    let audit = orch.run_batch(&instances, Phase::Audit, 4).await.unwrap();
    assert!(audit.failures.is_empty());
    let audit: Vec<(String, ConsensusOutcome)> =
        audit.results.iter().map(|r| (r.unique_id.clone(), r.outcome.clone())).collect();

    let relabel = orch.run_batch(&instances, Phase::Relabel, 4).await.unwrap();
    assert!(relabel.failures.is_empty());
    apply_relabels(&mut instances, &relabel.results);

    let (reports, skipped) = diff_instances(&instances);
    assert_eq!(skipped, ["19"]);
    let queue = build_queue(&reports, &instances, &reviewers(), 50);

    let log = work.join("adjudications.jsonl");
    let _ = std::fs::remove_file(&log);
    let service = TriageService::new(instances.clone(), queue.clone(), reviewers())
        .with_clock(fixed_clock())
        .with_validation(ValidationConfig { n_resamples: 2000, level: 0.95, seed: 11 })
        .with_event_log(&log)
        .unwrap();
    let script: Vec<ScriptedAdjudication> = read_jsonl(&fixture("adjudications.jsonl")).unwrap();
    for s in script {
        service
            .submit(
                &s.unique_id,
                AdjudicationRequest { reviewer_id: s.reviewer_id, label: s.label, rationale: s.rationale },
            )
            .unwrap();
    }
    let validation = service.validation_report().unwrap();

    let outcomes: Vec<serde_json::Value> = audit
        .iter()
        .map(|(id, o)| serde_json::json!({ "unique_id": id, "outcome": o }))
        .collect();
    write_jsonl(&work.join("audit.jsonl"), &outcomes).unwrap();
    write_jsonl(&work.join("instances.jsonl"), &service.snapshot()).unwrap();
    write_jsonl(&work.join("diff.jsonl"), &reports).unwrap();
    write_json(&work.join("queue.json"), &queue);
    write_json(&work.join("validation.json"), &validation);
    std::fs::write(work.join("validation.txt"), validation.table()).unwrap();

    let names = ["audit.jsonl", "instances.jsonl", "diff.jsonl", "queue.json", "adjudications.jsonl", "validation.json", "validation.txt"];
    let artifacts = names
        .iter()
        .map(|n| (n.to_string(), std::fs::read(work.join(n)).unwrap()))
        .collect();
    PipelineRun { audit, instances, reports, queue, validation, artifacts }
}

fn smape_by_hand(pairs: &[(f64, f64)]) -> f64 {
    100.0 / pairs.len() as f64 * pairs.iter().map(|(e, c)| 2.0 * (e - c).abs() / (e + c)).sum::<f64>()
}

/// Checks a pipeline run against the outcomes scripted into the fixtures.
pub fn check_pipeline(run: &PipelineRun) {
    let registry = labelsteward::CalculatorRegistry::builtin();
    for inst in &run.instances {
        let known = registry.get(&inst.question.calculator_id).is_some();
        assert_eq!(known, !["17", "18"].contains(&inst.unique_id.as_str()), "row {}", inst.unique_id);
    }
    let outcome = |id: &str| run.audit.iter().find(|(u, _)| u == id).unwrap().1.clone();
    let count = |o: ConsensusOutcome| run.audit.iter().filter(|(_, x)| *x == o).count();
    assert_eq!(count(ConsensusOutcome::Pass), 9);
    assert_eq!(count(ConsensusOutcome::LikelyError), 9);
    assert_eq!(count(ConsensusOutcome::NoConsensus), 2);
    assert_eq!(outcome("14"), ConsensusOutcome::NoConsensus);
    assert_eq!(outcome("6"), ConsensusOutcome::LikelyError);

    let label_new = |id: &str| run.instances.iter().find(|i| i.unique_id == id).unwrap().label_new.clone();
    assert_eq!(label_new("2").map(|l| render_label(&l)), Some("25.25".into()));
    assert_eq!(label_new("10"), Some(Label::Na));
    assert_eq!(label_new("19"), None);

    let flagged: Vec<&str> = run.reports.iter().filter(|r| r.flagged).map(|r| r.unique_id.as_str()).collect();
    assert_eq!(flagged, ["2", "4", "6", "7", "9", "10", "12", "15", "18"]);
    let eighteen = run.reports.iter().find(|r| r.unique_id == "18").unwrap();
    assert_eq!((eighteen.kind, eighteen.delta_days), (DiscrepancyKind::Datetime, Some(8.0)));

    let order: Vec<&str> = run.queue.entries.iter().map(|e| e.unique_id.as_str()).collect();
    assert_eq!(order, ["10", "15", "12", "9", "4", "6", "7", "2"]);
    assert_eq!(run.queue.skipped.len(), 1);
    assert_eq!(run.queue.skipped[0].unique_id, "18");
    let dr_a: Vec<&str> =
        run.queue.entries.iter().filter(|e| e.reviewer_id == "dr-a").map(|e| e.unique_id.as_str()).collect();
    assert_eq!(dr_a, ["15", "4", "2"]);

    let v = &run.validation;
    assert_eq!(v.n_adjudicated, 8);
    assert_eq!((v.original.agreement_count, v.original.n_instances), (2, 8));
    assert_eq!((v.new.agreement_count, v.new.n_instances), (7, 8));
    // (expert, candidate) for the seven rows where both are numeric.
    let original = [(329.0, 840.0), (5.0, 3.0), (2.0, 2.0), (55.0, 73.07), (11.0, 9.0), (13.0, 13.0), (25.3, 31.2)];
    let new = [(329.0, 329.0), (5.0, 5.0), (2.0, 3.0), (55.0, 54.19), (11.0, 12.0), (13.0, 10.0), (25.3, 25.25)];
    assert_eq!((v.original.n_numeric_pairs, v.new.n_numeric_pairs), (7, 7));
    assert!((v.original.smape_percent.unwrap() - smape_by_hand(&original)).abs() < 1e-9);
    assert!((v.new.smape_percent.unwrap() - smape_by_hand(&new)).abs() < 1e-9);
    assert!(v.new.smape_percent < v.original.smape_percent);
}

/// Renders the relabel prompt for every fixture instance and a reviewer
/// packet before and after adjudication, and checks none of them leaks a
/// label. Returns the number of artifacts checked.
pub fn check_blindness() -> usize {
    let mut instances = pipeline_instances();
    // Give every row a new label so the sweep covers all three label slots.
    for inst in &mut instances {
        if inst.label_new.is_none() {
            inst.label_new = Some(Label::Real("42.42".parse().unwrap()));
        }
    }
    let mut checked = 0;
    for inst in &instances {
        let prompt = render_prompt(inst, Phase::Relabel).unwrap();
        let text = format!("{}\n{}", prompt.system, prompt.user);
        assert_eq!(blind::violations(&text, inst), Vec::<String>::new(), "prompt for {}", inst.unique_id);
        checked += 1;
    }

    // Route every row to a single reviewer who covers all calculators.
    let reports: Vec<DiscrepancyReport> = instances
        .iter()
        .map(|i| DiscrepancyReport {
            unique_id: i.unique_id.clone(),
            kind: DiscrepancyKind::NaMismatch,
            rel_err: None,
            delta_days: None,
            flagged: true,
        })
        .collect();
    let calcs: Vec<&str> = instances.iter().map(|i| i.question.calculator_id.as_str()).collect();
    let reviewer = Reviewer::new("all", "All", &calcs);
    let queue = build_queue(&reports, &instances, std::slice::from_ref(&reviewer), instances.len());
    assert_eq!(queue.entries.len(), instances.len());
    let service = TriageService::new(instances.clone(), queue, vec![reviewer]).with_clock(fixed_clock());
    for inst in &instances {
        let packet = serde_json::to_string(&service.blind_packet(&inst.unique_id).unwrap()).unwrap();
        assert_eq!(blind::violations(&packet, inst), Vec::<String>::new(), "packet for {}", inst.unique_id);
        let expert = match &inst.label_original {
            Some(l) if !l.is_na() => format!("{}", render_label(l)),
            _ => "unknown".to_string(),
        };
        let req = AdjudicationRequest { reviewer_id: "all".into(), label: expert, rationale: String::new() };
        service.submit(&inst.unique_id, req).unwrap();
        let after = service.snapshot().into_iter().find(|i| i.unique_id == inst.unique_id).unwrap();
        assert!(after.label_expert().is_some());
        let packet = serde_json::to_string(&service.blind_packet(&inst.unique_id).unwrap()).unwrap();
        assert_eq!(blind::violations(&packet, &after), Vec::<String>::new(), "packet for {}", inst.unique_id);
        checked += 2;
    }
    checked
}
