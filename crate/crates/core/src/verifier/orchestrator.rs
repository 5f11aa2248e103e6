use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use super::consensus::{parse_outcome, reduce, ConsensusOutcome, ParsedOutcome};
use super::endpoint::{CallContext, ChatRequest, EndpointError, Verifier, VerifierEndpoint};
use super::prompt::{render_prompt, PromptError};
use super::Phase;
use crate::dataset::{append_jsonl, read_jsonl_or_empty, DatasetError};
use crate::model::{Instance, OutputKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierRun {
    pub unique_id: String,
    pub phase: Phase,
    /// 1-based.
    pub run_index: u32,
    pub transcript: String,
    pub outcome: ParsedOutcome,
    pub latency_ms: u64,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u32>,
    /// Last transport error when every attempt failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub unique_id: String,
    pub phase: Phase,
    pub output_kind: OutputKind,
    pub k: u32,
    #[serde(flatten)]
    pub outcome: ConsensusOutcome,
    pub runs: Vec<VerifierRun>,
}

impl ConsensusResult {
    /// Re-parses every stored transcript and reduces again.
    pub fn replay(&self) -> ConsensusOutcome {
        let outcomes: Vec<ParsedOutcome> = self
            .runs
            .iter()
            .map(|r| {
                if r.error.is_some() {
                    ParsedOutcome::Unparsable
                } else {
                    parse_outcome(&r.transcript, self.phase, self.output_kind)
                }
            })
            .collect();
        reduce(self.phase, &outcomes, self.k as usize)
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("instance {unique_id}: endpoint unavailable after retries ({last_error})")]
    EndpointUnavailable { unique_id: String, last_error: String },
    #[error("invalid orchestrator settings: {0}")]
    InvalidConfig(String),
    #[error("transcript store: {0}")]
    Store(#[from] io::Error),
    #[error("transcript store: {0}")]
    StoreRead(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Same retry budget, no waiting. For tests and scripted endpoints.
    pub fn immediate() -> Self {
        Self {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1 << retry.min(16)).min(self.max_delay)
    }
}

/// Append-only JSONL store: `transcripts.jsonl` holds one run per line and
/// `consensus.jsonl` one result per (unique_id, phase).
#[derive(Debug)]
pub struct TranscriptStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl TranscriptStore {
    pub fn open(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            write_lock: Mutex::new(()),
        })
    }

    pub fn transcripts_path(&self) -> PathBuf {
        self.dir.join("transcripts.jsonl")
    }

    pub fn consensus_path(&self) -> PathBuf {
        self.dir.join("consensus.jsonl")
    }

    pub fn load(&self) -> Result<HashMap<(String, Phase), ConsensusResult>, DatasetError> {
        let rows: Vec<ConsensusResult> = read_jsonl_or_empty(&self.consensus_path())?;
        Ok(rows.into_iter().map(|r| ((r.unique_id.clone(), r.phase), r)).collect())
    }

    pub fn persist(&self, result: &ConsensusResult) -> io::Result<()> {
        let _guard = self.write_lock.lock().expect("store lock poisoned");
        append_jsonl(&self.transcripts_path(), &result.runs)?;
        append_jsonl(&self.consensus_path(), std::slice::from_ref(result))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub unique_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct BatchReport {
    /// Settled results in input order, previously persisted ones included.
    pub results: Vec<ConsensusResult>,
    pub failures: Vec<BatchFailure>,
    /// Results loaded from the store instead of recomputed.
    pub resumed: usize,
}

/// Fans instances out to a verifier and reduces the runs.
#[derive(Clone)]
pub struct Orchestrator {
    verifier: Arc<dyn Verifier>,
    n: u32,
    k: u32,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    retry: RetryPolicy,
    store: Option<Arc<TranscriptStore>>,
}

impl Orchestrator {
    pub fn new(verifier: Arc<dyn Verifier>, n: u32, k: u32) -> Result<Self, VerifyError> {
        if n == 0 || k == 0 || k > n {
            return Err(VerifyError::InvalidConfig(format!("need 1 <= k <= n, got n={n} k={k}")));
        }
        Ok(Self {
            verifier,
            n,
            k,
            temperature: None,
            max_tokens: None,
            retry: RetryPolicy::default(),
            store: None,
        })
    }

    pub fn from_endpoint(verifier: Arc<dyn Verifier>, endpoint: &VerifierEndpoint) -> Result<Self, VerifyError> {
        endpoint.validate().map_err(VerifyError::InvalidConfig)?;
        let mut o = Self::new(verifier, endpoint.n_samples, endpoint.k)?;
        o.temperature = endpoint.temperature;
        o.max_tokens = endpoint.max_tokens;
        Ok(o)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_store(mut self, store: TranscriptStore) -> Self {
        self.store = Some(Arc::new(store));
        self
    }

    pub async fn audit_instance(&self, instance: &Instance) -> Result<ConsensusResult, VerifyError> {
        let sem = Arc::new(Semaphore::new(self.n as usize));
        self.run_instance(instance.clone(), Phase::Audit, sem).await
    }

    pub async fn relabel_instance(&self, instance: &Instance) -> Result<ConsensusResult, VerifyError> {
        let sem = Arc::new(Semaphore::new(self.n as usize));
        self.run_instance(instance.clone(), Phase::Relabel, sem).await
    }

    /// Runs one phase over many instances with at most `concurrency_limit`
    /// verifier calls in flight. Results already in the store are reused.
    pub async fn run_batch(
        &self,
        instances: &[Instance],
        phase: Phase,
        concurrency_limit: usize,
    ) -> Result<BatchReport, VerifyError> {
        if concurrency_limit == 0 {
            return Err(VerifyError::InvalidConfig("concurrency_limit must be at least 1".into()));
        }
        let mut persisted = match &self.store {
            Some(store) => store.load()?,
            None => HashMap::new(),
        };
        let sem = Arc::new(Semaphore::new(concurrency_limit));
        let mut slots: Vec<Option<ConsensusResult>> = vec![None; instances.len()];
        let mut report = BatchReport::default();
        let mut tasks = JoinSet::new();
        for (i, inst) in instances.iter().enumerate() {
            if let Some(done) = persisted.remove(&(inst.unique_id.clone(), phase)) {
                slots[i] = Some(done);
                report.resumed += 1;
                continue;
            }
            let this = self.clone();
            let inst = inst.clone();
            let sem = sem.clone();
            tasks.spawn(async move {
                let id = inst.unique_id.clone();
                (i, id, this.run_instance(inst, phase, sem).await)
            });
        }
        let mut failures = Vec::new();
        while let Some(joined) = tasks.join_next().await {
            let (i, unique_id, outcome) = joined.expect("verifier task panicked");
            match outcome {
                Ok(result) => slots[i] = Some(result),
                Err(VerifyError::Store(e)) => return Err(VerifyError::Store(e)),
                Err(e) => failures.push((i, BatchFailure { unique_id, reason: e.to_string() })),
            }
        }
        failures.sort_by_key(|(i, _)| *i);
        report.failures = failures.into_iter().map(|(_, f)| f).collect();
        report.results = slots.into_iter().flatten().collect();
        Ok(report)
    }

    async fn run_instance(
        &self,
        instance: Instance,
        phase: Phase,
        sem: Arc<Semaphore>,
    ) -> Result<ConsensusResult, VerifyError> {
        let prompt = render_prompt(&instance, phase)?;
        let request = Arc::new(ChatRequest {
            system: prompt.system,
            user: prompt.user,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        });
        let kind = instance.question.output_kind;
        let uid: Arc<str> = instance.unique_id.as_str().into();
        let mut calls = JoinSet::new();
        for run_index in 1..=self.n {
            let this = self.clone();
            let request = request.clone();
            let sem = sem.clone();
            let uid = uid.clone();
            calls.spawn(async move {
                let _permit = sem.acquire_owned().await.expect("semaphore closed");
                this.call_with_retry(&uid, phase, run_index, kind, &request).await
            });
        }
        let mut runs = Vec::with_capacity(self.n as usize);
        while let Some(run) = calls.join_next().await {
            runs.push(run.expect("verifier call panicked"));
        }
        runs.sort_by_key(|r| r.run_index);
        if let Some(last_error) = runs.iter().map(|r| r.error.clone()).collect::<Option<Vec<_>>>().and_then(|e| e.last().cloned()) {
            return Err(VerifyError::EndpointUnavailable {
                unique_id: instance.unique_id,
                last_error,
            });
        }
        let outcomes: Vec<ParsedOutcome> = runs.iter().map(|r| r.outcome.clone()).collect();
        let result = ConsensusResult {
            unique_id: instance.unique_id,
            phase,
            output_kind: kind,
            k: self.k,
            outcome: reduce(phase, &outcomes, self.k as usize),
            runs,
        };
        if let Some(store) = &self.store {
            store.persist(&result)?;
        }
        Ok(result)
    }

    async fn call_with_retry(
        &self,
        unique_id: &str,
        phase: Phase,
        run_index: u32,
        kind: OutputKind,
        request: &ChatRequest,
    ) -> VerifierRun {
        let ctx = CallContext { unique_id, phase, run_index };
        let started = Instant::now();
        let mut attempts = 0;
        let mut last_error: EndpointError;
        loop {
            attempts += 1;
            match self.verifier.complete(ctx, request).await {
                Ok(resp) => {
                    return VerifierRun {
                        unique_id: unique_id.to_string(),
                        phase,
                        run_index,
                        outcome: parse_outcome(&resp.content, phase, kind),
                        transcript: resp.content,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts,
                        prompt_tokens: resp.prompt_tokens,
                        completion_tokens: resp.completion_tokens,
                        error: None,
                    };
                }
                Err(e) => last_error = e,
            }
            if !last_error.is_retryable() || attempts > self.retry.max_retries {
                break;
            }
            let delay = self.retry.delay(attempts - 1);
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
        }
        tracing::warn!(unique_id, run_index, error = %last_error, "verifier run failed");
        VerifierRun {
            unique_id: unique_id.to_string(),
            phase,
            run_index,
            transcript: String::new(),
            outcome: ParsedOutcome::Unparsable,
            latency_ms: started.elapsed().as_millis() as u64,
            attempts,
            prompt_tokens: None,
            completion_tokens: None,
            error: Some(last_error.to_string()),
        }
    }
}

/// Writes consensus labels into `label_new`. Deferred and audit results are
/// ignored. Returns how many instances were updated.
pub fn apply_relabels(instances: &mut [Instance], results: &[ConsensusResult]) -> usize {
    let labels: HashMap<&str, &crate::model::Label> = results
        .iter()
        .filter(|r| r.phase == Phase::Relabel)
        .filter_map(|r| match &r.outcome {
            ConsensusOutcome::Labeled(l) => Some((r.unique_id.as_str(), l)),
            _ => None,
        })
        .collect();
    let mut updated = 0;
    for inst in instances.iter_mut() {
        if let Some(l) = labels.get(inst.unique_id.as_str()) {
            inst.label_new = Some((*l).clone());
            updated += 1;
        }
    }
    updated
}
