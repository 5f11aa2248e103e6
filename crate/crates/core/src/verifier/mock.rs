use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::endpoint::{CallContext, ChatRequest, ChatResponse, EndpointError, Verifier};
use super::Phase;
use crate::dataset::{read_jsonl, DatasetError};

/// One line of a mock script.
///
/// `run` and `phase` may be omitted to match every run or phase of the
/// instance. `fail_times` makes the first attempts fail with a transport
/// error; `unavailable` makes every attempt fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    pub unique_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fail_times: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unavailable: bool,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl MockEntry {
    pub fn respond(unique_id: &str, phase: Phase, run: u32, response: &str) -> Self {
        Self {
            unique_id: unique_id.to_string(),
            phase: Some(phase),
            run: Some(run),
            response: Some(response.to_string()),
            fail_times: 0,
            unavailable: false,
        }
    }

    pub fn unavailable(unique_id: &str) -> Self {
        Self {
            unique_id: unique_id.to_string(),
            phase: None,
            run: None,
            response: None,
            fail_times: 0,
            unavailable: true,
        }
    }
}

type Key = (String, Option<Phase>, Option<u32>);

/// Offline endpoint replaying scripted transcripts.
#[derive(Debug, Default)]
pub struct MockVerifier {
    entries: HashMap<Key, MockEntry>,
    attempts: Mutex<HashMap<(String, Phase, u32), u32>>,
    calls: AtomicUsize,
}

impl MockVerifier {
    pub fn new(entries: impl IntoIterator<Item = MockEntry>) -> Self {
        let entries = entries
            .into_iter()
            .map(|e| ((e.unique_id.clone(), e.phase, e.run), e))
            .collect();
        Self {
            entries,
            ..Self::default()
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        Ok(Self::new(read_jsonl::<MockEntry>(path)?))
    }

    /// Total number of `complete` calls received, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, ctx: &CallContext<'_>) -> Option<&MockEntry> {
        let id = ctx.unique_id.to_string();
        [
            (id.clone(), Some(ctx.phase), Some(ctx.run_index)),
            (id.clone(), None, Some(ctx.run_index)),
            (id.clone(), Some(ctx.phase), None),
            (id, None, None),
        ]
        .iter()
        .find_map(|k| self.entries.get(k))
    }
}

#[async_trait]
impl Verifier for MockVerifier {
    async fn complete(&self, ctx: CallContext<'_>, _request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let entry = self.lookup(&ctx).ok_or_else(|| EndpointError::Status {
            status: 404,
            body: format!("no scripted response for {} run {}", ctx.unique_id, ctx.run_index),
        })?;
        if entry.unavailable {
            return Err(EndpointError::Transport("scripted outage".into()));
        }
        let attempt = {
            let mut attempts = self.attempts.lock().expect("attempt counter poisoned");
            let n = attempts
                .entry((ctx.unique_id.to_string(), ctx.phase, ctx.run_index))
                .or_default();
            *n += 1;
            *n
        };
        if attempt <= entry.fail_times {
            return Err(EndpointError::Transport(format!("scripted failure {attempt}")));
        }
        let content = entry.response.clone().unwrap_or_default();
        Ok(ChatResponse {
            completion_tokens: Some(content.split_whitespace().count() as u32),
            prompt_tokens: None,
            content,
        })
    }
}
