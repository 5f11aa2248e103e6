//! Audit and relabel passes over an ensemble of external verifier agents.
//!
//! Each instance is sent to the verifier `n` times; answers are parsed from
//! `<answer>` tags and reduced under a `k`-of-`n` supermajority rule.

mod consensus;
mod endpoint;
mod mock;
mod orchestrator;
mod prompt;

pub use consensus::{
    extract_answer, parse_outcome, reduce, reduce_audit, reduce_relabel, ConsensusOutcome, ParsedOutcome,
};
pub use endpoint::{
    CallContext, ChatRequest, ChatResponse, EndpointError, HttpVerifier, ToolPermissions, Verifier,
    VerifierEndpoint,
};
pub use mock::{MockEntry, MockVerifier};
pub use orchestrator::{
    apply_relabels, BatchFailure, BatchReport, ConsensusResult, Orchestrator, RetryPolicy, TranscriptStore,
    VerifierRun, VerifyError,
};
pub use prompt::{render_prompt, Prompt, PromptError, AUDIT_SYSTEM_PROMPT, RELABEL_SYSTEM_PROMPT};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Audit,
    Relabel,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Audit => "audit",
            Self::Relabel => "relabel",
        }
    }
}
