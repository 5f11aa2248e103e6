//! Toy group-relative policy optimization lab for measuring how label
//! corruption in a training set propagates into held-out accuracy.
//!
//! The "model" is a two-step linear-softmax policy: a format token followed by
//! an answer template. Tasks are synthetic calculator questions whose answer
//! templates produce the correct value, systematic slips, an abstention or a
//! guess.

mod env;
mod experiment;
mod loss;
mod policy;
mod reward;
mod train;

pub use env::{generate_tasks, rollout, CorruptionMode, TaskSet, TaskSpec, ToyTask, Trajectory};
pub use experiment::{run_label_swap, LabelSwapReport, SeedResult};
pub use loss::{grpo_loss, Group, LossOutput};
pub use policy::{
    log_softmax, sample_index, softmax, Layout, PolicyParams, Template, ToyState, FORMAT_ACTIONS, MALFORMED,
    TEMPLATE_ACTIONS, WELL_FORMED,
};
pub use reward::{answer_correct, group_advantages, reward};
pub use train::{evaluate, expected_accuracy, train, train_from, LabelSource, LogRow, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group of {0} trajectories; advantages need at least 2")]
    GroupTooSmall(usize),
    #[error("non-finite loss or gradient{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFiniteLoss {
        step: Option<usize>,
        /// Parameters before the offending update.
        checkpoint: Box<PolicyParams>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl GrpoError {
    fn at_step(self, step: usize) -> Self {
        match self {
            Self::NonFiniteLoss { checkpoint, .. } => Self::NonFiniteLoss {
                step: Some(step),
                checkpoint,
            },
            other => other,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of integers into an independent seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
