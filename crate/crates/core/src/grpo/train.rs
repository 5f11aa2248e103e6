use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{rollout, TaskSet, ToyTask, Trajectory};
use super::loss::{grpo_loss, Group};
use super::policy::{PolicyParams, Template, ToyState, WELL_FORMED};
use super::reward::{group_advantages, reward};
use super::{derive_seed, GrpoError};
use crate::discrepancy::grade;
use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub group_size: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub kl_coef: f64,
    pub format_weight: f64,
    pub answer_tolerance: f64,
    pub temperature: f64,
    pub max_tokens: usize,
    pub steps: usize,
    /// Number of trailing evaluations averaged into the reported accuracy.
    pub final_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// The full-scale constants.
    fn default() -> Self {
        Self {
            group_size: 8,
            minibatch_size: 256,
            learning_rate: 1e-5,
            kl_coef: 1e-3,
            format_weight: 0.1,
            answer_tolerance: 0.05,
            temperature: 1.0,
            max_tokens: 1600,
            steps: 100,
            final_window: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Same reward and sampling settings with a step size and batch that
    /// make the toy policy move within a few dozen updates.
    pub fn desk_scale() -> Self {
        Self {
            minibatch_size: 32,
            learning_rate: 0.05,
            steps: 60,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |msg: &str| Err(GrpoError::InvalidConfig(msg.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.format_weight) {
            return bad("format_weight must lie in [0, 1]");
        }
        if !(self.answer_tolerance >= 0.0) {
            return bad("answer_tolerance must be nonnegative");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.learning_rate >= 0.0) || !(self.kl_coef >= 0.0) {
            return bad("learning_rate and kl_coef must be nonnegative");
        }
        if self.final_window == 0 {
            return bad("final_window must be at least 1");
        }
        Ok(())
    }
}

/// Which labels the training reward is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Clean,
    Corrupted,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clean => "clean",
            Self::Corrupted => "corrupted",
        }
    }

    fn label(self, task: &ToyTask) -> &Label {
        match self {
            Self::Clean => &task.gold,
            Self::Corrupted => &task.corrupted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub train_reward: f64,
    /// Sampled 0-1 accuracy on the held-out tasks, graded against clean labels.
    pub heldout_accuracy: f64,
    /// Exact expected held-out accuracy of the policy after the step.
    pub expected_accuracy: f64,
    pub kl: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub arm: LabelSource,
    pub log: Vec<LogRow>,
    pub policy: PolicyParams,
    pub initial_accuracy: f64,
    /// Mean held-out accuracy over the last `final_window` evaluations.
    pub final_accuracy: f64,
}

/// Adam with the usual defaults.
#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

const STREAM_PARTITION: u64 = 1;
const STREAM_ROLLOUT: u64 = 2;
const STREAM_EVAL: u64 = 3;

/// Fraction of tasks answered correctly by one sampled episode each.
pub fn evaluate(policy: &PolicyParams, tasks: &[ToyTask], max_tokens: usize, seed: u64) -> f64 {
    if tasks.is_empty() {
        return 0.0;
    }
    let correct: usize = tasks
        .par_iter()
        .map(|task| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[task.id as u64]));
            let (_, answer) = rollout(policy, task, max_tokens, &mut rng);
            usize::from(answer.is_some_and(|a| grade(&a, &task.gold)))
        })
        .sum();
    correct as f64 / tasks.len() as f64
}

/// Exact probability that one sampled episode is graded correct, averaged
/// over tasks.
pub fn expected_accuracy(policy: &PolicyParams, tasks: &[ToyTask], max_tokens: usize) -> f64 {
    if tasks.is_empty() || max_tokens < 2 {
        return 0.0;
    }
    let total: f64 = tasks
        .iter()
        .map(|task| {
            let p_fmt = policy.probs(&task.start_state());
            let state = ToyState::Answer {
                family: task.family,
                answerable: task.answerable,
                well_formed: true,
            };
            let p_tpl = policy.probs(&state);
            let hit: f64 = Template::ALL
                .iter()
                .filter(|t| grade(task.answer(**t), &task.gold))
                .map(|t| p_tpl[t.index()])
                .sum();
            p_fmt[WELL_FORMED] * hit
        })
        .sum();
    total / tasks.len() as f64
}

/// Trains one arm from the base policy. With a shared seed both arms see the
/// same minibatch sequence, rollout random streams and evaluation streams.
pub fn train(tasks: &TaskSet, config: &TrainConfig, arm: LabelSource) -> Result<TrainOutcome, GrpoError> {
    let initial = PolicyParams::base_model(tasks.spec.families, config.temperature);
    train_from(initial, tasks, config, arm)
}

pub fn train_from(
    initial: PolicyParams,
    tasks: &TaskSet,
    config: &TrainConfig,
    arm: LabelSource,
) -> Result<TrainOutcome, GrpoError> {
    config.validate()?;
    if tasks.train.is_empty() {
        return Err(GrpoError::InvalidConfig("no training tasks".into()));
    }
    let mut policy = initial;
    let mut adam = Adam::new(policy.theta.len());
    let mut partition_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_PARTITION]));
    let initial_accuracy = expected_accuracy(&policy, &tasks.test, config.max_tokens);

    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut shuffles = 0usize;
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut batch = Vec::with_capacity(config.minibatch_size);
        while batch.len() < config.minibatch_size.min(tasks.train.len()) {
            if cursor == order.len() {
                order = (0..tasks.train.len()).collect();
                order.shuffle(&mut partition_rng);
                cursor = 0;
                shuffles += 1;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        let groups: Vec<Group> = batch
            .par_iter()
            .enumerate()
            .map(|(g, &ti)| {
                let task = &tasks.train[ti];
                let gold = arm.label(task);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_ROLLOUT, step as u64, task.id as u64]));
                let trajectories: Vec<Trajectory> = (0..config.group_size)
                    .map(|_| {
                        let (actions, answer) = rollout(&policy, task, config.max_tokens, &mut rng);
                        let r = reward(answer.as_ref(), gold, config.format_weight, config.answer_tolerance);
                        Trajectory {
                            task_id: task.id,
                            family: task.family,
                            answerable: task.answerable,
                            actions,
                            answer,
                            reward: r,
                            group: g,
                        }
                    })
                    .collect();
                let rewards: Vec<f64> = trajectories.iter().map(|t| t.reward).collect();
                let advantages = group_advantages(&rewards).expect("group size validated");
                Group { trajectories, advantages }
            })
            .collect();

        let n_traj = (groups.len() * config.group_size) as f64;
        let train_reward = groups.iter().flat_map(|g| &g.trajectories).map(|t| t.reward).sum::<f64>() / n_traj;
        let out = grpo_loss(&groups, &policy, config.kl_coef).map_err(|e| e.at_step(step))?;

        let before = policy.theta.clone();
        adam.step(&mut policy.theta, &out.grad, config.learning_rate);
        if policy.theta.iter().any(|v| !v.is_finite()) {
            policy.theta = before;
            return Err(GrpoError::NonFiniteLoss {
                step: Some(step),
                checkpoint: Box::new(policy),
            });
        }

        let eval_seed = derive_seed(config.seed, &[STREAM_EVAL, step as u64]);
        log.push(LogRow {
            step,
            epoch: shuffles - 1,
            train_reward,
            heldout_accuracy: evaluate(&policy, &tasks.test, config.max_tokens, eval_seed),
            expected_accuracy: expected_accuracy(&policy, &tasks.test, config.max_tokens),
            kl: out.kl,
            loss: out.loss,
        });
    }

    let window = config.final_window.min(log.len()).max(1);
    let final_accuracy = if log.is_empty() {
        initial_accuracy
    } else {
        log[log.len() - window..].iter().map(|r| r.heldout_accuracy).sum::<f64>() / window as f64
    };
    Ok(TrainOutcome {
        arm,
        log,
        policy,
        initial_accuracy,
        final_accuracy,
    })
}
