use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::policy::{sample_index, PolicyParams, Template, ToyState, MALFORMED, WELL_FORMED};
use super::derive_seed;
use crate::model::Label;

/// How the "original" training labels are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// A fixed share of task families carries a flawed labeling script: every
    /// answerable task is labeled with the wrong-formula value and every
    /// unanswerable task with a number computed from imputed inputs.
    Systematic,
    /// Each training task independently, either pushed outside the ±5% band
    /// or with NA toggled.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub families: usize,
    pub train_per_family: usize,
    pub test_per_family: usize,
    pub unanswerable_rate: f64,
    pub corruption_rate: f64,
    pub corruption: CorruptionMode,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            families: 10,
            train_per_family: 40,
            test_per_family: 20,
            unanswerable_rate: 0.2,
            corruption_rate: 0.3,
            corruption: CorruptionMode::Systematic,
        }
    }
}

/// A synthetic calculator question with its answer space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTask {
    pub id: usize,
    pub family: usize,
    pub answerable: bool,
    /// Clinically correct label y*.
    pub gold: Label,
    /// Label the original-label arm trains on.
    pub corrupted: Label,
    pub is_corrupted: bool,
    /// Answer produced by each template, indexed like `Template::ALL`.
    pub answers: Vec<Label>,
}

impl ToyTask {
    pub fn answer(&self, template: Template) -> &Label {
        &self.answers[template.index()]
    }

    pub fn start_state(&self) -> ToyState {
        ToyState::Start {
            family: self.family,
            answerable: self.answerable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub spec: TaskSpec,
    pub train: Vec<ToyTask>,
    pub test: Vec<ToyTask>,
    /// Families whose labeling script is flawed (systematic mode).
    pub flawed_families: Vec<usize>,
}

impl TaskSet {
    pub fn corruption_fraction(&self) -> f64 {
        if self.train.is_empty() {
            return 0.0;
        }
        self.train.iter().filter(|t| t.is_corrupted).count() as f64 / self.train.len() as f64
    }
}

fn real(v: f64) -> Label {
    Label::Real(Decimal::from_f64(v).unwrap_or_default().round_dp(3).normalize())
}

/// Generates train and test tasks. Families differ in value range and in how
/// far their wrong-formula answer lands from the truth.
pub fn generate_tasks(spec: &TaskSpec, seed: u64) -> TaskSet {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7a5c]));
    let overshoot: Vec<f64> = (0..spec.families).map(|_| rng.random_range(0.2..0.6)).collect();
    let scale: Vec<f64> = (0..spec.families).map(|_| rng.random_range(5.0..150.0)).collect();
    let n_flawed = match spec.corruption {
        CorruptionMode::Systematic => ((spec.corruption_rate * spec.families as f64).ceil() as usize).min(spec.families),
        CorruptionMode::Iid => 0,
    };
    let mut order: Vec<usize> = (0..spec.families).collect();
    order.shuffle(&mut rng);
    let mut flawed_families: Vec<usize> = order.into_iter().take(n_flawed).collect();
    flawed_families.sort_unstable();

    let make = |id: usize, family: usize, train: bool, rng: &mut ChaCha8Rng| {
        let answerable = rng.random::<f64>() >= spec.unanswerable_rate;
        let value = scale[family] * rng.random_range(0.5..1.5);
        let guess_factor = if rng.random::<bool>() { rng.random_range(0.2..0.7) } else { rng.random_range(1.5..3.0) };
        let answers = vec![
            real(value),
            real(value * (1.0 + overshoot[family])),
            real(value * 2.2046),
            Label::Na,
            real(value * guess_factor),
        ];
        let gold = if answerable { answers[0].clone() } else { Label::Na };
        let mut corrupted = gold.clone();
        if train {
            match spec.corruption {
                CorruptionMode::Systematic if flawed_families.contains(&family) => {
                    corrupted = if answerable { answers[1].clone() } else { answers[0].clone() };
                }
                CorruptionMode::Iid if rng.random::<f64>() < spec.corruption_rate => {
                    corrupted = if rng.random::<f64>() < 0.25 {
                        if answerable { Label::Na } else { answers[0].clone() }
                    } else if answerable {
                        let factor = if rng.random::<bool>() { rng.random_range(1.1..1.6) } else { rng.random_range(0.4..0.9) };
                        real(value * factor)
                    } else {
                        answers[0].clone()
                    };
                }
                _ => {}
            }
        }
        ToyTask {
            id,
            family,
            answerable,
            is_corrupted: corrupted != gold,
            gold,
            corrupted,
            answers,
        }
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut id = 0;
    for family in 0..spec.families {
        for _ in 0..spec.train_per_family {
            train.push(make(id, family, true, &mut rng));
            id += 1;
        }
    }
    for family in 0..spec.families {
        for _ in 0..spec.test_per_family {
            test.push(make(id, family, false, &mut rng));
            id += 1;
        }
    }
    TaskSet {
        spec: *spec,
        train,
        test,
        flawed_families,
    }
}

/// One sampled episode: a format token then, budget permitting, a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: usize,
    pub family: usize,
    pub answerable: bool,
    /// Action indices per step.
    pub actions: Vec<usize>,
    /// `None` when unparsable.
    pub answer: Option<Label>,
    pub reward: f64,
    pub group: usize,
}

impl Trajectory {
    /// States visited, aligned with `actions`.
    pub fn states(&self) -> Vec<ToyState> {
        let mut out = vec![ToyState::Start {
            family: self.family,
            answerable: self.answerable,
        }];
        if self.actions.len() > 1 {
            out.push(ToyState::Answer {
                family: self.family,
                answerable: self.answerable,
                well_formed: self.actions[0] == WELL_FORMED,
            });
        }
        out
    }
}

/// Samples one episode. A malformed format token, or a token budget too small
/// to reach the answer, leaves the answer unparsable.
pub fn rollout<R: Rng>(policy: &PolicyParams, task: &ToyTask, max_tokens: usize, rng: &mut R) -> (Vec<usize>, Option<Label>) {
    let mut actions = Vec::with_capacity(2);
    if max_tokens == 0 {
        return (actions, None);
    }
    let start = task.start_state();
    let fmt = sample_index(&policy.probs(&start), rng);
    actions.push(fmt);
    if max_tokens < 2 {
        return (actions, None);
    }
    let answer_state = ToyState::Answer {
        family: task.family,
        answerable: task.answerable,
        well_formed: fmt == WELL_FORMED,
    };
    let template = sample_index(&policy.probs(&answer_state), rng);
    actions.push(template);
    let answer = (fmt != MALFORMED).then(|| task.answers[template].clone());
    (actions, answer)
}
