use rand::Rng;
use serde::{Deserialize, Serialize};

/// Format token: whether the answer tag is well formed.
pub const FORMAT_ACTIONS: usize = 2;
pub const WELL_FORMED: usize = 0;
pub const MALFORMED: usize = 1;

/// Answer strategies available at the second step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Extracts every input and applies the correct formula.
    ComputeFull,
    /// A systematically wrong formula (e.g. a double-counted term).
    DoubleAdd,
    /// Correct formula with a unit conversion slip.
    UnitSlip,
    Abstain,
    /// An unrelated number.
    Guess,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::ComputeFull,
        Template::DoubleAdd,
        Template::UnitSlip,
        Template::Abstain,
        Template::Guess,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).expect("listed")
    }
}

pub const TEMPLATE_ACTIONS: usize = Template::ALL.len();

/// A decision point of the two-token episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToyState {
    Start { family: usize, answerable: bool },
    Answer { family: usize, answerable: bool, well_formed: bool },
}

/// Parameter layout of the linear-softmax policy over `families` task
/// families. Features are a one-hot of (family, answerable), a shared
/// answerable one-hot and, at the answer step, the format token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub families: usize,
}

impl Layout {
    fn start_dim(&self) -> usize {
        2 * self.families + 2
    }

    fn answer_dim(&self) -> usize {
        2 * self.families + 4
    }

    pub fn n_params(&self) -> usize {
        FORMAT_ACTIONS * self.start_dim() + TEMPLATE_ACTIONS * self.answer_dim()
    }

    pub fn n_actions(&self, state: &ToyState) -> usize {
        match state {
            ToyState::Start { .. } => FORMAT_ACTIONS,
            ToyState::Answer { .. } => TEMPLATE_ACTIONS,
        }
    }

    /// Active feature indices (all features are 0/1).
    fn features(&self, state: &ToyState) -> (usize, usize, [Option<usize>; 3]) {
        let cell = |family: usize, answerable: bool| 2 * family + usize::from(answerable);
        let shared = |answerable: bool| 2 * self.families + usize::from(answerable);
        match *state {
            ToyState::Start { family, answerable } => {
                (0, self.start_dim(), [Some(cell(family, answerable)), Some(shared(answerable)), None])
            }
            ToyState::Answer { family, answerable, well_formed } => (
                FORMAT_ACTIONS * self.start_dim(),
                self.answer_dim(),
                [
                    Some(cell(family, answerable)),
                    Some(shared(answerable)),
                    Some(2 * self.families + 2 + usize::from(well_formed)),
                ],
            ),
        }
    }

    /// Index of `theta` holding the weight of `feature` for `action`.
    fn index(&self, state: &ToyState, action: usize, feature: usize) -> usize {
        let (base, dim, _) = self.features(state);
        base + action * dim + feature
    }

    /// Parameter indices touched by `action` in `state`.
    pub fn active(&self, state: &ToyState, action: usize) -> impl Iterator<Item = usize> + '_ {
        let (_, _, feats) = self.features(state);
        let state = *state;
        feats.into_iter().flatten().map(move |f| self.index(&state, action, f))
    }

    /// Logits divided by `temperature`.
    pub fn logits(&self, theta: &[f64], state: &ToyState, temperature: f64) -> Vec<f64> {
        (0..self.n_actions(state))
            .map(|a| self.active(state, a).map(|i| theta[i]).sum::<f64>() / temperature)
            .collect()
    }

    pub fn probs(&self, theta: &[f64], state: &ToyState, temperature: f64) -> Vec<f64> {
        softmax(&self.logits(theta, state, temperature))
    }

    pub fn log_probs(&self, theta: &[f64], state: &ToyState, temperature: f64) -> Vec<f64> {
        log_softmax(&self.logits(theta, state, temperature))
    }

    /// Parameters of the untrained "base model": mostly well-formed output
    /// and a mild preference for computing over abstaining, shared across
    /// families.
    pub fn base_model(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.n_params()];
        for answerable in [false, true] {
            let start = ToyState::Start { family: 0, answerable };
            let shared = 2 * self.families + usize::from(answerable);
            theta[self.index(&start, WELL_FORMED, shared)] = 1.0;
            let answer = ToyState::Answer { family: 0, answerable, well_formed: true };
            let prefs = if answerable {
                [0.6, 0.4, 0.0, -0.4, 0.0]
            } else {
                [0.5, 0.2, 0.0, 0.0, 0.2]
            };
            for (a, p) in prefs.into_iter().enumerate() {
                theta[self.index(&answer, a, shared)] = p;
            }
        }
        theta
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Draws an index from a probability vector.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Trainable policy plus the frozen reference it is regularized towards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub layout: Layout,
    pub theta: Vec<f64>,
    reference: Vec<f64>,
    pub temperature: f64,
}

impl PolicyParams {
    /// Starts from `theta` with the reference frozen at the same point.
    pub fn new(layout: Layout, theta: Vec<f64>, temperature: f64) -> Self {
        assert_eq!(theta.len(), layout.n_params(), "parameter vector does not match layout");
        Self {
            layout,
            reference: theta.clone(),
            theta,
            temperature,
        }
    }

    pub fn with_reference(layout: Layout, theta: Vec<f64>, reference: Vec<f64>, temperature: f64) -> Self {
        assert_eq!(theta.len(), layout.n_params());
        assert_eq!(reference.len(), layout.n_params());
        Self {
            layout,
            theta,
            reference,
            temperature,
        }
    }

    pub fn base_model(families: usize, temperature: f64) -> Self {
        let layout = Layout { families };
        Self::new(layout, layout.base_model(), temperature)
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn probs(&self, state: &ToyState) -> Vec<f64> {
        self.layout.probs(&self.theta, state, self.temperature)
    }

    pub fn reference_probs(&self, state: &ToyState) -> Vec<f64> {
        self.layout.probs(&self.reference, state, self.temperature)
    }
}
