//! Multi-objective environments and explicit tabular models.
//!
//! Two benchmarks live here: a multi-objective mountain car (time and fuel)
//! and deep sea treasure (treasure and time), the latter with both raw
//! coordinate and image observations. [`MomdpModel`] is the explicit
//! deterministic model used by the exact planner.

mod deep_sea;
mod mountain_car;

pub use deep_sea::{DeepSea, DeepSeaConfig, DeepSeaMap, Move, DEEP_SEA_MAP, DEEP_SEA_TREASURES};
pub use mountain_car::{MountainCar, MountainCarConfig, MountainCarState};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ActionId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("action {action} out of range for {num_actions} actions")]
    InvalidAction {
        action: ActionId,
        num_actions: usize,
    },
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

/// Immediate per-objective reward of one transition.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardVector(pub Vec<f64>);

impl RewardVector {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dense `channels x rows x cols` tensor stored in channel-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ImageTensor {
    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            channels,
            rows,
            cols,
            data: vec![0.0; channels * rows * cols],
        }
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.rows + row) * self.cols + col]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.rows + row) * self.cols + col] = value;
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let len = self.rows * self.cols;
        &self.data[channel * len..(channel + 1) * len]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Raw(Vec<f64>),
    Image(ImageTensor),
}

impl Observation {
    /// Flat view of the observation, as fed to a network.
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Observation::Raw(values) => values,
            Observation::Image(image) => &image.data,
        }
    }

    pub fn shape(&self) -> ObservationShape {
        match self {
            Observation::Raw(values) => ObservationShape::Flat(values.len()),
            Observation::Image(image) => ObservationShape::Image {
                channels: image.channels,
                rows: image.rows,
                cols: image.cols,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationShape {
    Flat(usize),
    Image {
        channels: usize,
        rows: usize,
        cols: usize,
    },
}

impl ObservationShape {
    pub fn len(&self) -> usize {
        match *self {
            ObservationShape::Flat(d) => d,
            ObservationShape::Image {
                channels,
                rows,
                cols,
            } => channels * rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    #[default]
    Raw,
    Image,
}

/// Outcome of a single environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: RewardVector,
    /// A true terminal state was reached; no bootstrapping past it.
    pub terminal: bool,
    /// The horizon cap ended the episode without reaching a terminal state.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Episodic multi-objective environment.
///
/// Instances are independent: batched rollouts clone one prototype per
/// parallel episode.
pub trait Environment: Clone {
    fn num_objectives(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn observation_shape(&self) -> ObservationShape;
    fn gamma(&self) -> f64;
    fn horizon(&self) -> usize;
    /// True when transitions and the start state are both deterministic.
    fn is_deterministic(&self) -> bool;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Observation;
    fn step(&mut self, action: ActionId) -> Result<Step, EnvError>;
    fn observe(&self) -> Observation;
    /// Discretised index of the current state, for tabular methods.
    fn state_index(&self) -> usize;
    fn num_state_indices(&self) -> usize;
}

/// Explicit deterministic MOMDP with vector rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct MomdpModel {
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    next: Vec<usize>,
    rewards: Vec<f64>,
    terminal: Vec<bool>,
    start: usize,
    gamma: f64,
    horizon: usize,
}

impl MomdpModel {
    /// Builds a model from row-major `(state, action)` tables.
    ///
    /// Terminal states are forced to absorb with zero reward.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_objectives: usize,
        next: Vec<usize>,
        mut rewards: Vec<f64>,
        terminal: Vec<bool>,
        start: usize,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self, EnvError> {
        let pairs = num_states * num_actions;
        if next.len() != pairs || rewards.len() != pairs * num_objectives {
            return Err(EnvError::Config(format!(
                "transition/reward tables must cover all {pairs} state-action pairs"
            )));
        }
        if terminal.len() != num_states || start >= num_states {
            return Err(EnvError::Config(
                "terminal table or start state out of range".into(),
            ));
        }
        if let Some(&bad) = next.iter().find(|&&s| s >= num_states) {
            return Err(EnvError::Config(format!("successor {bad} out of range")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(EnvError::Config(format!("discount {gamma} outside [0, 1]")));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(EnvError::Config("non-finite reward".into()));
        }
        let mut next = next;
        for s in (0..num_states).filter(|&s| terminal[s]) {
            for a in 0..num_actions {
                next[s * num_actions + a] = s;
                let base = (s * num_actions + a) * num_objectives;
                rewards[base..base + num_objectives].fill(0.0);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            num_objectives,
            next,
            rewards,
            terminal,
            start,
            gamma,
            horizon,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn next_state(&self, state: usize, action: ActionId) -> usize {
        self.next[state * self.num_actions + action]
    }

    pub fn reward(&self, state: usize, action: ActionId) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_objectives;
        &self.rewards[base..base + self.num_objectives]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    /// Same model with a different discount factor.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}
