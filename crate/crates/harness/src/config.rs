//! Experiment configuration, read from TOML.

use std::path::Path;

use molsrl_core::dol::{DolConfig, ReuseMode};
use molsrl_core::momdp::{DeepSeaConfig, MountainCarConfig, ObservationMode};
use molsrl_core::planner::DEFAULT_GRID_POINTS;
use molsrl_core::solver::{DqnConfig, TabularConfig};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum EnvKind {
    #[serde(rename = "mc")]
    #[value(name = "mc")]
    MountainCar,
    #[serde(rename = "dst-raw")]
    #[value(name = "dst-raw")]
    DeepSeaRaw,
    #[serde(rename = "dst-image")]
    #[value(name = "dst-image")]
    DeepSeaImage,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mc",
            EnvKind::DeepSeaRaw => "dst-raw",
            EnvKind::DeepSeaImage => "dst-image",
        }
    }

    pub fn is_deep_sea(self) -> bool {
        !matches!(self, EnvKind::MountainCar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dol,
    DolFr,
    DolPr,
    Exact,
    Tabular,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dol => "dol",
            Algorithm::DolFr => "dol-fr",
            Algorithm::DolPr => "dol-pr",
            Algorithm::Exact => "exact",
            Algorithm::Tabular => "tabular",
        }
    }

    pub fn reuse(self) -> ReuseMode {
        match self {
            Algorithm::DolFr => ReuseMode::Full,
            Algorithm::DolPr => ReuseMode::Partial,
            _ => ReuseMode::None,
        }
    }

    pub fn is_deep(self) -> bool {
        matches!(self, Algorithm::Dol | Algorithm::DolFr | Algorithm::DolPr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSettings {
    pub gamma: f64,
    pub horizon: usize,
    /// Mountain car fuel cost per unit force; 1/horizon when absent.
    pub fuel_coefficient: Option<f64>,
    pub random_start: bool,
    /// Mountain car (position, velocity) bins for tabular learning.
    pub mc_grid: [usize; 2],
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            gamma: 0.97,
            horizon: 200,
            fuel_coefficient: None,
            random_start: false,
            mc_grid: [40, 40],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnSettings {
    /// Half the episode budget when absent.
    pub anneal_episodes: Option<usize>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub parallel_episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub target_sync_episodes: usize,
    pub grad_clip: Option<f64>,
}

impl Default for DqnSettings {
    fn default() -> Self {
        let d = DqnConfig::default();
        Self {
            anneal_episodes: None,
            epsilon_start: d.epsilon_start,
            epsilon_end: d.epsilon_end,
            parallel_episodes: d.parallel_episodes,
            replay_capacity: d.replay_capacity,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            target_sync_episodes: d.target_sync_episodes,
            grad_clip: d.grad_clip,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularSettings {
    pub alpha: f64,
    pub anneal_episodes: Option<usize>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for TabularSettings {
    fn default() -> Self {
        let d = TabularConfig::default();
        Self {
            alpha: d.alpha,
            anneal_episodes: None,
            epsilon_start: d.epsilon_start,
            epsilon_end: d.epsilon_end,
        }
    }
}

/// How the mountain car reference CCS is learnt (it has no explicit model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub mc_tabular_episodes: usize,
    pub mc_seed: u64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            mc_tabular_episodes: 20_000,
            mc_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvKind,
    pub algorithm: Algorithm,
    /// Each seed gets its own stream of a generator keyed by this.
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    /// Per solver call. Defaults: 4000 (mc) and 6000 (dst) for the deep
    /// variants, 20000 (mc) and 150000 (dst) for tabular.
    pub episodes_per_iteration: Option<usize>,
    pub tau: f64,
    pub max_iterations: usize,
    pub grid_points: usize,
    pub env: EnvSettings,
    pub dqn: DqnSettings,
    pub tabular: TabularSettings,
    pub reference: ReferenceSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dol = DolConfig::default();
        Self {
            environment: EnvKind::DeepSeaRaw,
            algorithm: Algorithm::DolPr,
            master_seed: 0,
            seeds: (0..5).collect(),
            episodes_per_iteration: None,
            tau: dol.tau,
            max_iterations: dol.max_iterations,
            grid_points: DEFAULT_GRID_POINTS,
            env: EnvSettings::default(),
            dqn: DqnSettings::default(),
            tabular: TabularSettings::default(),
            reference: ReferenceSettings::default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Defaults as TOML, with optional keys shown commented out.
    pub fn dump_defaults() -> String {
        let mut out = String::new();
        for line in Self::default().to_toml().lines() {
            out.push_str(line);
            out.push('\n');
            match line {
                "grid_points = 10001" => {
                    out.push_str("# episodes_per_iteration = 6000\n");
                }
                "[env]" => out.push_str("# fuel_coefficient = 0.005\n"),
                "[dqn]" => {
                    out.push_str("# anneal_episodes = 3000\n");
                    out.push_str("# grad_clip = 10.0\n");
                }
                "[tabular]" => out.push_str("# anneal_episodes = 30000\n"),
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(config_error("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(config_error("seeds must be distinct"));
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(config_error(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        if self.max_iterations == 0 {
            return Err(config_error("max_iterations must be at least 1"));
        }
        if self.grid_points < 2 {
            return Err(config_error("grid_points must be at least 2"));
        }
        if self.episodes_per_iteration == Some(0) {
            return Err(config_error("episodes_per_iteration must be positive"));
        }
        if self.algorithm == Algorithm::Exact && !self.environment.is_deep_sea() {
            return Err(config_error(
                "the exact planner needs an explicit model; mc has none",
            ));
        }
        if !(0.0..=1.0).contains(&self.env.gamma) {
            return Err(config_error(format!(
                "gamma {} outside [0, 1]",
                self.env.gamma
            )));
        }
        if self.env.horizon == 0 {
            return Err(config_error("horizon must be positive"));
        }
        if self.reference.mc_tabular_episodes == 0 {
            return Err(config_error(
                "reference.mc_tabular_episodes must be positive",
            ));
        }
        if self.algorithm.is_deep() {
            self.dqn_config()
                .validate()
                .map_err(|e| config_error(e.to_string()))?;
        }
        if self.algorithm == Algorithm::Tabular {
            self.tabular_config()
                .validate()
                .map_err(|e| config_error(e.to_string()))?;
        }
        self.mountain_car_config().map(|_| ())?;
        self.deep_sea_config().map(|_| ())
    }

    pub fn episodes(&self) -> usize {
        self.episodes_per_iteration
            .unwrap_or(match (self.algorithm, self.environment) {
                (Algorithm::Tabular, EnvKind::MountainCar) => 20_000,
                (Algorithm::Tabular, _) => 150_000,
                (_, EnvKind::MountainCar) => 4000,
                _ => 6000,
            })
    }

    pub fn dol_config(&self) -> DolConfig {
        DolConfig {
            tau: self.tau,
            max_iterations: self.max_iterations,
            reuse: self.algorithm.reuse(),
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        let episodes = self.episodes();
        DqnConfig {
            episodes,
            anneal_episodes: self.dqn.anneal_episodes.unwrap_or(episodes / 2),
            parallel_episodes: self.dqn.parallel_episodes,
            replay_capacity: self.dqn.replay_capacity,
            batch_size: self.dqn.batch_size,
            learning_rate: self.dqn.learning_rate,
            target_sync_episodes: self.dqn.target_sync_episodes,
            grad_clip: self.dqn.grad_clip,
            epsilon_start: self.dqn.epsilon_start,
            epsilon_end: self.dqn.epsilon_end,
        }
    }

    pub fn tabular_config(&self) -> TabularConfig {
        let episodes = self.episodes();
        TabularConfig {
            episodes,
            anneal_episodes: self.tabular.anneal_episodes.unwrap_or(episodes / 2),
            alpha: self.tabular.alpha,
            epsilon_start: self.tabular.epsilon_start,
            epsilon_end: self.tabular.epsilon_end,
        }
    }

    pub fn mountain_car_config(&self) -> Result<MountainCarConfig, HarnessError> {
        let config = MountainCarConfig {
            horizon: self.env.horizon,
            gamma: self.env.gamma,
            fuel_coefficient: self.env.fuel_coefficient,
            random_start: self.env.random_start,
            grid: (self.env.mc_grid[0], self.env.mc_grid[1]),
        };
        molsrl_core::momdp::MountainCar::new(config.clone())
            .map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }

    pub fn deep_sea_config(&self) -> Result<DeepSeaConfig, HarnessError> {
        let config = DeepSeaConfig {
            horizon: self.env.horizon,
            gamma: self.env.gamma,
            observation_mode: match self.environment {
                EnvKind::DeepSeaImage => ObservationMode::Image,
                _ => ObservationMode::Raw,
            },
            ..DeepSeaConfig::default()
        };
        molsrl_core::momdp::DeepSea::new(config.clone())
            .map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }
}
