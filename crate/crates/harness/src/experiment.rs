//! Seeded DOL runs scored against a reference CCS.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use molsrl_core::ccs::PartialCcs;
use molsrl_core::dol::{run_dol, DolConfig, ReuseMode};
use molsrl_core::momdp::{DeepSea, Environment, MountainCar};
use molsrl_core::nn::{ArchitectureTemplate, QNetwork};
use molsrl_core::planner::{exact_ccs, max_ccs_error, DeterministicPolicy, ExactSolver};
use molsrl_core::solver::{
    CurvePoint, DeepQSolver, QTable, ScalarisedSolver, TabularConfig, TabularSolver,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, EnvKind, ExperimentConfig};
use crate::HarnessError;

/// Generator for one seed: stream `seed` of the master key, so seeds never
/// share or shift each other's draws.
pub fn seed_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

/// The CCS learnt models are scored against: exact planning on deep sea,
/// a converged tabular run on mountain car.
pub fn reference_ccs(config: &ExperimentConfig) -> Result<PartialCcs, HarnessError> {
    let fail = |e: &dyn std::fmt::Display| HarnessError::Reference(e.to_string());
    if config.environment.is_deep_sea() {
        let model = config
            .deep_sea_config()?
            .explicit_model()
            .map_err(|e| fail(&e))?;
        return exact_ccs(&model).map_err(|e| fail(&e));
    }
    let env = MountainCar::new(config.mountain_car_config()?).map_err(|e| fail(&e))?;
    let tabular = TabularConfig {
        alpha: config.tabular.alpha,
        epsilon_start: config.tabular.epsilon_start,
        epsilon_end: config.tabular.epsilon_end,
        ..TabularConfig::default().with_episodes(config.reference.mc_tabular_episodes)
    };
    let mut solver = TabularSolver::new(env, tabular).map_err(|e| fail(&e))?;
    let dol = DolConfig {
        tau: 0.0,
        max_iterations: 100,
        reuse: ReuseMode::None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.reference.mc_seed);
    Ok(run_dol(&mut solver, &dol, &mut rng)
        .map_err(|e| fail(&e))?
        .ccs)
}

/// Serialised form of a learnt model, if it has one.
trait ExportModel {
    fn export(&self, seed: u64) -> Option<Vec<u8>>;
}

impl ExportModel for QNetwork {
    fn export(&self, seed: u64) -> Option<Vec<u8>> {
        Some(self.to_bytes(Some(seed)))
    }
}

impl ExportModel for QTable {
    fn export(&self, _seed: u64) -> Option<Vec<u8>> {
        None
    }
}

impl ExportModel for DeterministicPolicy {
    fn export(&self, _seed: u64) -> Option<Vec<u8>> {
        None
    }
}

/// One outer-loop iteration as written to `iterations.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub weight: Vec<f64>,
    pub priority: f64,
    pub value: Vec<f64>,
    pub accepted: bool,
    pub ccs_size: usize,
    pub queue_size: usize,
    pub removed: usize,
    pub max_ccs_error: f64,
    pub error_weight: Vec<f64>,
    /// Hash naming the stored model file.
    pub model: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<IterationRow>,
    pub ccs: PartialCcs,
    /// S after each iteration.
    pub history: Vec<PartialCcs>,
    pub curves: Vec<Vec<CurvePoint>>,
    pub models: Vec<(String, Vec<u8>)>,
    pub queue_exhausted: bool,
    pub elapsed: Duration,
}

impl SeedRun {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.max_ccs_error).collect()
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.max_ccs_error)
    }
}

pub fn model_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn drive<S>(
    solver: &mut S,
    config: &ExperimentConfig,
    seed: u64,
    truth: &PartialCcs,
) -> Result<SeedRun, HarnessError>
where
    S: ScalarisedSolver,
    S::Model: ExportModel,
{
    let started = Instant::now();
    let fail = |message: String| HarnessError::Run { seed, message };
    let mut rng = seed_rng(config.master_seed, seed);
    let outcome =
        run_dol(solver, &config.dol_config(), &mut rng).map_err(|e| fail(e.to_string()))?;

    let mut rows = Vec::with_capacity(outcome.log.records.len());
    let mut curves = Vec::with_capacity(outcome.log.records.len());
    let mut history = Vec::with_capacity(outcome.log.records.len());
    let mut models = Vec::new();
    for record in &outcome.log.records {
        let error = max_ccs_error(truth, &record.ccs, config.grid_points)
            .map_err(|e| fail(e.to_string()))?;
        let mut model = None;
        if record.accepted {
            let stored = outcome
                .models
                .get(&record.weight)
                .and_then(|m| m.export(seed));
            if let Some(bytes) = stored {
                let hash = model_hash(&bytes);
                model = Some(hash.clone());
                models.push((hash, bytes));
            }
        }
        rows.push(IterationRow {
            iteration: record.iteration,
            weight: record.weight.components().to_vec(),
            priority: record.priority,
            value: record.value.components().to_vec(),
            accepted: record.accepted,
            ccs_size: record.ccs.len(),
            queue_size: record.queue.len(),
            removed: record.removed.len(),
            max_ccs_error: error.value,
            error_weight: error.weight.components().to_vec(),
            model,
        });
        curves.push(record.training_curve.clone());
        history.push(record.ccs.clone());
    }
    Ok(SeedRun {
        seed,
        rows,
        ccs: outcome.ccs,
        history,
        curves,
        models,
        queue_exhausted: outcome.queue_exhausted,
        elapsed: started.elapsed(),
    })
}

fn deep<E: Environment>(
    env: E,
    config: &ExperimentConfig,
    seed: u64,
    truth: &PartialCcs,
) -> Result<SeedRun, HarnessError> {
    let template = ArchitectureTemplate::for_shape(env.observation_shape());
    let mut solver = DeepQSolver::new(env, template, config.dqn_config())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    drive(&mut solver, config, seed, truth)
}

fn tabular<E: Environment>(
    env: E,
    config: &ExperimentConfig,
    seed: u64,
    truth: &PartialCcs,
) -> Result<SeedRun, HarnessError> {
    let mut solver = TabularSolver::new(env, config.tabular_config())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    drive(&mut solver, config, seed, truth)
}

/// One DOL run for `seed`, with the error after every iteration.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    truth: &PartialCcs,
) -> Result<SeedRun, HarnessError> {
    let env_error = |e: molsrl_core::momdp::EnvError| HarnessError::Config(e.to_string());
    match (config.environment, config.algorithm) {
        (EnvKind::MountainCar, Algorithm::Exact) => Err(HarnessError::Config(
            "the exact planner needs an explicit model; mc has none".into(),
        )),
        (EnvKind::MountainCar, alg) => {
            let env = MountainCar::new(config.mountain_car_config()?).map_err(env_error)?;
            if alg == Algorithm::Tabular {
                tabular(env, config, seed, truth)
            } else {
                deep(env, config, seed, truth)
            }
        }
        (_, Algorithm::Exact) => {
            let model = config
                .deep_sea_config()?
                .explicit_model()
                .map_err(env_error)?;
            drive(&mut ExactSolver::new(model), config, seed, truth)
        }
        (_, Algorithm::Tabular) => tabular(
            DeepSea::new(config.deep_sea_config()?).map_err(env_error)?,
            config,
            seed,
            truth,
        ),
        _ => deep(
            DeepSea::new(config.deep_sea_config()?).map_err(env_error)?,
            config,
            seed,
            truth,
        ),
    }
}

/// Error curve point aggregated over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    /// Episode budget spent by the end of this iteration.
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Mean and population standard deviation per iteration. A run that
/// stopped early keeps its last error for the remaining iterations.
pub fn summarise(errors: &[Vec<f64>], episodes_per_iteration: usize) -> Vec<CurveRow> {
    let length = errors.iter().map(Vec::len).max().unwrap_or(0);
    (0..length)
        .map(|i| {
            let values: Vec<f64> = errors
                .iter()
                .filter_map(|e| e.get(i).or(e.last()).copied())
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            CurveRow {
                iteration: i + 1,
                episodes: (i + 1) * episodes_per_iteration,
                mean,
                std: var.sqrt(),
                runs: values.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub truth: PartialCcs,
    pub runs: Vec<SeedRun>,
    pub curve: Vec<CurveRow>,
}

impl ExperimentResult {
    pub fn final_errors(&self) -> Vec<f64> {
        self.runs.iter().map(SeedRun::final_error).collect()
    }

    pub fn mean_final_error(&self) -> f64 {
        let e = self.final_errors();
        e.iter().sum::<f64>() / e.len() as f64
    }

    /// Mean error after `iteration` (1-based), carrying early finishers forward.
    pub fn mean_error_at(&self, iteration: usize) -> Option<f64> {
        let errors: Vec<Vec<f64>> = self.runs.iter().map(SeedRun::errors).collect();
        let n = errors.iter().filter(|e| !e.is_empty()).count();
        if n == 0 || iteration == 0 {
            return None;
        }
        let total: f64 = errors
            .iter()
            .filter_map(|e| e.get(iteration - 1).or(e.last()))
            .sum();
        Some(total / n as f64)
    }
}

/// Number of seeds run at once.
fn workers(jobs: usize) -> usize {
    std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs)
        .max(1)
}

/// Every seed of `config` against `truth`; seeds run in parallel and the
/// results come back in seed order.
pub fn run_experiment(
    config: &ExperimentConfig,
    truth: &PartialCcs,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let seeds = &config.seeds;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SeedRun, HarnessError>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers(seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else {
                    break;
                };
                let result = run_seed(config, seed, truth);
                slots.lock().expect("no worker panicked")[i] = Some(result);
            });
        }
    });
    let runs = slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let errors: Vec<Vec<f64>> = runs.iter().map(SeedRun::errors).collect();
    let episodes = if config.algorithm == Algorithm::Exact {
        0
    } else {
        config.episodes()
    };
    Ok(ExperimentResult {
        truth: truth.clone(),
        curve: summarise(&errors, episodes),
        runs,
    })
}

/// Final error for one episode budget, aggregated over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

pub fn sweep_row(episodes: usize, result: &ExperimentResult) -> SweepRow {
    let finals = result.final_errors();
    let row = summarise(
        &finals.iter().map(|&e| vec![e]).collect::<Vec<_>>(),
        episodes,
    );
    SweepRow {
        episodes,
        mean: row[0].mean,
        std: row[0].std,
        runs: row[0].runs,
    }
}
