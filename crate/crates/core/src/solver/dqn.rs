use rand::{Rng, RngCore};

use super::{
    evaluate_policy, evaluation_episodes, validate_epsilon, CurvePoint, EpsilonSchedule,
    ReplayBuffer, ScalarisedSolver, SolverError, SolverResult, Transition,
};
use crate::ccs::WeightVector;
use crate::momdp::Environment;
use crate::nn::{
    argmax, scalarised_rows, stack_rows, train_step, AdamState, ArchitectureTemplate, QNetwork,
    TrainOptions,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub episodes: usize,
    pub anneal_episodes: usize,
    pub parallel_episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub target_sync_episodes: usize,
    pub grad_clip: Option<f64>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for DqnConfig {
    /// Deep sea treasure lengths: anneal over 3000 episodes, 6000 in total.
    fn default() -> Self {
        Self {
            episodes: 6000,
            anneal_episodes: 3000,
            parallel_episodes: 32,
            replay_capacity: 10_000,
            batch_size: 32,
            learning_rate: 1e-3,
            target_sync_episodes: 100,
            grad_clip: None,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
        }
    }
}

impl DqnConfig {
    /// Mountain car lengths: anneal over 2000 episodes, 4000 in total.
    pub fn mountain_car() -> Self {
        Self::default().with_episodes(4000)
    }

    /// Total episodes per solve; annealing covers the first half.
    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self.anneal_episodes = episodes / 2;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("episodes", self.episodes),
            ("parallel_episodes", self.parallel_episodes),
            ("replay_capacity", self.replay_capacity),
            ("batch_size", self.batch_size),
            ("target_sync_episodes", self.target_sync_episodes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(SolverError::Config(format!("{name} must be positive")));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(SolverError::Config("learning_rate must be positive".into()));
        }
        validate_epsilon(self.epsilon_start, self.epsilon_end)?;
        Ok(())
    }
}

/// Scalarised deep Q-learning with vector targets.
#[derive(Clone, Debug)]
pub struct DeepQSolver<E> {
    env: E,
    template: ArchitectureTemplate,
    config: DqnConfig,
}

impl<E: Environment> DeepQSolver<E> {
    pub fn new(
        env: E,
        template: ArchitectureTemplate,
        config: DqnConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if template.input_len() != env.observation_shape().len() {
            return Err(SolverError::Config(format!(
                "template takes {} inputs but observations have {}",
                template.input_len(),
                env.observation_shape().len()
            )));
        }
        Ok(Self {
            env,
            template,
            config,
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    fn check_model(&self, model: &QNetwork) -> Result<(), SolverError> {
        if model.template() != &self.template
            || model.num_actions() != self.env.num_actions()
            || model.num_objectives() != self.env.num_objectives()
        {
            return Err(crate::nn::NnError::ArchitectureMismatch.into());
        }
        Ok(())
    }
}

impl<E: Environment> ScalarisedSolver for DeepQSolver<E> {
    type Model = QNetwork;

    fn num_objectives(&self) -> usize {
        self.env.num_objectives()
    }

    fn fresh_model(&self, rng: &mut dyn RngCore) -> Result<QNetwork, SolverError> {
        Ok(QNetwork::new(
            self.template.clone(),
            self.env.num_actions(),
            self.env.num_objectives(),
            rng,
        )?)
    }

    fn reset_head(&self, model: &mut QNetwork, rng: &mut dyn RngCore) {
        model.reinit_last_layer(rng);
    }

    fn solve(
        &mut self,
        w: &WeightVector,
        model: QNetwork,
        rng: &mut dyn RngCore,
    ) -> Result<SolverResult<QNetwork>, SolverError> {
        self.check_model(&model)?;
        let cfg = &self.config;
        let schedule = EpsilonSchedule {
            start: cfg.epsilon_start,
            end: cfg.epsilon_end,
            ..EpsilonSchedule::new(cfg.anneal_episodes, cfg.episodes)
        };
        let n = self.env.num_objectives();
        let num_actions = self.env.num_actions();
        let width = model.input_len();
        let gamma = self.env.gamma();
        let options = TrainOptions {
            gamma,
            grad_clip: cfg.grad_clip,
        };

        let mut net = model;
        let mut target = net.clone();
        let mut adam = AdamState::new(cfg.learning_rate);
        let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
        let mut curve = Vec::with_capacity(cfg.episodes);
        let mut envs: Vec<E> = vec![self.env.clone(); cfg.parallel_episodes];

        let mut episode = 0;
        while episode < cfg.episodes {
            let count = cfg.parallel_episodes.min(cfg.episodes - episode);
            let eps: Vec<f64> = (0..count).map(|i| schedule.value(episode + i)).collect();
            let mut obs: Vec<Vec<f64>> = envs[..count]
                .iter_mut()
                .map(|e| e.reset(rng).as_slice().to_vec())
                .collect();
            let mut active: Vec<usize> = (0..count).collect();
            let mut returns = vec![0.0; count];
            let mut discounts = vec![1.0; count];
            let mut loss_sum = vec![0.0; count];
            let mut loss_steps = vec![0usize; count];

            while !active.is_empty() {
                let x = stack_rows(active.iter().map(|&i| obs[i].as_slice()), width);
                let q = net.forward_batch(x.view())?;
                let mut still = Vec::with_capacity(active.len());
                for (row, &i) in active.iter().enumerate() {
                    let action = if rng.gen::<f64>() < eps[i] {
                        rng.gen_range(0..num_actions)
                    } else {
                        let q_row = q.row(row);
                        argmax(&scalarised_rows(
                            q_row.as_slice().expect("standard layout"),
                            n,
                            w,
                        ))
                    };
                    let step = envs[i].step(action)?;
                    let next = step.observation.as_slice().to_vec();
                    returns[i] += discounts[i] * w.dot(step.reward.components())?;
                    discounts[i] *= gamma;
                    let done = step.done();
                    buffer.push(Transition {
                        observation: std::mem::replace(&mut obs[i], next.clone()),
                        action,
                        reward: step.reward,
                        next_observation: next,
                        terminal: step.terminal,
                    });
                    if !done {
                        still.push(i);
                    }
                }
                if let Some(batch) = buffer.sample(cfg.batch_size, rng) {
                    let loss = train_step(&mut net, &target, &batch, w, &mut adam, options)
                        .map_err(|source| SolverError::Diverged {
                            episode,
                            weight: w.components().to_vec(),
                            source,
                        })?;
                    for &i in &active {
                        loss_sum[i] += loss;
                        loss_steps[i] += 1;
                    }
                }
                active = still;
            }

            for i in 0..count {
                curve.push(CurvePoint {
                    episode: episode + i,
                    epsilon: eps[i],
                    loss: (loss_steps[i] > 0).then(|| loss_sum[i] / loss_steps[i] as f64),
                    scalarised_return: returns[i],
                });
            }
            let before = episode / cfg.target_sync_episodes;
            episode += count;
            if episode / cfg.target_sync_episodes > before {
                target.copy_from(&net)?;
            }
        }

        let value = evaluate_policy(&self.env, &net, w, evaluation_episodes(&self.env), rng)?;
        Ok(SolverResult {
            value,
            model: net,
            curve,
        })
    }
}
