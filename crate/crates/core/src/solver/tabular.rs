use rand::{Rng, RngCore};

use super::{
    evaluate_policy, evaluation_episodes, validate_epsilon, CurvePoint, EpsilonSchedule,
    ScalarisedSolver, SolverError, SolverResult,
};
use crate::ccs::WeightVector;
use crate::momdp::Environment;
use crate::nn::{argmax, scalarised_rows};

/// Dense table of vector Q-values over discretised states; unseen entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize, num_objectives: usize) -> Self {
        Self {
            num_states,
            num_actions,
            num_objectives,
            values: vec![0.0; num_states * num_actions * num_objectives],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_objectives;
        &self.values[base..base + self.num_objectives]
    }

    fn row(&self, state: usize) -> &[f64] {
        let width = self.num_actions * self.num_objectives;
        &self.values[state * width..(state + 1) * width]
    }

    /// Greedy action under `w`, lowest index on ties.
    pub fn greedy(&self, state: usize, w: &WeightVector) -> usize {
        argmax(&scalarised_rows(self.row(state), self.num_objectives, w))
    }

    /// Greedy action with exact ties broken uniformly at random.
    fn greedy_random_tie(&self, state: usize, w: &WeightVector, rng: &mut dyn RngCore) -> usize {
        let q = scalarised_rows(self.row(state), self.num_objectives, w);
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..q.len()).filter(|&a| q[a] == best).collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..tied.len())]
        }
    }

    fn nudge(&mut self, state: usize, action: usize, target: &[f64], alpha: f64) {
        let base = (state * self.num_actions + action) * self.num_objectives;
        for (q, y) in self.values[base..base + self.num_objectives]
            .iter_mut()
            .zip(target)
        {
            *q += alpha * (y - *q);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularConfig {
    pub episodes: usize,
    pub anneal_episodes: usize,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            episodes: 6000,
            anneal_episodes: 3000,
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SolverError::Config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.episodes == 0 {
            return Err(SolverError::Config("episodes must be positive".into()));
        }
        validate_epsilon(self.epsilon_start, self.epsilon_end)
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self.anneal_episodes = episodes / 2;
        self
    }
}

/// Vector Q-learning over `Environment::state_index`.
#[derive(Clone, Debug)]
pub struct TabularSolver<E> {
    env: E,
    config: TabularConfig,
}

impl<E: Environment> TabularSolver<E> {
    pub fn new(env: E, config: TabularConfig) -> Result<Self, SolverError> {
        config.validate()?;
        Ok(Self { env, config })
    }

    pub fn env(&self) -> &E {
        &self.env
    }
}

impl<E: Environment> ScalarisedSolver for TabularSolver<E> {
    type Model = QTable;

    fn num_objectives(&self) -> usize {
        self.env.num_objectives()
    }

    fn fresh_model(&self, _rng: &mut dyn RngCore) -> Result<QTable, SolverError> {
        Ok(QTable::zeros(
            self.env.num_state_indices(),
            self.env.num_actions(),
            self.env.num_objectives(),
        ))
    }

    fn solve(
        &mut self,
        w: &WeightVector,
        model: QTable,
        rng: &mut dyn RngCore,
    ) -> Result<SolverResult<QTable>, SolverError> {
        let env = &self.env;
        if model.num_states != env.num_state_indices()
            || model.num_actions != env.num_actions()
            || model.num_objectives != env.num_objectives()
        {
            return Err(SolverError::Config(
                "q-table shape does not match the environment".into(),
            ));
        }
        let schedule = EpsilonSchedule {
            start: self.config.epsilon_start,
            end: self.config.epsilon_end,
            ..EpsilonSchedule::new(self.config.anneal_episodes, self.config.episodes)
        };
        let gamma = env.gamma();
        let alpha = self.config.alpha;
        let mut table = model;
        let mut env = env.clone();
        let mut curve = Vec::with_capacity(self.config.episodes);
        let mut target = vec![0.0; table.num_objectives];

        for episode in 0..self.config.episodes {
            let epsilon = schedule.value(episode);
            env.reset(rng);
            let mut state = env.state_index();
            let mut ret = 0.0;
            let mut discount = 1.0;
            loop {
                let action = if rng.gen::<f64>() < epsilon {
                    rng.gen_range(0..table.num_actions)
                } else {
                    table.greedy_random_tie(state, w, rng)
                };
                let step = env.step(action)?;
                let next = env.state_index();
                let r = step.reward.components();
                target.copy_from_slice(r);
                if !step.terminal {
                    let best = table.greedy(next, w);
                    for (y, q) in target.iter_mut().zip(table.get(next, best)) {
                        *y += gamma * q;
                    }
                }
                table.nudge(state, action, &target, alpha);
                ret += discount * w.dot(r)?;
                discount *= gamma;
                state = next;
                if step.done() {
                    break;
                }
            }
            curve.push(CurvePoint {
                episode,
                epsilon,
                loss: None,
                scalarised_return: ret,
            });
        }

        let value = evaluate_policy(&self.env, &table, w, evaluation_episodes(&self.env), rng)?;
        Ok(SolverResult {
            value,
            model: table,
            curve,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::test_envs::Chain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_step_chain_value() {
        let mut solver = TabularSolver::new(
            Chain::new(2, 0.97),
            TabularConfig::default().with_episodes(500),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let table = solver.fresh_model(&mut rng).unwrap();
        let r = solver
            .solve(&WeightVector::two(1.0), table, &mut rng)
            .unwrap();
        assert_eq!(r.value.components(), &[1.0 + 0.97, 0.0]);
        // Backed-up estimate at the start state: (1, 0) + 0.97 * (1, 0).
        let q = r.model.get(0, 0);
        assert!((q[0] - 1.97).abs() < 1e-6 && q[1].abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn zero_learning_rate_leaves_table_unchanged() {
        let config = TabularConfig {
            alpha: 0.0,
            ..TabularConfig::default().with_episodes(50)
        };
        let mut solver = TabularSolver::new(Chain::new(3, 0.9), config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut table = solver.fresh_model(&mut rng).unwrap();
        table
            .values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i as f64);
        let before = table.clone();
        let r = solver
            .solve(&WeightVector::two(0.5), table, &mut rng)
            .unwrap();
        assert_eq!(r.model, before);
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let t = QTable::zeros(1, 3, 2);
        assert_eq!(t.greedy(0, &WeightVector::two(0.3)), 0);
    }
}
