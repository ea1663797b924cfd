//! OLS-compliant single-objective solvers.
//!
//! Each solver takes a fixed scalarisation weight and a starting model and
//! returns the learnt model together with the measured value vector of its
//! greedy policy.

mod dqn;
mod replay;
mod tabular;

pub use dqn::{DeepQSolver, DqnConfig};
pub use replay::{EpsilonSchedule, ReplayBuffer, Transition};
pub use tabular::{QTable, TabularConfig, TabularSolver};

use rand::RngCore;
use thiserror::Error;

use crate::ccs::{CcsError, ValueVector, WeightVector};
use crate::momdp::{ActionId, EnvError, Environment};
use crate::nn::{NnError, QNetwork};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ccs(#[from] CcsError),
    #[error("training diverged at episode {episode} for weight {weight:?}: {source}")]
    Diverged {
        episode: usize,
        weight: Vec<f64>,
        source: NnError,
    },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// One training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub epsilon: f64,
    /// Mean loss of the gradient steps taken while this episode ran.
    pub loss: Option<f64>,
    /// Discounted scalarised return of the (exploring) episode.
    pub scalarised_return: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult<M> {
    /// Rollout value of the greedy policy from the start state.
    pub value: ValueVector,
    pub model: M,
    pub curve: Vec<CurvePoint>,
}

pub(crate) fn validate_epsilon(start: f64, end: f64) -> Result<(), SolverError> {
    for (name, v) in [("epsilon_start", start), ("epsilon_end", end)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(SolverError::Config(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(())
}

/// A single-objective solver usable inside the OLS loop.
pub trait ScalarisedSolver {
    type Model: Clone;

    fn num_objectives(&self) -> usize;

    /// A randomly initialised model.
    fn fresh_model(&self, rng: &mut dyn RngCore) -> Result<Self::Model, SolverError>;

    /// Partial reuse: reinitialise the part of `model` tied to the old
    /// weight. A no-op for models without such a part.
    fn reset_head(&self, _model: &mut Self::Model, _rng: &mut dyn RngCore) {}

    fn solve(
        &mut self,
        w: &WeightVector,
        model: Self::Model,
        rng: &mut dyn RngCore,
    ) -> Result<SolverResult<Self::Model>, SolverError>;
}

/// Something that picks a greedy action for the environment's current state.
pub trait GreedyPolicy<E: Environment> {
    fn act(&self, env: &E, w: &WeightVector) -> Result<ActionId, SolverError>;
}

impl<E: Environment> GreedyPolicy<E> for QNetwork {
    fn act(&self, env: &E, w: &WeightVector) -> Result<ActionId, SolverError> {
        Ok(self.forward(&env.observe())?.greedy(w))
    }
}

impl<E: Environment> GreedyPolicy<E> for QTable {
    fn act(&self, env: &E, w: &WeightVector) -> Result<ActionId, SolverError> {
        Ok(self.greedy(env.state_index(), w))
    }
}

/// Rollouts needed for a faithful value estimate.
pub fn evaluation_episodes<E: Environment>(env: &E) -> usize {
    if env.is_deterministic() {
        1
    } else {
        32
    }
}

/// Mean discounted vector return of the greedy policy over `episodes`
/// rollouts from the start state.
pub fn evaluate_policy<E, P>(
    env: &E,
    policy: &P,
    w: &WeightVector,
    episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<ValueVector, SolverError>
where
    E: Environment,
    P: GreedyPolicy<E> + ?Sized,
{
    if episodes == 0 {
        return Err(SolverError::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let n = env.num_objectives();
    let gamma = env.gamma();
    let mut total = vec![0.0; n];
    let mut env = env.clone();
    for _ in 0..episodes {
        env.reset(rng);
        let mut discount = 1.0;
        loop {
            let a = policy.act(&env, w)?;
            let step = env.step(a)?;
            for (t, r) in total.iter_mut().zip(step.reward.components()) {
                *t += discount * r;
            }
            discount *= gamma;
            if step.done() {
                break;
            }
        }
    }
    for t in &mut total {
        *t /= episodes as f64;
    }
    Ok(ValueVector::new(total)?)
}


#[cfg(test)]
mod tests {
    use super::test_envs::Chain;
    use super::*;
    use crate::momdp::{DeepSea, DeepSeaConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<ActionId>);

    impl GreedyPolicy<DeepSea> for Fixed {
        fn act(&self, env: &DeepSea, _w: &WeightVector) -> Result<ActionId, SolverError> {
            Ok(self.0[env.steps()])
        }
    }

    #[test]
    fn down_once_in_deep_sea() {
        let env = DeepSea::new(DeepSeaConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v =
            evaluate_policy(&env, &Fixed(vec![1]), &WeightVector::two(0.5), 1, &mut rng).unwrap();
        assert_eq!(v.components(), &[0.1, -1.0 / 200.0]);
        let again =
            evaluate_policy(&env, &Fixed(vec![1]), &WeightVector::two(0.5), 1, &mut rng).unwrap();
        assert_eq!(v.components(), again.components());
    }

    #[test]
    fn zero_discount_sees_first_reward_only() {
        struct Always(ActionId);
        impl GreedyPolicy<Chain> for Always {
            fn act(&self, _: &Chain, _: &WeightVector) -> Result<ActionId, SolverError> {
                Ok(self.0)
            }
        }
        let env = Chain::new(5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = evaluate_policy(&env, &Always(1), &WeightVector::two(0.5), 1, &mut rng).unwrap();
        assert_eq!(v.components(), &[0.0, 1.0]);
    }
}
