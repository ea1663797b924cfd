use rand::{Rng, RngCore};

use super::{ActionId, EnvError, Environment, Observation, ObservationShape, RewardVector, Step};

pub const POSITION_MIN: f64 = -1.2;
pub const POSITION_MAX: f64 = 0.6;
pub const VELOCITY_MAX: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;
const HILL_FREQ: f64 = 3.0;

/// Engine force of each action: push left, coast, push right.
pub const ACTION_FORCES: [f64; 3] = [-1.0, 0.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MountainCarConfig {
    pub horizon: usize,
    pub gamma: f64,
    /// Fuel cost per unit of force; `None` means `1 / horizon`.
    pub fuel_coefficient: Option<f64>,
    /// Draw the start position uniformly from [-0.6, -0.4] instead of -0.5.
    pub random_start: bool,
    /// Tabular discretisation of (position, velocity).
    pub grid: (usize, usize),
}

impl Default for MountainCarConfig {
    fn default() -> Self {
        Self {
            horizon: 200,
            gamma: 0.97,
            fuel_coefficient: None,
            random_start: false,
            grid: (40, 40),
        }
    }
}

impl MountainCarConfig {
    pub fn fuel_coefficient(&self) -> f64 {
        self.fuel_coefficient.unwrap_or(1.0 / self.horizon as f64)
    }
}

/// Mountain car with two objectives: time to reach the right hilltop, and
/// fuel spent pushing.
///
/// Rewards are `(time, fuel)` with time `-1/H` per step (0 on the step that
/// reaches the goal) and fuel `-c * |force|`.
#[derive(Clone, Debug)]
pub struct MountainCar {
    config: MountainCarConfig,
    state: MountainCarState,
    steps: usize,
    done: bool,
}

impl MountainCar {
    pub fn new(config: MountainCarConfig) -> Result<Self, EnvError> {
        if config.horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.gamma) {
            return Err(EnvError::Config(format!(
                "gamma {} outside [0, 1]",
                config.gamma
            )));
        }
        if config.grid.0 == 0 || config.grid.1 == 0 {
            return Err(EnvError::Config(
                "discretisation grid must be non-empty".into(),
            ));
        }
        if config.fuel_coefficient().is_nan() || config.fuel_coefficient() < 0.0 {
            return Err(EnvError::Config(
                "fuel coefficient must be non-negative".into(),
            ));
        }
        Ok(Self {
            config,
            state: MountainCarState {
                position: -0.5,
                velocity: 0.0,
            },
            steps: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &MountainCarConfig {
        &self.config
    }

    pub fn state(&self) -> MountainCarState {
        self.state
    }

    pub fn set_state(&mut self, state: MountainCarState) {
        self.state = state;
        self.steps = 0;
        self.done = state.position >= GOAL_POSITION;
    }

    /// One application of the classic dynamics.
    pub fn dynamics(state: MountainCarState, force: f64) -> MountainCarState {
        let mut velocity =
            state.velocity + FORCE * force - GRAVITY * (HILL_FREQ * state.position).cos();
        velocity = velocity.clamp(-VELOCITY_MAX, VELOCITY_MAX);
        let position = (state.position + velocity).clamp(POSITION_MIN, POSITION_MAX);
        if position <= POSITION_MIN && velocity < 0.0 {
            velocity = 0.0;
        }
        MountainCarState { position, velocity }
    }
}

fn bucket(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((value - lo) / (hi - lo) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

impl Environment for MountainCar {
    fn num_objectives(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        ACTION_FORCES.len()
    }

    fn observation_shape(&self) -> ObservationShape {
        ObservationShape::Flat(2)
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn is_deterministic(&self) -> bool {
        !self.config.random_start
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Observation {
        let position = if self.config.random_start {
            rng.gen_range(-0.6..-0.4)
        } else {
            -0.5
        };
        self.state = MountainCarState {
            position,
            velocity: 0.0,
        };
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: ActionId) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let force = *ACTION_FORCES.get(action).ok_or(EnvError::InvalidAction {
            action,
            num_actions: ACTION_FORCES.len(),
        })?;
        self.state = Self::dynamics(self.state, force);
        self.steps += 1;
        let terminal = self.state.position >= GOAL_POSITION;
        let truncated = !terminal && self.steps >= self.config.horizon;
        self.done = terminal || truncated;
        let time = if terminal {
            0.0
        } else {
            -1.0 / self.config.horizon as f64
        };
        let fuel = -self.config.fuel_coefficient() * force.abs();
        Ok(Step {
            observation: self.observe(),
            reward: RewardVector(vec![time, fuel]),
            terminal,
            truncated,
        })
    }

    fn observe(&self) -> Observation {
        Observation::Raw(vec![self.state.position, self.state.velocity])
    }

    fn state_index(&self) -> usize {
        let (np, nv) = self.config.grid;
        let p = bucket(self.state.position, POSITION_MIN, POSITION_MAX, np);
        let v = bucket(self.state.velocity, -VELOCITY_MAX, VELOCITY_MAX, nv);
        p * nv + v
    }

    fn num_state_indices(&self) -> usize {
        self.config.grid.0 * self.config.grid.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_start() {
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        let obs = env.reset(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(obs, Observation::Raw(vec![-0.5, 0.0]));
        assert!(env.is_deterministic());
    }

    #[test]
    fn neutral_step_follows_gravity() {
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let step = env.step(1).unwrap();
        let v = -0.0025 * (-1.5f64).cos();
        let s = env.state();
        assert_eq!(s.velocity, v);
        assert_eq!(s.position, -0.5 + v);
        assert_eq!(step.reward.components(), &[-1.0 / 200.0, 0.0]);
    }

    #[test]
    fn pushing_costs_fuel() {
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let step = env.step(2).unwrap();
        assert_eq!(step.reward.components()[1], -1.0 / 200.0);
        let step = env.step(0).unwrap();
        assert_eq!(step.reward.components()[1], -1.0 / 200.0);
    }

    #[test]
    fn left_wall_stops_car() {
        let s = MountainCar::dynamics(
            MountainCarState {
                position: -1.19,
                velocity: -0.05,
            },
            -1.0,
        );
        assert_eq!(s.position, POSITION_MIN);
        assert_eq!(s.velocity, 0.0);
    }

    #[test]
    fn bang_bang_reaches_goal_with_zero_time_reward() {
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let mut last = None;
        for _ in 0..200 {
            let a = if env.state().velocity >= 0.0 { 2 } else { 0 };
            let step = env.step(a).unwrap();
            if step.done() {
                last = Some(step);
                break;
            }
        }
        let last = last.unwrap();
        assert!(last.terminal);
        assert_eq!(last.reward.components()[0], 0.0);
        assert!(env.state().position >= GOAL_POSITION);
    }

    #[test]
    fn state_bounds_hold_under_random_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut env = MountainCar::new(MountainCarConfig {
            random_start: true,
            ..MountainCarConfig::default()
        })
        .unwrap();
        for _ in 0..20 {
            env.reset(&mut rng);
            loop {
                let step = env.step(rng.gen_range(0..3)).unwrap();
                let s = env.state();
                assert!((POSITION_MIN..=POSITION_MAX).contains(&s.position));
                assert!((-VELOCITY_MAX..=VELOCITY_MAX).contains(&s.velocity));
                assert!(env.state_index() < env.num_state_indices());
                if step.done() {
                    break;
                }
            }
        }
    }
}
