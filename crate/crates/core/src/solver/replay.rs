use rand::{Rng, RngCore};

use crate::momdp::{ActionId, RewardVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: ActionId,
    pub reward: RewardVector,
    pub next_observation: Vec<f64>,
    /// `next_observation` is terminal; truncated episodes are not.
    pub terminal: bool,
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Adds a transition, overwriting the oldest once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `size` uniform draws, or `None` while fewer than `size` transitions are stored.
    pub fn sample(&self, size: usize, rng: &mut dyn RngCore) -> Option<Vec<&Transition>> {
        if self.items.len() < size || size == 0 {
            return None;
        }
        Some(
            (0..size)
                .map(|_| &self.items[rng.gen_range(0..self.items.len())])
                .collect(),
        )
    }
}

/// Linear exploration decay from `start` to `end`, then constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
    pub total_episodes: usize,
}

impl EpsilonSchedule {
    pub fn new(anneal_episodes: usize, total_episodes: usize) -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            anneal_episodes,
            total_episodes,
        }
    }

    pub fn value(&self, episode: usize) -> f64 {
        if episode >= self.anneal_episodes {
            return self.end;
        }
        let t = episode as f64 / self.anneal_episodes as f64;
        self.start + (self.end - self.start) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item(tag: usize) -> Transition {
        Transition {
            observation: vec![tag as f64],
            action: 0,
            reward: RewardVector(vec![0.0, 0.0]),
            next_observation: vec![0.0],
            terminal: false,
        }
    }

    #[test]
    fn epsilon_schedule_points() {
        let s = EpsilonSchedule::new(3000, 6000);
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(3000) - 0.05).abs() < 1e-15);
        assert!((s.value(1500) - 0.525).abs() < 1e-12);
        assert_eq!(s.value(5999), 0.05);
    }

    #[test]
    fn ring_buffer_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(item(i));
        }
        assert_eq!(buf.len(), 3);
        let mut tags: Vec<f64> = buf.items.iter().map(|t| t.observation[0]).collect();
        tags.sort_by(f64::total_cmp);
        assert_eq!(tags, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn no_sampling_below_batch_size() {
        let mut buf = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        buf.push(item(0));
        assert!(buf.sample(2, &mut rng).is_none());
        buf.push(item(1));
        assert_eq!(buf.sample(2, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(item(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws / 10 {
            for t in buf.sample(10, &mut rng).unwrap() {
                counts[t.observation[0] as usize] += 1;
            }
        }
        let p = 0.1;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }
}
