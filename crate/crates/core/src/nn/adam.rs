use super::{Gradients, QNetwork};

/// Adam moment estimates for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Forget accumulated moments, e.g. after the network is swapped out.
    pub fn reset(&mut self) {
        self.step = 0;
        self.m.clear();
        self.v.clear();
    }

    pub fn apply(&mut self, net: &mut QNetwork, grads: &Gradients) {
        if self.m.len() != grads.layers.len() * 2 {
            self.m = grads
                .layers
                .iter()
                .flat_map(|(w, b)| [vec![0.0; w.len()], vec![0.0; b.len()]])
                .collect();
            self.v = self.m.clone();
            self.step = 0;
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        let lr = self.learning_rate;
        let (m, v) = (&mut self.m, &mut self.v);
        net.apply_update(grads, |i, params, g| {
            for ((p, &g), (m, v)) in params
                .iter_mut()
                .zip(g)
                .zip(m[i].iter_mut().zip(v[i].iter_mut()))
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        });
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-3)
    }
}
