//! A small dense/convolutional Q-network with hand-written backprop.
//!
//! The network maps an observation to an `|A| x n` matrix of vector
//! Q-values. Parameters are `f64` throughout so gradient checks can run at
//! full precision.

mod adam;
mod gradcheck;
mod io;
mod layer;
mod train;

pub use adam::AdamState;
pub use gradcheck::{
    gradient_check, gradient_check_with, GradientCheckOptions, GradientCheckReport,
};
pub use io::NetworkHeader;
pub use train::{dqn_loss_and_gradient, train_step, TrainOptions};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccs::WeightVector;
use crate::momdp::{Observation, ObservationShape};
use layer::{Layer, LayerCache, LayerKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("input shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("network architectures differ")]
    ArchitectureMismatch,
    #[error("invalid architecture: {0}")]
    InvalidTemplate(String),
    #[error("non-finite values during {context}")]
    NonFinite { context: String },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("malformed network file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

/// Layer layout of a Q-network, minus the `|A| * n` output head which is
/// fixed when the network is built.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArchitectureTemplate {
    Mlp {
        input_dim: usize,
        hidden: Vec<usize>,
    },
    Conv {
        channels: usize,
        rows: usize,
        cols: usize,
        convs: Vec<ConvSpec>,
        hidden: Vec<usize>,
    },
}

impl ArchitectureTemplate {
    /// One hidden layer of 100 ReLU units.
    pub fn mlp(input_dim: usize) -> Self {
        ArchitectureTemplate::Mlp {
            input_dim,
            hidden: vec![100],
        }
    }

    /// 16@3x3 and 32@3x3 valid convolutions, then a dense layer of 100.
    pub fn conv(channels: usize, rows: usize, cols: usize) -> Self {
        ArchitectureTemplate::Conv {
            channels,
            rows,
            cols,
            convs: vec![
                ConvSpec {
                    filters: 16,
                    kernel: 3,
                },
                ConvSpec {
                    filters: 32,
                    kernel: 3,
                },
            ],
            hidden: vec![100],
        }
    }

    /// The default template for an observation shape.
    pub fn for_shape(shape: ObservationShape) -> Self {
        match shape {
            ObservationShape::Flat(d) => Self::mlp(d),
            ObservationShape::Image {
                channels,
                rows,
                cols,
            } => Self::conv(channels, rows, cols),
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            ArchitectureTemplate::Mlp { input_dim, .. } => *input_dim,
            ArchitectureTemplate::Conv {
                channels,
                rows,
                cols,
                ..
            } => channels * rows * cols,
        }
    }

    fn build(&self, outputs: usize, rng: &mut dyn RngCore) -> Result<Vec<Layer>, NnError> {
        let mut layers = Vec::new();
        let (mut width, hidden) = match self {
            ArchitectureTemplate::Mlp { input_dim, hidden } => (*input_dim, hidden),
            ArchitectureTemplate::Conv {
                channels,
                rows,
                cols,
                convs,
                hidden,
            } => {
                let (mut c, mut h, mut w) = (*channels, *rows, *cols);
                for spec in convs {
                    if spec.kernel == 0 || spec.kernel > h || spec.kernel > w || spec.filters == 0 {
                        return Err(NnError::InvalidTemplate(format!(
                            "{}x{} kernel does not fit a {h}x{w} input",
                            spec.kernel, spec.kernel
                        )));
                    }
                    let kind = LayerKind::Conv {
                        in_channels: c,
                        rows: h,
                        cols: w,
                        kernel: spec.kernel,
                    };
                    layers.push(Layer::he_uniform(
                        kind,
                        spec.filters,
                        c * spec.kernel * spec.kernel,
                        true,
                        1.0,
                        rng,
                    ));
                    c = spec.filters;
                    h -= spec.kernel - 1;
                    w -= spec.kernel - 1;
                }
                (c * h * w, hidden)
            }
        };
        if width == 0 || outputs == 0 {
            return Err(NnError::InvalidTemplate(
                "zero-width input or output".into(),
            ));
        }
        for &units in hidden {
            if units == 0 {
                return Err(NnError::InvalidTemplate("zero-width hidden layer".into()));
            }
            layers.push(Layer::he_uniform(
                LayerKind::Dense,
                units,
                width,
                true,
                1.0,
                rng,
            ));
            width = units;
        }
        layers.push(Layer::he_uniform(
            LayerKind::Dense,
            outputs,
            width,
            false,
            HEAD_INIT_SCALE,
            rng,
        ));
        Ok(layers)
    }
}

/// `|A| x n` vector Q-values for one observation, row-major by action.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    pub actions: usize,
    pub objectives: usize,
    pub values: Vec<f64>,
}

impl QMatrix {
    pub fn row(&self, action: usize) -> &[f64] {
        &self.values[action * self.objectives..(action + 1) * self.objectives]
    }

    pub fn scalarised(&self, w: &WeightVector) -> Vec<f64> {
        scalarised_rows(&self.values, self.objectives, w)
    }

    /// Action maximising `w . Q(a)`, lowest index on ties.
    pub fn greedy(&self, w: &WeightVector) -> usize {
        argmax(&self.scalarised(w))
    }
}

pub(crate) fn scalarised_rows(values: &[f64], objectives: usize, w: &WeightVector) -> Vec<f64> {
    values
        .chunks_exact(objectives)
        .map(|row| row.iter().zip(w.components()).map(|(q, w)| q * w).sum())
        .collect()
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-layer `(weight, bias)` gradients, mirroring the network layout.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.iter().chain(b.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|g| g * factor);
            b.mapv_inplace(|g| g * factor);
        }
    }

    /// Flattened in the same order as [`QNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

/// Intermediate activations from a training forward pass.
pub(crate) struct Tape {
    caches: Vec<LayerCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    template: ArchitectureTemplate,
    num_actions: usize,
    num_objectives: usize,
    layers: Vec<Layer>,
}

impl QNetwork {
    /// Fresh network: He-uniform weights, zero biases.
    pub fn new(
        template: ArchitectureTemplate,
        num_actions: usize,
        num_objectives: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, NnError> {
        let layers = template.build(num_actions * num_objectives, rng)?;
        Ok(Self {
            template,
            num_actions,
            num_objectives,
            layers,
        })
    }

    pub fn template(&self) -> &ArchitectureTemplate {
        &self.template
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    pub fn input_len(&self) -> usize {
        self.template.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.num_actions * self.num_objectives
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn same_architecture(&self, other: &QNetwork) -> bool {
        self.template == other.template
            && self.num_actions == other.num_actions
            && self.num_objectives == other.num_objectives
    }

    pub fn forward(&self, obs: &Observation) -> Result<QMatrix, NnError> {
        let x = obs.as_slice();
        if x.len() != self.input_len() {
            return Err(NnError::ShapeMismatch {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        let input = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        let out = self.forward_batch(input)?;
        Ok(QMatrix {
            actions: self.num_actions,
            objectives: self.num_objectives,
            values: out.into_raw_vec_and_offset().0,
        })
    }

    /// Batched forward pass: `B x input_len` to `B x (|A| * n)`.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        if inputs.ncols() != self.input_len() {
            return Err(NnError::ShapeMismatch {
                expected: self.input_len(),
                got: inputs.ncols(),
            });
        }
        let mut x = inputs.as_standard_layout().into_owned();
        for layer in &self.layers {
            x = layer.forward(&x, false).0;
        }
        Ok(x)
    }

    pub(crate) fn forward_train(&self, inputs: Array2<f64>) -> (Array2<f64>, Tape) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = inputs;
        for layer in &self.layers {
            let (out, cache) = layer.forward(&x, true);
            caches.push(cache.expect("cache requested"));
            x = out;
        }
        (x, Tape { caches })
    }

    pub(crate) fn backward(&self, tape: &Tape, d_out: Array2<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_out;
        for (i, (layer, cache)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            let (dw, db, dx) = layer.backward(cache, d, i > 0);
            grads.push((dw, db));
            d = dx.unwrap_or_else(|| Array2::zeros((0, 0)));
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// ReLU on/off pattern of every hidden unit for one input batch.
    pub(crate) fn activation_pattern(&self, inputs: ArrayView2<f64>) -> Vec<bool> {
        let mut x = inputs.as_standard_layout().into_owned();
        let mut pattern = Vec::new();
        for layer in &self.layers {
            x = layer.forward(&x, false).0;
            if layer.relu {
                pattern.extend(x.iter().map(|&v| v > 0.0));
            }
        }
        pattern
    }

    /// Redraws the output layer from the initialisation distribution and
    /// zeroes its bias. Earlier layers are untouched.
    pub fn reinit_last_layer(&mut self, rng: &mut dyn RngCore) {
        let last = self.layers.last_mut().expect("network has an output layer");
        last.reinit(rng);
    }

    /// Deep copy of `source`'s parameters into `self`.
    pub fn copy_from(&mut self, source: &QNetwork) -> Result<(), NnError> {
        if !self.same_architecture(source) {
            return Err(NnError::ArchitectureMismatch);
        }
        self.layers.clone_from(&source.layers);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.weight
                    .iter()
                    .chain(l.bias.iter())
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.parameter_count() {
            return Err(NnError::ShapeMismatch {
                expected: self.parameter_count(),
                got: values.len(),
            });
        }
        let mut rest = values;
        for layer in &mut self.layers {
            for t in [
                layer.weight.as_slice_mut().expect("standard layout"),
                layer.bias.as_slice_mut().expect("standard layout"),
            ] {
                let (head, tail) = rest.split_at(t.len());
                t.copy_from_slice(head);
                rest = tail;
            }
        }
        Ok(())
    }

    /// Parameters of layer `index` as `(weight, bias)`.
    pub fn layer_parameters(&self, index: usize) -> (&Array2<f64>, &Array1<f64>) {
        let l = &self.layers[index];
        (&l.weight, &l.bias)
    }

    pub fn layer_parameters_mut(&mut self, index: usize) -> (&mut Array2<f64>, &mut Array1<f64>) {
        let l = &mut self.layers[index];
        (&mut l.weight, &mut l.bias)
    }

    pub(crate) fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.shape().to_vec(), l.bias.shape().to_vec()])
            .collect()
    }

    pub(crate) fn apply_update<F>(&mut self, grads: &Gradients, mut update: F)
    where
        F: FnMut(usize, &mut [f64], &[f64]),
    {
        for (i, (layer, (gw, gb))) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            update(
                2 * i,
                layer.weight.as_slice_mut().expect("standard layout"),
                gw.as_slice().expect("standard layout"),
            );
            update(
                2 * i + 1,
                layer.bias.as_slice_mut().expect("standard layout"),
                gb.as_slice().expect("standard layout"),
            );
        }
    }
}

/// Stacks flat observations into a `B x d` matrix.
pub fn stack_rows<'a, I>(rows: I, width: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), data).expect("rows have equal width")
}

/// The linear output layer starts near zero so the first bootstrapped
/// targets are not dominated by initial noise.
pub const HEAD_INIT_SCALE: f64 = 0.01;

pub(crate) fn he_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

pub(crate) fn fill_uniform(values: &mut [f64], bound: f64, rng: &mut dyn RngCore) {
    for v in values {
        *v = rng.gen_range(-bound..bound);
    }
}

pub(crate) fn sum_rows(a: &Array2<f64>) -> Array1<f64> {
    a.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_head_gives_zero_q() {
        let mut net = QNetwork::new(ArchitectureTemplate::mlp(2), 4, 2, &mut rng(0)).unwrap();
        let last = net.num_layers() - 1;
        let (w, b) = net.layer_parameters_mut(last);
        w.fill(0.0);
        b.fill(0.0);
        let q = net.forward(&Observation::Raw(vec![0.3, 0.9])).unwrap();
        assert_eq!(q.values, vec![0.0; 8]);
    }

    #[test]
    fn hand_set_tiny_mlp() {
        // 1 -> 1 (ReLU) -> 2 actions x 2 objectives.
        let template = ArchitectureTemplate::Mlp {
            input_dim: 1,
            hidden: vec![1],
        };
        let mut net = QNetwork::new(template, 2, 2, &mut rng(0)).unwrap();
        {
            let (w, b) = net.layer_parameters_mut(0);
            *w = array![[2.0]];
            *b = array![-1.0];
        }
        {
            let (w, b) = net.layer_parameters_mut(1);
            *w = array![[1.0], [-1.0], [0.5], [3.0]];
            *b = array![0.0, 1.0, 2.0, -1.0];
        }
        // x = 1.5: hidden = relu(2*1.5 - 1) = 2.
        let q = net.forward(&Observation::Raw(vec![1.5])).unwrap();
        assert_eq!(q.values, vec![2.0, -1.0, 3.0, 5.0]);
        // x = 0.2: hidden = relu(-0.6) = 0, output = bias.
        let q = net.forward(&Observation::Raw(vec![0.2])).unwrap();
        assert_eq!(q.values, vec![0.0, 1.0, 2.0, -1.0]);
        assert_eq!(q.greedy(&WeightVector::two(1.0)), 1);
        assert_eq!(q.greedy(&WeightVector::two(0.0)), 0);
    }

    #[test]
    fn batch_equals_single_forward() {
        let net = QNetwork::new(ArchitectureTemplate::conv(3, 6, 5), 4, 2, &mut rng(1)).unwrap();
        let mut r = rng(2);
        let obs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..90).map(|_| r.gen_range(0.0..1.0)).collect())
            .collect();
        let batch = stack_rows(obs.iter().map(Vec::as_slice), 90);
        let out = net.forward_batch(batch.view()).unwrap();
        for (i, o) in obs.iter().enumerate() {
            let single = net.forward(&Observation::Raw(o.clone())).unwrap();
            for (a, b) in out.row(i).iter().zip(&single.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = QNetwork::new(ArchitectureTemplate::mlp(2), 4, 2, &mut rng(0)).unwrap();
        let err = net
            .forward(&Observation::Raw(vec![1.0, 2.0, 3.0]))
            .unwrap_err();
        assert_eq!(
            err,
            NnError::ShapeMismatch {
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn clone_is_independent() {
        let mut net = QNetwork::new(ArchitectureTemplate::mlp(2), 3, 2, &mut rng(0)).unwrap();
        let copy = net.clone();
        net.layer_parameters_mut(0).0.fill(7.0);
        assert_ne!(copy.parameters(), net.parameters());
        let mut target = QNetwork::new(ArchitectureTemplate::mlp(2), 3, 2, &mut rng(5)).unwrap();
        target.copy_from(&net).unwrap();
        let obs = Observation::Raw(vec![0.1, 0.4]);
        assert_eq!(target.forward(&obs).unwrap(), net.forward(&obs).unwrap());
        let other = QNetwork::new(ArchitectureTemplate::mlp(3), 3, 2, &mut rng(0)).unwrap();
        assert_eq!(target.copy_from(&other), Err(NnError::ArchitectureMismatch));
    }

    #[test]
    fn reinit_last_layer_only_touches_head() {
        let mut net =
            QNetwork::new(ArchitectureTemplate::conv(3, 11, 10), 4, 2, &mut rng(0)).unwrap();
        let before = net.clone();
        let obs = Observation::Raw(vec![0.5; 330]);
        net.reinit_last_layer(&mut rng(9));
        let last = net.num_layers() - 1;
        for i in 0..last {
            let (w0, b0) = before.layer_parameters(i);
            let (w1, b1) = net.layer_parameters(i);
            assert!(w0.iter().zip(w1).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(b0.iter().zip(b1).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(net.layer_parameters(last).1.iter().all(|&b| b == 0.0));
        assert_ne!(net.forward(&obs).unwrap(), before.forward(&obs).unwrap());

        let mut other = before.clone();
        other.reinit_last_layer(&mut rng(10));
        assert_ne!(other.layer_parameters(last).0, net.layer_parameters(last).0);
    }

    #[test]
    fn he_uniform_bounds() {
        let net = QNetwork::new(ArchitectureTemplate::mlp(2), 4, 2, &mut rng(3)).unwrap();
        let (w0, b0) = net.layer_parameters(0);
        assert!(w0.iter().all(|w| w.abs() <= he_bound(2)));
        assert!(b0.iter().all(|&b| b == 0.0));
        let (w1, _) = net.layer_parameters(1);
        assert!(w1
            .iter()
            .all(|w| w.abs() <= HEAD_INIT_SCALE * he_bound(100)));
        assert!(w1
            .iter()
            .any(|w| w.abs() > 0.5 * HEAD_INIT_SCALE * he_bound(100)));
    }

    #[test]
    fn conv_template_shapes() {
        let net = QNetwork::new(ArchitectureTemplate::conv(3, 11, 10), 4, 2, &mut rng(0)).unwrap();
        let shapes = net.tensor_shapes();
        assert_eq!(shapes[0], vec![16, 27]);
        assert_eq!(shapes[2], vec![32, 144]);
        // 32 channels of 7x6 feed the dense layer.
        assert_eq!(shapes[4], vec![100, 32 * 7 * 6]);
        assert_eq!(shapes[6], vec![8, 100]);
        let bad = ArchitectureTemplate::Conv {
            channels: 1,
            rows: 2,
            cols: 2,
            convs: vec![ConvSpec {
                filters: 1,
                kernel: 3,
            }],
            hidden: vec![],
        };
        assert!(QNetwork::new(bad, 1, 1, &mut rng(0)).is_err());
    }

    #[test]
    fn parameters_round_trip() {
        let mut net = QNetwork::new(ArchitectureTemplate::mlp(2), 4, 2, &mut rng(0)).unwrap();
        let p: Vec<f64> = (0..net.parameter_count()).map(|i| i as f64 * 0.5).collect();
        net.set_parameters(&p).unwrap();
        assert_eq!(net.parameters(), p);
    }
}
