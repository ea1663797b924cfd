use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{scalarised_rows, NnError, QNetwork};
use crate::ccs::WeightVector;
use crate::momdp::Observation;

/// Networks above this size are checked on a sample of entries per tensor.
const FULL_CHECK_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheckOptions {
    pub step: f64,
    /// Floor on the relative-error denominator so near-zero gradients
    /// are compared absolutely.
    pub denominator_floor: f64,
    /// Check at most this many entries of each weight/bias tensor.
    pub max_entries_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradientCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            denominator_floor: 1e-6,
            max_entries_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Entries skipped because the perturbation crossed a ReLU kink.
    pub skipped: usize,
}

fn check_loss(values: &[f64], n: usize, w: &WeightVector) -> f64 {
    0.5 * scalarised_rows(values, n, w)
        .iter()
        .map(|s| s * s)
        .sum::<f64>()
}

/// Max relative error between backprop and central differences for
/// `L = 0.5 * sum_a (w . Q(obs, a))^2`. Large networks are sampled.
pub fn gradient_check(net: &QNetwork, obs: &Observation, w: &WeightVector) -> Result<f64, NnError> {
    let options = GradientCheckOptions {
        max_entries_per_tensor: (net.parameter_count() > FULL_CHECK_LIMIT).then_some(256),
        ..GradientCheckOptions::default()
    };
    Ok(gradient_check_with(net, obs, w, options)?.max_relative_error)
}

pub fn gradient_check_with(
    net: &QNetwork,
    obs: &Observation,
    w: &WeightVector,
    options: GradientCheckOptions,
) -> Result<GradientCheckReport, NnError> {
    let x = obs.as_slice();
    if x.len() != net.input_len() {
        return Err(NnError::ShapeMismatch {
            expected: net.input_len(),
            got: x.len(),
        });
    }
    let n = net.num_objectives();
    let input = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");

    let (q, tape) = net.forward_train(input.to_owned());
    let q = q.row(0).to_vec();
    let s = scalarised_rows(&q, n, w);
    let mut d_out = Array2::zeros((1, q.len()));
    for (a, s_a) in s.iter().enumerate() {
        for (k, w_k) in w.components().iter().enumerate() {
            d_out[[0, a * n + k]] = s_a * w_k;
        }
    }
    let grads = net.backward(&tape, d_out);
    let base_pattern = net.activation_pattern(input);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut probe = net.clone();
    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let h = options.step;
    for (layer, (gw, gb)) in grads.layers.iter().enumerate() {
        for (is_bias, analytic) in [
            (false, gw.as_slice().expect("standard")),
            (true, gb.as_slice().expect("standard")),
        ] {
            let indices: Vec<usize> = match options.max_entries_per_tensor {
                Some(m) if m < analytic.len() => {
                    let mut v = sample(&mut rng, analytic.len(), m).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..analytic.len()).collect(),
            };
            for i in indices {
                let mut eval = |delta: f64| {
                    let (pw, pb) = probe.layer_parameters_mut(layer);
                    let slot = if is_bias {
                        &mut pb.as_slice_mut().expect("standard")[i]
                    } else {
                        &mut pw.as_slice_mut().expect("standard")[i]
                    };
                    let original = *slot;
                    *slot = original + delta;
                    let out = probe.forward_batch(input).expect("shape checked");
                    let pattern = probe.activation_pattern(input);
                    let (pw, pb) = probe.layer_parameters_mut(layer);
                    if is_bias {
                        pb.as_slice_mut().expect("standard")[i] = original;
                    } else {
                        pw.as_slice_mut().expect("standard")[i] = original;
                    }
                    (check_loss(out.as_slice().expect("standard"), n, w), pattern)
                };
                let (up, up_pattern) = eval(h);
                let (down, down_pattern) = eval(-h);
                if up_pattern != base_pattern || down_pattern != base_pattern {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[i];
                let denom = a.abs().max(numeric.abs()).max(options.denominator_floor);
                let rel = (a - numeric).abs() / denom;
                if !rel.is_finite() {
                    return Err(NnError::NonFinite {
                        context: format!("gradient check of layer {layer} entry {i}"),
                    });
                }
                report.max_relative_error = report.max_relative_error.max(rel);
                report.checked += 1;
            }
        }
    }
    Ok(report)
}
