use ndarray::Array2;

use super::{argmax, scalarised_rows, stack_rows, AdamState, Gradients, NnError, QNetwork};
use crate::ccs::WeightVector;
use crate::solver::Transition;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub gamma: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub grad_clip: Option<f64>,
}

/// Vector TD targets `r + gamma * Q(s', a*)` with `a*` greedy on `w` under
/// `target`; just `r` for terminal transitions. One row per transition.
pub fn td_targets(
    target: &QNetwork,
    batch: &[&Transition],
    w: &WeightVector,
    gamma: f64,
) -> Result<Array2<f64>, NnError> {
    let n = target.num_objectives();
    let next = stack_rows(
        batch.iter().map(|t| t.next_observation.as_slice()),
        target.input_len(),
    );
    let q_next = target.forward_batch(next.view())?;
    let mut y = Array2::zeros((batch.len(), n));
    for (i, t) in batch.iter().enumerate() {
        let mut row = y.row_mut(i);
        for k in 0..n {
            row[k] = t.reward.components()[k];
        }
        if !t.terminal {
            let q = q_next.row(i);
            let q = q.as_slice().expect("standard layout");
            let best = argmax(&scalarised_rows(q, n, w));
            for k in 0..n {
                row[k] += gamma * q[best * n + k];
            }
        }
    }
    Ok(y)
}

/// Mean squared componentwise TD error over the batch and its gradient
/// with respect to the online network.
pub fn dqn_loss_and_gradient(
    net: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    w: &WeightVector,
    gamma: f64,
) -> Result<(f64, Gradients), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    if !net.same_architecture(target) {
        return Err(NnError::ArchitectureMismatch);
    }
    if let Some(t) = batch.iter().find(|t| {
        t.observation.len() != net.input_len() || t.next_observation.len() != net.input_len()
    }) {
        return Err(NnError::ShapeMismatch {
            expected: net.input_len(),
            got: t.observation.len().max(t.next_observation.len()),
        });
    }
    let n = net.num_objectives();
    let y = td_targets(target, batch, w, gamma)?;
    let x = stack_rows(
        batch.iter().map(|t| t.observation.as_slice()),
        net.input_len(),
    );
    let (q, tape) = net.forward_train(x);
    let scale = 1.0 / (batch.len() * n) as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        for k in 0..n {
            let col = t.action * n + k;
            let err = q[[i, col]] - y[[i, k]];
            loss += err * err;
            d_out[[i, col]] = 2.0 * err * scale;
        }
    }
    Ok((loss * scale, net.backward(&tape, d_out)))
}

/// One Adam step on the DQN loss. Returns the loss before the update.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    w: &WeightVector,
    adam: &mut AdamState,
    options: TrainOptions,
) -> Result<f64, NnError> {
    let (loss, mut grads) = dqn_loss_and_gradient(net, target, batch, w, options.gamma)?;
    if !loss.is_finite() {
        return Err(NnError::NonFinite {
            context: format!(
                "loss {loss} on a batch of {} at weight {:?} after {} updates",
                batch.len(),
                w.components(),
                adam.steps()
            ),
        });
    }
    if let Some(limit) = options.grad_clip {
        let norm = grads.global_norm();
        if norm > limit {
            grads.scale(limit / norm);
        }
    }
    adam.apply(net, &grads);
    if !net.is_finite() {
        return Err(NnError::NonFinite {
            context: format!("parameters after update {}", adam.steps()),
        });
    }
    Ok(loss)
}
