//! Exact planning on explicit models: scalarised value iteration, vector
//! policy evaluation, the true CCS and the Max CCS Error metric.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ccs::{
    corner_weights, envelope_value, prune, CcsError, PartialCcs, ValueVector, WeightVector,
};
use crate::dol::{run_dol, DolConfig, DolError, ReuseMode};
use crate::momdp::{ActionId, MomdpModel};
use crate::solver::{ScalarisedSolver, SolverError, SolverResult};

/// Value-iteration stopping threshold on the sup-norm change.
pub const VALUE_ITERATION_TOL: f64 = 1e-10;
/// Default Max CCS Error grid size.
pub const DEFAULT_GRID_POINTS: usize = 10_001;

/// Scalar values closer than this count as tied when picking greedy actions.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicPolicy {
    actions: Vec<ActionId>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Self { actions }
    }

    pub fn action(&self, state: usize) -> ActionId {
        self.actions[state]
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }
}

fn greedy_action(
    model: &MomdpModel,
    w: &WeightVector,
    values: &[f64],
    s: usize,
) -> (ActionId, f64) {
    let q: Vec<f64> = (0..model.num_actions())
        .map(|a| {
            let r: f64 = model
                .reward(s, a)
                .iter()
                .zip(w.components())
                .map(|(r, w)| r * w)
                .sum();
            r + model.gamma() * values[model.next_state(s, a)]
        })
        .collect();
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let a = q
        .iter()
        .position(|&v| v >= best - TIE_EPS)
        .expect("at least one action");
    (a, best)
}

/// Discounted value iteration on `w . r` until the largest change is below
/// `tol`; greedy policy with ties to the lowest action.
pub fn scalarised_value_iteration(
    model: &MomdpModel,
    w: &WeightVector,
    tol: f64,
) -> Result<DeterministicPolicy, CcsError> {
    if w.dim() != model.num_objectives() {
        return Err(CcsError::DimensionMismatch {
            left: w.dim(),
            right: model.num_objectives(),
        });
    }
    let n = model.num_states();
    let mut values = vec![0.0; n];
    // An undiscounted model still terminates after `horizon` sweeps.
    let max_sweeps = if model.gamma() < 1.0 {
        usize::MAX
    } else {
        model.horizon().max(1)
    };
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let v = if model.is_terminal(s) {
                    0.0
                } else {
                    greedy_action(model, w, &values, s).1
                };
                change = change.max((v - values[s]).abs());
                v
            })
            .collect();
        values = next;
        if change < tol {
            break;
        }
    }
    let actions = (0..n)
        .map(|s| {
            if model.is_terminal(s) {
                0
            } else {
                greedy_action(model, w, &values, s).0
            }
        })
        .collect();
    Ok(DeterministicPolicy::new(actions))
}

/// Discounted vector return of `policy` from the start state, following
/// the model for at most `horizon` steps.
pub fn policy_eval_vector(
    model: &MomdpModel,
    policy: &DeterministicPolicy,
) -> Result<ValueVector, CcsError> {
    let mut total = vec![0.0; model.num_objectives()];
    let mut discount = 1.0;
    let mut s = model.start();
    for _ in 0..model.horizon() {
        if model.is_terminal(s) {
            break;
        }
        let a = policy.action(s);
        for (t, r) in total.iter_mut().zip(model.reward(s, a)) {
            *t += discount * r;
        }
        discount *= model.gamma();
        s = model.next_state(s, a);
    }
    ValueVector::new(total)
}

/// Same quantity as [`policy_eval_vector`] by `horizon` backward sweeps
/// over every state.
pub fn policy_eval_vector_iterative(
    model: &MomdpModel,
    policy: &DeterministicPolicy,
) -> Result<ValueVector, CcsError> {
    let (ns, no) = (model.num_states(), model.num_objectives());
    let mut values = vec![0.0; ns * no];
    for _ in 0..model.horizon() {
        let mut next = vec![0.0; ns * no];
        for s in (0..ns).filter(|&s| !model.is_terminal(s)) {
            let a = policy.action(s);
            let succ = model.next_state(s, a);
            for k in 0..no {
                next[s * no + k] = model.reward(s, a)[k] + model.gamma() * values[succ * no + k];
            }
        }
        values = next;
    }
    let s = model.start();
    ValueVector::new(values[s * no..(s + 1) * no].to_vec())
}

/// Value iteration plus exact evaluation, as an OLS subroutine.
#[derive(Clone, Debug)]
pub struct ExactSolver {
    model: MomdpModel,
    tol: f64,
    calls: usize,
}

impl ExactSolver {
    pub fn new(model: MomdpModel) -> Self {
        Self {
            model,
            tol: VALUE_ITERATION_TOL,
            calls: 0,
        }
    }

    pub fn model(&self) -> &MomdpModel {
        &self.model
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl ScalarisedSolver for ExactSolver {
    type Model = DeterministicPolicy;

    fn num_objectives(&self) -> usize {
        self.model.num_objectives()
    }

    fn fresh_model(&self, _rng: &mut dyn RngCore) -> Result<DeterministicPolicy, SolverError> {
        Ok(DeterministicPolicy::new(vec![0; self.model.num_states()]))
    }

    fn solve(
        &mut self,
        w: &WeightVector,
        _model: DeterministicPolicy,
        _rng: &mut dyn RngCore,
    ) -> Result<SolverResult<DeterministicPolicy>, SolverError> {
        self.calls += 1;
        let policy = scalarised_value_iteration(&self.model, w, self.tol)?;
        let value = policy_eval_vector(&self.model, &policy)?;
        Ok(SolverResult {
            value,
            model: policy,
            curve: Vec::new(),
        })
    }
}

/// OLS with the exact solver and zero improvement threshold.
pub fn exact_ccs(model: &MomdpModel) -> Result<PartialCcs, DolError> {
    let mut solver = ExactSolver::new(model.clone());
    let config = DolConfig {
        tau: 0.0,
        max_iterations: usize::MAX,
        reuse: ReuseMode::None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(run_dol(&mut solver, &config, &mut rng)?.ccs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxCcsError {
    pub value: f64,
    pub weight: WeightVector,
}

fn check_pair(truth: &PartialCcs, learned: &PartialCcs) -> Result<(), CcsError> {
    let (Some(a), Some(b)) = (truth.dim(), learned.dim()) else {
        return Err(CcsError::Empty);
    };
    if a != b {
        return Err(CcsError::DimensionMismatch { left: a, right: b });
    }
    if a != 2 {
        return Err(CcsError::UnsupportedDimension(a));
    }
    Ok(())
}

fn worst_gap<I>(
    truth: &PartialCcs,
    learned: &PartialCcs,
    weights: I,
) -> Result<MaxCcsError, CcsError>
where
    I: IntoIterator<Item = WeightVector>,
{
    let mut best: Option<MaxCcsError> = None;
    for w in weights {
        let gap = (envelope_value(truth, &w)? - envelope_value(learned, &w)?).max(0.0);
        if best.as_ref().is_none_or(|b| gap > b.value) {
            best = Some(MaxCcsError {
                value: gap,
                weight: w,
            });
        }
    }
    best.ok_or(CcsError::Empty)
}

/// Largest shortfall of the learned envelope below the true one over
/// `grid_points` evenly spaced weights from `(0, 1)` to `(1, 0)`.
pub fn max_ccs_error(
    truth: &PartialCcs,
    learned: &PartialCcs,
    grid_points: usize,
) -> Result<MaxCcsError, CcsError> {
    check_pair(truth, learned)?;
    let weights = (0..grid_points.max(2)).map(|i| {
        let w1 = i as f64 / (grid_points.max(2) - 1) as f64;
        WeightVector::two(w1)
    });
    worst_gap(truth, learned, weights)
}

/// Exact Max CCS Error: the envelope gap is piecewise linear, so its
/// maximum sits on a corner weight of one of the two sets.
pub fn max_ccs_error_corners(
    truth: &PartialCcs,
    learned: &PartialCcs,
) -> Result<MaxCcsError, CcsError> {
    check_pair(truth, learned)?;
    let mut weights = corner_weights(&prune(truth.vectors().to_vec())?)?;
    weights.extend(corner_weights(&prune(learned.vectors().to_vec())?)?);
    weights.sort_by(|a, b| a.components()[0].total_cmp(&b.components()[0]));
    worst_gap(truth, learned, weights)
}
