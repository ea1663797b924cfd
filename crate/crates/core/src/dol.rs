//! The outer OLS loop with model reuse across corner weights.

use std::time::{Duration, Instant};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccs::{
    corner_weights, envelope_value, estimate_improvement, new_corner_weights, obsolete_corners,
    scalarise, CcsError, CornerWeightQueue, ExploredWeights, PartialCcs, ValueVector, WeightVector,
    GEOM_EPS,
};
use crate::solver::{CurvePoint, ScalarisedSolver, SolverError};

/// How the model for a new weight is initialised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReuseMode {
    /// Fresh random model every iteration.
    #[default]
    None,
    /// Copy of the model stored under the nearest weight.
    Full,
    /// Nearest model with its output layer reinitialised.
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DolConfig {
    /// Minimum estimated improvement for a corner weight to be queued.
    pub tau: f64,
    pub max_iterations: usize,
    pub reuse: ReuseMode,
}

impl Default for DolConfig {
    fn default() -> Self {
        Self {
            tau: 0.005,
            max_iterations: 30,
            reuse: ReuseMode::None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DolError {
    #[error("solver failed in iteration {iteration} at weight {weight:?}: {source}")]
    Solver {
        iteration: usize,
        weight: Vec<f64>,
        source: SolverError,
    },
    #[error(transparent)]
    Ccs(#[from] CcsError),
    #[error("model store is empty")]
    EmptyStore,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Learnt models keyed by the weight they were trained for, in insertion order.
#[derive(Clone, Debug)]
pub struct ModelStore<M> {
    entries: Vec<(WeightVector, M)>,
}

impl<M> Default for ModelStore<M> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

impl<M: Clone> ModelStore<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(WeightVector, M)] {
        &self.entries
    }

    pub fn insert(&mut self, weight: WeightVector, model: M) {
        match self.entries.iter_mut().find(|(w, _)| w.approx_eq(&weight)) {
            Some(slot) => slot.1 = model,
            None => self.entries.push((weight, model)),
        }
    }

    pub fn get(&self, weight: &WeightVector) -> Option<&M> {
        self.entries
            .iter()
            .find(|(w, _)| w.approx_eq(weight))
            .map(|(_, m)| m)
    }

    /// Model whose key is nearest to `w` in Euclidean distance; the earliest
    /// inserted wins ties.
    pub fn nearest(&self, w: &WeightVector) -> Option<(&WeightVector, &M)> {
        let mut best: Option<(f64, &(WeightVector, M))> = None;
        for e in &self.entries {
            let d = e.0.distance(w);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, e));
            }
        }
        best.map(|(_, (k, m))| (k, m))
    }

    pub fn copy_nearest(&self, w: &WeightVector) -> Result<M, DolError> {
        self.nearest(w)
            .map(|(_, m)| m.clone())
            .ok_or(DolError::EmptyStore)
    }
}

/// Starting model for weight `w` under the given reuse mode.
pub fn prepare_model<S: ScalarisedSolver>(
    solver: &S,
    w: &WeightVector,
    reuse: ReuseMode,
    models: &ModelStore<S::Model>,
    rng: &mut dyn RngCore,
) -> Result<S::Model, SolverError> {
    if reuse == ReuseMode::None || models.is_empty() {
        return solver.fresh_model(rng);
    }
    let mut model = models.copy_nearest(w).expect("store is non-empty");
    if reuse == ReuseMode::Partial {
        solver.reset_head(&mut model, rng);
    }
    Ok(model)
}

/// Whether `v` rises strictly above the envelope of `s` at some weight.
///
/// The gap `w . V - V*_S(w)` is linear between corner weights of `S`, so
/// checking the corners (extrema included) is exhaustive.
pub fn improves_upon(v: &ValueVector, s: &PartialCcs) -> Result<bool, CcsError> {
    if s.is_empty() {
        return Ok(true);
    }
    for w in corner_weights(s)? {
        if scalarise(v, &w)? > envelope_value(s, &w)? + GEOM_EPS {
            return Ok(true);
        }
    }
    Ok(false)
}

/// A corner weight produced by an accepted vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerCandidate {
    pub weight: WeightVector,
    /// `None` for weights that were already explored and so never scored.
    pub improvement: Option<f64>,
    pub enqueued: bool,
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// 1-based solver call number.
    pub iteration: usize,
    pub weight: WeightVector,
    pub priority: f64,
    pub value: ValueVector,
    pub accepted: bool,
    /// Vectors pruned from `S` by this iteration.
    pub removed: Vec<ValueVector>,
    pub candidates: Vec<CornerCandidate>,
    /// Queue contents after the iteration, as `(weight, priority)`.
    pub queue: Vec<(WeightVector, f64)>,
    /// `S` after the iteration.
    pub ccs: PartialCcs,
    pub training_curve: Vec<CurvePoint>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn solver_calls(&self) -> usize {
        self.records.len()
    }
}

#[derive(Clone, Debug)]
pub struct DolOutcome<M> {
    pub ccs: PartialCcs,
    pub models: ModelStore<M>,
    pub log: IterationLog,
    /// True when the loop stopped because the queue ran dry.
    pub queue_exhausted: bool,
}

/// Optimistic linear support driven by `solver`.
pub fn run_dol<S: ScalarisedSolver>(
    solver: &mut S,
    config: &DolConfig,
    rng: &mut dyn RngCore,
) -> Result<DolOutcome<S::Model>, DolError> {
    if config.tau.is_nan() || config.tau < 0.0 {
        return Err(DolError::Config(format!(
            "tau must be non-negative, got {}",
            config.tau
        )));
    }
    if config.max_iterations == 0 {
        return Err(DolError::Config("max_iterations must be at least 1".into()));
    }
    let n = solver.num_objectives();
    let mut queue = CornerWeightQueue::with_extrema(n);
    let mut explored = ExploredWeights::new();
    let mut s = PartialCcs::new();
    let mut models = ModelStore::new();
    let mut log = IterationLog::default();

    while log.records.len() < config.max_iterations {
        let Some((w, priority)) = queue.pop() else {
            break;
        };
        let started = Instant::now();
        let iteration = log.records.len() + 1;
        let wrap = |source: SolverError| DolError::Solver {
            iteration,
            weight: w.components().to_vec(),
            source,
        };
        let model = prepare_model(solver, &w, config.reuse, &models, rng).map_err(wrap)?;
        let result = solver.solve(&w, model, rng).map_err(wrap)?;
        let v = result.value.with_provenance(w.clone(), iteration);
        let accepted = improves_upon(&v, &s)?;
        explored.push(w.clone(), scalarise(&v, &w)?);

        let mut removed = Vec::new();
        let mut candidates = Vec::new();
        if accepted {
            for c in obsolete_corners(&queue, &v, &s)? {
                queue.remove(&c);
            }
            removed = s.insert(v.clone())?;
            models.insert(w.clone(), result.model);
            for c in new_corner_weights(&s, &v)? {
                if explored.contains(&c) {
                    candidates.push(CornerCandidate {
                        weight: c,
                        improvement: None,
                        enqueued: false,
                    });
                    continue;
                }
                let improvement = estimate_improvement(&c, &explored, &s)?;
                // Float noise must not count as improvement when tau is zero.
                let enqueued = improvement > config.tau && improvement > GEOM_EPS;
                if enqueued {
                    queue.push(c.clone(), improvement);
                }
                candidates.push(CornerCandidate {
                    weight: c,
                    improvement: Some(improvement),
                    enqueued,
                });
            }
        }

        log.records.push(IterationRecord {
            iteration,
            weight: w,
            priority,
            value: v,
            accepted,
            removed,
            candidates,
            queue: queue
                .entries()
                .iter()
                .map(|e| (e.weight.clone(), e.priority))
                .collect(),
            ccs: s.clone(),
            training_curve: result.curve,
            elapsed: started.elapsed(),
        });
    }

    Ok(DolOutcome {
        ccs: s,
        models,
        queue_exhausted: queue.is_empty(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverResult;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Solver that answers with the best vector of a fixed set.
    #[derive(Clone)]
    struct Oracle {
        vectors: Vec<[f64; 2]>,
        calls: usize,
        next_model: u32,
    }

    impl Oracle {
        fn new(vectors: &[[f64; 2]]) -> Self {
            Self {
                vectors: vectors.to_vec(),
                calls: 0,
                next_model: 0,
            }
        }
    }

    impl ScalarisedSolver for Oracle {
        // (id, head) so reuse can be observed.
        type Model = (u32, u32);

        fn num_objectives(&self) -> usize {
            2
        }

        fn fresh_model(&self, _rng: &mut dyn RngCore) -> Result<(u32, u32), SolverError> {
            Ok((self.next_model, 0))
        }

        fn reset_head(&self, model: &mut (u32, u32), _rng: &mut dyn RngCore) {
            model.1 += 1;
        }

        fn solve(
            &mut self,
            w: &WeightVector,
            model: (u32, u32),
            _rng: &mut dyn RngCore,
        ) -> Result<SolverResult<(u32, u32)>, SolverError> {
            self.calls += 1;
            self.next_model += 1;
            let vs: Vec<ValueVector> = self.vectors.iter().map(|&v| ValueVector::from(v)).collect();
            let (_, best) = crate::ccs::max_scalarised_in(&vs, w)?;
            Ok(SolverResult {
                value: best.clone(),
                model,
                curve: Vec::new(),
            })
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn exact() -> DolConfig {
        DolConfig {
            tau: 0.0,
            max_iterations: 100,
            reuse: ReuseMode::None,
        }
    }

    #[test]
    fn recovers_hull_within_call_bound() {
        let points = [
            [0.0, 1.0],
            [0.4, 0.95],
            [0.7, 0.75],
            [0.9, 0.4],
            [1.0, 0.0],
            [0.3, 0.3],
        ];
        let mut solver = Oracle::new(&points);
        let out = run_dol(&mut solver, &exact(), &mut rng()).unwrap();
        let got: Vec<Vec<f64>> = out.ccs.iter().map(|v| v.components().to_vec()).collect();
        assert_eq!(got.len(), 5);
        assert!(!got.contains(&vec![0.3, 0.3]));
        assert!(solver.calls <= 2 * 5 + 1);
        assert!(out.queue_exhausted);
    }

    #[test]
    fn single_iteration_keeps_first_extremum() {
        let mut solver = Oracle::new(&[[1.0, 0.0], [0.0, 1.0]]);
        let config = DolConfig {
            max_iterations: 1,
            ..exact()
        };
        let out = run_dol(&mut solver, &config, &mut rng()).unwrap();
        assert_eq!(solver.calls, 1);
        let only: Vec<&[f64]> = out.ccs.iter().map(|v| v.components()).collect();
        assert_eq!(only, vec![&[1.0, 0.0][..]]);
        assert!(!out.queue_exhausted);
    }

    #[test]
    fn rejected_vector_is_explored_but_not_stored() {
        // A single policy: the second extremum finds nothing new.
        let mut solver = Oracle::new(&[[0.5, 0.5]]);
        let out = run_dol(&mut solver, &exact(), &mut rng()).unwrap();
        assert_eq!(out.log.solver_calls(), 2);
        assert!(out.log.records[0].accepted);
        assert!(!out.log.records[1].accepted);
        assert_eq!(out.models.len(), 1);
        assert_eq!(out.ccs.len(), 1);
    }

    #[test]
    fn improves_upon_examples() {
        let s = crate::ccs::prune(vec![[4.0, 1.0].into(), [1.0, 4.0].into()]).unwrap();
        assert!(improves_upon(&[3.0, 3.0].into(), &s).unwrap());
        assert!(!improves_upon(&[2.0, 2.0].into(), &s).unwrap());
        assert!(improves_upon(&[-5.0, -5.0].into(), &PartialCcs::new()).unwrap());
    }

    #[test]
    fn nearest_model_lookup() {
        let mut store = ModelStore::new();
        store.insert(WeightVector::two(1.0), "a");
        store.insert(WeightVector::two(0.0), "b");
        assert_eq!(store.copy_nearest(&WeightVector::two(0.9)).unwrap(), "a");
        assert_eq!(store.copy_nearest(&WeightVector::two(0.5)).unwrap(), "a");
        assert_eq!(store.copy_nearest(&WeightVector::two(0.4)).unwrap(), "b");
        let mut single = ModelStore::new();
        single.insert(WeightVector::two(0.3), 7);
        assert_eq!(single.copy_nearest(&WeightVector::two(1.0)).unwrap(), 7);
        let empty: ModelStore<u8> = ModelStore::new();
        assert!(matches!(
            empty.copy_nearest(&WeightVector::two(0.5)),
            Err(DolError::EmptyStore)
        ));
    }

    #[test]
    fn prepare_model_by_reuse_mode() {
        let solver = Oracle::new(&[[1.0, 0.0]]);
        let mut store = ModelStore::new();
        store.insert(WeightVector::two(1.0), (41, 0));
        let w = WeightVector::two(0.8);
        let mut r = rng();
        assert_eq!(
            prepare_model(&solver, &w, ReuseMode::None, &store, &mut r).unwrap(),
            (0, 0)
        );
        assert_eq!(
            prepare_model(&solver, &w, ReuseMode::Full, &store, &mut r).unwrap(),
            (41, 0)
        );
        assert_eq!(
            prepare_model(&solver, &w, ReuseMode::Partial, &store, &mut r).unwrap(),
            (41, 1)
        );
        let empty = ModelStore::new();
        assert_eq!(
            prepare_model(&solver, &w, ReuseMode::Full, &empty, &mut r).unwrap(),
            (0, 0)
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut solver = Oracle::new(&[[1.0, 0.0]]);
        let bad = DolConfig {
            tau: -1.0,
            ..exact()
        };
        assert!(matches!(
            run_dol(&mut solver, &bad, &mut rng()),
            Err(DolError::Config(_))
        ));
    }
}
