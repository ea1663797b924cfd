//! Convex coverage set geometry for linear scalarisation.
//!
//! Everything here is n-generic at the type level, but the envelope
//! algorithms (pruning, corner weights, optimistic improvement) are the
//! closed-form two-objective versions and reject other dimensions with
//! [`CcsError::UnsupportedDimension`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for weight equality, corner de-duplication and strict improvement.
pub const GEOM_EPS: f64 = 1e-9;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CcsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty coverage set")]
    Empty,
    #[error("{0}-objective envelopes are not supported (only 2 objectives)")]
    UnsupportedDimension(usize),
    #[error("invalid weight {0:?}: components must be non-negative and sum to 1")]
    InvalidWeight(Vec<f64>),
    #[error("non-finite value vector {0:?}")]
    NonFinite(Vec<f64>),
}

/// A point on the weight simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(components: Vec<f64>) -> Result<Self, CcsError> {
        let sum: f64 = components.iter().sum();
        if components.is_empty()
            || components.iter().any(|c| !(c.is_finite() && *c >= 0.0))
            || (sum - 1.0).abs() > WEIGHT_SUM_TOL
        {
            return Err(CcsError::InvalidWeight(components));
        }
        Ok(Self(components))
    }

    /// Two-objective weight `(w1, 1 - w1)`, with `w1` clamped to [0, 1].
    pub fn two(w1: f64) -> Self {
        let w1 = w1.clamp(0.0, 1.0);
        Self(vec![w1, 1.0 - w1])
    }

    /// The `index`-th corner of the simplex.
    pub fn extremum(dim: usize, index: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[index] = 1.0;
        Self(c)
    }

    pub fn extrema(dim: usize) -> Vec<Self> {
        (0..dim).map(|i| Self::extremum(dim, i)).collect()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Equal within [`GEOM_EPS`] per component.
    pub fn approx_eq(&self, other: &WeightVector) -> bool {
        self.dim() == other.dim()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| (a - b).abs() <= GEOM_EPS)
    }

    pub fn distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, values: &[f64]) -> Result<f64, CcsError> {
        if values.len() != self.dim() {
            return Err(CcsError::DimensionMismatch {
                left: values.len(),
                right: self.dim(),
            });
        }
        Ok(self.0.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Where a value vector came from: the weight it was learnt for and the
/// outer-loop iteration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub weight: WeightVector,
    pub iteration: usize,
}

/// Expected discounted vector return of one policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector {
    components: Vec<f64>,
    provenance: Option<Provenance>,
}

impl ValueVector {
    pub fn new(components: Vec<f64>) -> Result<Self, CcsError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(CcsError::NonFinite(components));
        }
        Ok(Self {
            components,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, weight: WeightVector, iteration: usize) -> Self {
        self.provenance = Some(Provenance { weight, iteration });
        self
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// Shorthand for building vectors from literals in tests and examples.
impl From<&[f64]> for ValueVector {
    fn from(c: &[f64]) -> Self {
        ValueVector::new(c.to_vec()).expect("finite components")
    }
}

impl<const N: usize> From<[f64; N]> for ValueVector {
    fn from(c: [f64; N]) -> Self {
        ValueVector::new(c.to_vec()).expect("finite components")
    }
}

pub fn scalarise(v: &ValueVector, w: &WeightVector) -> Result<f64, CcsError> {
    w.dot(v.components())
}

/// A pruned set of value vectors, kept sorted by ascending first component
/// (for two objectives this is also the order of their optimal weight
/// intervals from `w = (0, 1)` to `w = (1, 0)`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialCcs {
    vectors: Vec<ValueVector>,
}

impl PartialCcs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vectors(&self) -> &[ValueVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ValueVector> {
        self.vectors.iter()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(ValueVector::dim)
    }

    /// Adds `v` and re-prunes, returning the vectors that dropped out.
    pub fn insert(&mut self, v: ValueVector) -> Result<Vec<ValueVector>, CcsError> {
        let mut all = std::mem::take(&mut self.vectors);
        all.push(v);
        let before = all.clone();
        *self = prune(all)?;
        Ok(before
            .into_iter()
            .filter(|b| !self.vectors.iter().any(|k| k.components == b.components))
            .collect())
    }

    pub fn contains_components(&self, c: &[f64]) -> bool {
        self.vectors.iter().any(|v| v.components == c)
    }
}

impl<'a> IntoIterator for &'a PartialCcs {
    type Item = &'a ValueVector;
    type IntoIter = std::slice::Iter<'a, ValueVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.vectors.iter()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// `max_{V in S} w . V` and an achieving vector.
///
/// Ties (within [`GEOM_EPS`]) go to the lexicographically greatest vector.
pub fn max_scalarised<'a>(
    s: &'a PartialCcs,
    w: &WeightVector,
) -> Result<(f64, &'a ValueVector), CcsError> {
    max_scalarised_in(s.vectors(), w)
}

pub fn max_scalarised_in<'a>(
    vectors: &'a [ValueVector],
    w: &WeightVector,
) -> Result<(f64, &'a ValueVector), CcsError> {
    let values = vectors
        .iter()
        .map(|v| scalarise(v, w))
        .collect::<Result<Vec<_>, _>>()?;
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let arg = vectors
        .iter()
        .zip(&values)
        .filter(|(_, &value)| value >= best - GEOM_EPS)
        .map(|(v, _)| v)
        .max_by(|a, b| lex_cmp(a.components(), b.components()))
        .ok_or(CcsError::Empty)?;
    Ok((best, arg))
}

/// `V*_S(w)`, or `-inf` for an empty set.
pub fn envelope_value(s: &PartialCcs, w: &WeightVector) -> Result<f64, CcsError> {
    match max_scalarised(s, w) {
        Ok((v, _)) => Ok(v),
        Err(CcsError::Empty) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

fn require_two(dim: usize) -> Result<(), CcsError> {
    if dim == 2 {
        Ok(())
    } else {
        Err(CcsError::UnsupportedDimension(dim))
    }
}

// (b - a) x (c - a); negative for a clockwise turn.
fn cross(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Keeps exactly the vectors that are the unique maximiser of `w . V` on
/// some open interval of two-objective weights.
///
/// Duplicates collapse onto their first occurrence, and vectors that only
/// tie at a single weight (collinear points, weakly dominated extremes) are
/// dropped.
pub fn prune(vectors: Vec<ValueVector>) -> Result<PartialCcs, CcsError> {
    let Some(dim) = vectors.first().map(ValueVector::dim) else {
        return Ok(PartialCcs::new());
    };
    require_two(dim)?;
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(CcsError::DimensionMismatch {
            left: bad.dim(),
            right: dim,
        });
    }

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    // Ascending first component, then descending second, then insertion order.
    order.sort_by(|&i, &j| {
        let (a, b) = (vectors[i].components(), vectors[j].components());
        a[0].total_cmp(&b[0])
            .then(b[1].total_cmp(&a[1]))
            .then(i.cmp(&j))
    });
    order.dedup_by(|j, i| vectors[*i].components()[0] == vectors[*j].components()[0]);

    // Monotone-chain upper hull.
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for idx in order {
        while hull.len() >= 2 {
            let a = vectors[hull[hull.len() - 2]].components();
            let b = vectors[hull[hull.len() - 1]].components();
            if cross(a, b, vectors[idx].components()) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(idx);
    }

    // Only the descending part of the upper hull is optimal for w >= 0.
    let top = hull.iter().enumerate().fold(0, |best, (pos, &idx)| {
        if vectors[idx].components()[1] >= vectors[hull[best]].components()[1] {
            pos
        } else {
            best
        }
    });
    let keep: Vec<usize> = hull[top..].to_vec();
    let mut slots: Vec<Option<ValueVector>> = vectors.into_iter().map(Some).collect();
    Ok(PartialCcs {
        vectors: keep
            .into_iter()
            .map(|i| slots[i].take().expect("hull indices are unique"))
            .collect(),
    })
}

/// Weight at which `left` (higher second component) and `right` (higher
/// first component) have equal scalarised value.
fn intersection(left: &ValueVector, right: &ValueVector) -> WeightVector {
    let (l, r) = (left.components(), right.components());
    let drop = l[1] - r[1];
    let gain = r[0] - l[0];
    WeightVector::two(drop / (drop + gain))
}

/// Corner weights of the upper surface of `S`, ordered by ascending first
/// weight component and including both simplex extrema.
pub fn corner_weights(s: &PartialCcs) -> Result<Vec<WeightVector>, CcsError> {
    let Some(dim) = s.dim() else {
        return Ok(Vec::new());
    };
    require_two(dim)?;
    let pruned = prune(s.vectors().to_vec())?;
    let v = pruned.vectors();
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(WeightVector::two(0.0));
    for pair in v.windows(2) {
        out.push(intersection(&pair[0], &pair[1]));
    }
    out.push(WeightVector::two(1.0));
    Ok(out)
}

/// Corner weights of the envelope of `S ∪ {V}` that bound `V`'s facet.
///
/// A facet endpoint shared with a neighbour is always returned; simplex
/// extrema are returned only when `V` alone makes up the whole envelope.
/// Returns nothing when `V` is not on the envelope.
pub fn new_corner_weights(s: &PartialCcs, v: &ValueVector) -> Result<Vec<WeightVector>, CcsError> {
    require_two(v.dim())?;
    let mut all = s.vectors().to_vec();
    if !s.contains_components(v.components()) {
        all.push(v.clone());
    }
    let env = prune(all)?;
    let vs = env.vectors();
    let Some(pos) = vs.iter().position(|u| u.components() == v.components()) else {
        return Ok(Vec::new());
    };
    if vs.len() == 1 {
        return Ok(vec![WeightVector::two(0.0), WeightVector::two(1.0)]);
    }
    let mut out = Vec::with_capacity(2);
    if pos > 0 {
        out.push(intersection(&vs[pos - 1], &vs[pos]));
    }
    if pos + 1 < vs.len() {
        out.push(intersection(&vs[pos], &vs[pos + 1]));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueEntry {
    pub weight: WeightVector,
    pub priority: f64,
    seq: u64,
}

/// Max-priority queue of corner weights; equal priorities pop FIFO.
#[derive(Clone, Debug, Default)]
pub struct CornerWeightQueue {
    entries: Vec<QueueEntry>,
    next_seq: u64,
}

impl CornerWeightQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue holding every simplex extremum at infinite priority.
    pub fn with_extrema(dim: usize) -> Self {
        let mut q = Self::new();
        for w in WeightVector::extrema(dim) {
            q.push(w, f64::INFINITY);
        }
        q
    }

    /// Inserts `weight`, or updates the priority of an equal queued weight
    /// (keeping its original place in the FIFO order).
    pub fn push(&mut self, weight: WeightVector, priority: f64) {
        debug_assert!(!priority.is_nan());
        if let Some(e) = self
            .entries
            .iter_mut()
            .find(|e| e.weight.approx_eq(&weight))
        {
            e.priority = priority;
            return;
        }
        self.entries.push(QueueEntry {
            weight,
            priority,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<(WeightVector, f64)> {
        let best = self
            .entries
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.priority.total_cmp(&b.priority).then(b.seq.cmp(&a.seq)))
            .map(|(i, _)| i)?;
        let e = self.entries.remove(best);
        Some((e.weight, e.priority))
    }

    pub fn remove(&mut self, weight: &WeightVector) -> bool {
        let before = self.entries.len();
        self.entries.retain(|e| !e.weight.approx_eq(weight));
        self.entries.len() != before
    }

    pub fn contains(&self, weight: &WeightVector) -> bool {
        self.entries.iter().any(|e| e.weight.approx_eq(weight))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }
}

/// Weights already handed to the solver, with the scalarised value it
/// achieved there. Append-only.
#[derive(Clone, Debug, Default)]
pub struct ExploredWeights {
    entries: Vec<(WeightVector, f64)>,
}

impl ExploredWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, weight: WeightVector, achieved: f64) {
        self.entries.push((weight, achieved));
    }

    pub fn entries(&self) -> &[(WeightVector, f64)] {
        &self.entries
    }

    pub fn contains(&self, weight: &WeightVector) -> bool {
        self.entries.iter().any(|(w, _)| w.approx_eq(weight))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Queued weights where `V` rises strictly above the current envelope of `S`.
///
/// With an empty `S` there is no surface yet, so nothing is obsolete.
pub fn obsolete_corners(
    queue: &CornerWeightQueue,
    v: &ValueVector,
    s: &PartialCcs,
) -> Result<Vec<WeightVector>, CcsError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for e in queue.entries() {
        let current = envelope_value(s, &e.weight)?;
        if scalarise(v, &e.weight)? > current + GEOM_EPS {
            out.push(e.weight.clone());
        }
    }
    Ok(out)
}

/// Optimistic improvement at `w'`: the largest scalarised value any vector
/// could reach there if every explored weight's best known value were
/// optimal, minus `V*_S(w')`.
///
/// For two objectives the optimistic value is the lower convex envelope of
/// the points `(w_i[0], c_i)` evaluated at `w'[0]`, where `c_i` is the
/// explored value (raised to `V*_S(w_i)` if `S` has since improved there).
/// Weights outside the explored bracket are unbounded and get `+inf`.
pub fn estimate_improvement(
    w: &WeightVector,
    explored: &ExploredWeights,
    s: &PartialCcs,
) -> Result<f64, CcsError> {
    require_two(w.dim())?;
    if explored.is_empty() || s.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut points = Vec::with_capacity(explored.len());
    for (wi, achieved) in explored.entries() {
        require_two(wi.dim())?;
        let bound = achieved.max(envelope_value(s, wi)?);
        points.push((wi.components()[0], bound));
    }
    let x = w.components()[0];
    let mut optimistic = f64::INFINITY;
    for &(xi, ci) in &points {
        if (xi - x).abs() <= GEOM_EPS {
            optimistic = optimistic.min(ci);
        }
    }
    for &(xl, cl) in points.iter().filter(|p| p.0 < x - GEOM_EPS) {
        for &(xr, cr) in points.iter().filter(|p| p.0 > x + GEOM_EPS) {
            let t = (x - xl) / (xr - xl);
            optimistic = optimistic.min(cl + t * (cr - cl));
        }
    }
    if optimistic.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(optimistic - envelope_value(s, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: &[[f64; 2]]) -> PartialCcs {
        prune(vs.iter().map(|&v| ValueVector::from(v)).collect()).unwrap()
    }

    fn comps(s: &PartialCcs) -> Vec<Vec<f64>> {
        s.iter().map(|v| v.components().to_vec()).collect()
    }

    fn w1s(ws: &[WeightVector]) -> Vec<f64> {
        ws.iter().map(|w| w.components()[0]).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.6, 0.5]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ValueVector::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn scalarise_examples() {
        let w = WeightVector::two(0.5);
        assert_eq!(scalarise(&[1.0, 0.0].into(), &w).unwrap(), 0.5);
        assert_eq!(
            scalarise(&[3.0, 3.0].into(), &WeightVector::two(1.0)).unwrap(),
            3.0
        );
        let w = WeightVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(close(scalarise(&[4.0, 1.0].into(), &w).unwrap(), 3.0));
        let bad = ValueVector::from([1.0, 2.0, 3.0]);
        assert!(matches!(
            scalarise(&bad, &w),
            Err(CcsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn max_scalarised_examples() {
        let s = set(&[[4.0, 1.0], [3.0, 3.0], [1.0, 4.0]]);
        let (v, arg) = max_scalarised(&s, &WeightVector::two(0.5)).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(arg.components(), &[3.0, 3.0]);

        let s = set(&[[4.0, 1.0]]);
        let w = WeightVector::two(0.3);
        let (v, arg) = max_scalarised(&s, &w).unwrap();
        assert_eq!(v, 0.3 * 4.0 + 0.7 * 1.0);
        assert_eq!(arg.components(), &[4.0, 1.0]);

        let s = set(&[[1.0, 0.0], [0.0, 1.0]]);
        let (v, arg) = max_scalarised(&s, &WeightVector::two(1.0)).unwrap();
        assert_eq!((v, arg.components()), (1.0, &[1.0, 0.0][..]));

        assert_eq!(
            max_scalarised(&PartialCcs::new(), &WeightVector::two(0.5)).unwrap_err(),
            CcsError::Empty
        );
    }

    #[test]
    fn max_scalarised_ties_are_lexicographic() {
        let vs = vec![ValueVector::from([1.0, 3.0]), ValueVector::from([3.0, 1.0])];
        let (_, arg) = max_scalarised_in(&vs, &WeightVector::two(0.5)).unwrap();
        assert_eq!(arg.components(), &[3.0, 1.0]);
        let rev: Vec<_> = vs.into_iter().rev().collect();
        let (_, arg) = max_scalarised_in(&rev, &WeightVector::two(0.5)).unwrap();
        assert_eq!(arg.components(), &[3.0, 1.0]);
    }

    #[test]
    fn prune_examples() {
        let s = set(&[[4.0, 1.0], [3.0, 3.0], [1.0, 4.0], [2.0, 2.0]]);
        assert_eq!(
            comps(&s),
            vec![vec![1.0, 4.0], vec![3.0, 3.0], vec![4.0, 1.0]]
        );
        assert_eq!(comps(&set(&[[1.0, 1.0], [1.0, 1.0]])), vec![vec![1.0, 1.0]]);
        let s = set(&[[5.0, 0.0], [0.0, 5.0], [2.4, 2.4]]);
        assert_eq!(comps(&s), vec![vec![0.0, 5.0], vec![5.0, 0.0]]);
    }

    #[test]
    fn prune_drops_weak_and_collinear() {
        // (3,0) and (0,3) only tie at an extremum; (2,2) sits on the (1,3)-(3,1) facet.
        let s = set(&[[3.0, 1.0], [3.0, 0.0], [1.0, 3.0], [2.0, 2.0], [0.0, 3.0]]);
        assert_eq!(comps(&s), vec![vec![1.0, 3.0], vec![3.0, 1.0]]);
    }

    #[test]
    fn prune_keeps_first_duplicate_provenance() {
        let a = ValueVector::from([1.0, 1.0]).with_provenance(WeightVector::two(0.0), 1);
        let b = ValueVector::from([1.0, 1.0]).with_provenance(WeightVector::two(1.0), 2);
        let s = prune(vec![a.clone(), b]).unwrap();
        assert_eq!(s.vectors(), &[a]);
    }

    #[test]
    fn prune_rejects_three_objectives() {
        let r = prune(vec![ValueVector::from([1.0, 2.0, 3.0])]);
        assert_eq!(r.unwrap_err(), CcsError::UnsupportedDimension(3));
    }

    #[test]
    fn corner_weight_examples() {
        let s = set(&[[4.0, 1.0], [3.0, 3.0], [1.0, 4.0]]);
        let c = w1s(&corner_weights(&s).unwrap());
        assert_eq!(c.len(), 4);
        assert_eq!((c[0], c[3]), (0.0, 1.0));
        assert!(close(c[1], 1.0 / 3.0) && close(c[2], 2.0 / 3.0));

        let c = w1s(&corner_weights(&set(&[[1.0, 0.0], [0.0, 1.0]])).unwrap());
        assert_eq!(c, vec![0.0, 0.5, 1.0]);

        let c = w1s(&corner_weights(&set(&[[2.0, 2.0]])).unwrap());
        assert_eq!(c, vec![0.0, 1.0]);

        let three = PartialCcs {
            vectors: vec![ValueVector::from([1.0, 2.0, 3.0])],
        };
        assert_eq!(
            corner_weights(&three).unwrap_err(),
            CcsError::UnsupportedDimension(3)
        );
    }

    #[test]
    fn corners_tie_neighbours() {
        let s = set(&[[4.0, 1.0], [3.0, 3.0], [1.0, 4.0]]);
        let c = corner_weights(&s).unwrap();
        for (i, w) in c[1..c.len() - 1].iter().enumerate() {
            let a = scalarise(&s.vectors()[i], w).unwrap();
            let b = scalarise(&s.vectors()[i + 1], w).unwrap();
            assert!(close(a, b));
        }
    }

    #[test]
    fn new_corner_weight_examples() {
        let s = set(&[[4.0, 1.0], [1.0, 4.0]]);
        let c = w1s(&new_corner_weights(&s, &[3.0, 3.0].into()).unwrap());
        assert_eq!(c.len(), 2);
        assert!(close(c[0], 1.0 / 3.0) && close(c[1], 2.0 / 3.0));

        let c = w1s(&new_corner_weights(&set(&[[1.0, 0.0]]), &[0.0, 1.0].into()).unwrap());
        assert_eq!(c, vec![0.5]);

        let c = w1s(&new_corner_weights(&s, &[5.0, 5.0].into()).unwrap());
        assert_eq!(c, vec![0.0, 1.0]);

        assert!(new_corner_weights(&s, &[2.0, 2.0].into())
            .unwrap()
            .is_empty());
        let c = w1s(&new_corner_weights(&PartialCcs::new(), &[2.0, 2.0].into()).unwrap());
        assert_eq!(c, vec![0.0, 1.0]);
    }

    #[test]
    fn obsolete_corner_examples() {
        let s = set(&[[4.0, 1.0], [1.0, 4.0]]);
        let mut q = CornerWeightQueue::new();
        q.push(WeightVector::two(0.5), 1.5);
        let ob = obsolete_corners(&q, &[3.0, 3.0].into(), &s).unwrap();
        assert_eq!(ob, vec![WeightVector::two(0.5)]);
        assert!(obsolete_corners(&q, &[2.0, 2.0].into(), &s)
            .unwrap()
            .is_empty());
        assert!(
            obsolete_corners(&CornerWeightQueue::new(), &[9.0, 9.0].into(), &s)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn estimate_improvement_examples() {
        let s = set(&[[4.0, 1.0], [1.0, 4.0]]);
        let mut explored = ExploredWeights::new();
        explored.push(WeightVector::two(1.0), 4.0);
        let only_one = estimate_improvement(&WeightVector::two(0.0), &explored, &s).unwrap();
        assert_eq!(only_one, f64::INFINITY);

        explored.push(WeightVector::two(0.0), 4.0);
        let mid = estimate_improvement(&WeightVector::two(0.5), &explored, &s).unwrap();
        assert!(close(mid, 1.5));
        let at_explored = estimate_improvement(&WeightVector::two(1.0), &explored, &s).unwrap();
        assert_eq!(at_explored, 0.0);
    }

    #[test]
    fn estimate_improvement_uses_improved_envelope() {
        // The solver under-reported at w=(1,0); S later found better there.
        let s = set(&[[5.0, 1.0], [1.0, 4.0]]);
        let mut explored = ExploredWeights::new();
        explored.push(WeightVector::two(1.0), 3.0);
        explored.push(WeightVector::two(0.0), 4.0);
        for i in 0..=20 {
            let w = WeightVector::two(i as f64 / 20.0);
            assert!(estimate_improvement(&w, &explored, &s).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn queue_is_max_priority_then_fifo() {
        let mut q = CornerWeightQueue::with_extrema(2);
        q.push(WeightVector::two(0.5), 2.0);
        q.push(WeightVector::two(0.25), 2.0);
        q.push(WeightVector::two(0.75), 3.0);
        q.push(WeightVector::two(0.5 + 1e-12), 2.0);
        assert_eq!(q.len(), 5);
        let order: Vec<f64> = std::iter::from_fn(|| q.pop())
            .map(|(w, _)| w.components()[0])
            .collect();
        assert_eq!(order, vec![1.0, 0.0, 0.75, 0.5, 0.25]);
    }

    #[test]
    fn queue_remove_by_approximate_weight() {
        let mut q = CornerWeightQueue::new();
        q.push(WeightVector::two(0.3), 1.0);
        assert!(q.remove(&WeightVector::two(0.3 + 1e-11)));
        assert!(q.is_empty());
        assert!(!q.remove(&WeightVector::two(0.3)));
    }

    #[test]
    fn insert_reports_removed() {
        let mut s = set(&[[4.0, 1.0], [1.0, 4.0], [2.0, 2.0]]);
        assert_eq!(s.len(), 2);
        let removed = s.insert([5.0, 5.0].into()).unwrap();
        assert_eq!(removed.len(), 2);
        assert_eq!(comps(&s), vec![vec![5.0, 5.0]]);
    }
}
