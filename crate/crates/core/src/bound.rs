//! Sample bookkeeping and the saw-tooth upper bound
//! `B(y) = min_s [f(x_s) + M * |y - x_s|]` evaluated on the grid.
//!
//! Two routes compute `B`: [`rebuild_bound`] is the direct O(|grid| * |S|)
//! evaluation, [`BoundField::min_overlay`] folds in one sample at a time.
//! The planner only uses the incremental route; the direct one backs the tests.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::world::{Action, GridPos, GridSpec};

/// Relative slack under which two squared distances count as a tie.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub position: Vec<f64>,
    pub value: f64,
}

/// Samples in acquisition order. Positions are unique.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; returns `false` (and stores nothing) when the
    /// position was already sampled.
    pub fn insert(&mut self, position: Vec<f64>, value: f64) -> bool {
        if self.contains(&position) {
            return false;
        }
        self.samples.push(Sample { position, value });
        true
    }

    pub fn contains(&self, position: &[f64]) -> bool {
        self.samples.iter().any(|s| s.position == position)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn as_slice(&self) -> &[Sample] {
        &self.samples
    }

    /// Index of the nearest sample and its squared distance. Ties go to the
    /// earliest acquired sample.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.samples.iter().enumerate() {
            let d2 = dist2(&s.position, x);
            match best {
                Some((_, b)) if !is_strictly_closer(d2, b) => {}
                _ => best = Some((i, d2)),
            }
        }
        best
    }

    /// Nearest-sample prediction of `f(x)`.
    pub fn f_hat(&self, x: &[f64]) -> Result<f64> {
        self.nearest(x)
            .map(|(i, _)| self.samples[i].value)
            .ok_or(Error::EmptySampleSet)
    }
}

pub(crate) fn is_strictly_closer(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - TIE_EPS * incumbent.max(1.0)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Precomputed geometry of a grid: coordinates, offset distances and
/// trapezoid quadrature weights.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    spec: GridSpec,
    coords: Vec<Vec<f64>>,
    /// Euclidean length of an index offset, flat over `|di|` (axis 0 fastest).
    offset_dist: Vec<f64>,
    weights: Vec<f64>,
}

impl GridGeometry {
    pub fn new(spec: &GridSpec) -> Self {
        let n = spec.n_grid();
        let dim = spec.dim();
        let offset_dist = spec
            .enumerate()
            .iter()
            .map(|off| {
                off.index()
                    .iter()
                    .enumerate()
                    .map(|(d, &k)| {
                        let t = k as f64 * spec.step(d);
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let axis_weight = |d: usize, i: usize| {
            let h = spec.step(d);
            if i == 0 || i == n - 1 {
                0.5 * h
            } else {
                h
            }
        };
        let weights = spec
            .enumerate()
            .iter()
            .map(|p| {
                (0..dim)
                    .map(|d| axis_weight(d, p.index()[d]))
                    .product::<f64>()
            })
            .collect();
        Self {
            spec: spec.clone(),
            coords: spec.all_coords(),
            offset_dist,
            weights,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, flat: usize) -> &[f64] {
        &self.coords[flat]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distance between two grid points given by flat index.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        let n = self.spec.n_grid();
        match self.spec.dim() {
            1 => self.offset_dist[a.abs_diff(b)],
            _ => {
                let (ax, ay) = (a % n, a / n);
                let (bx, by) = (b % n, b / n);
                self.offset_dist[ax.abs_diff(bx) + n * ay.abs_diff(by)]
            }
        }
    }

    /// Distances from grid point `a` to every grid point, flat order.
    pub fn dist_row(&self, a: usize, out: &mut Vec<f64>) {
        out.clear();
        let n = self.spec.n_grid();
        match self.spec.dim() {
            1 => out.extend((0..n).map(|b| self.offset_dist[a.abs_diff(b)])),
            _ => {
                let (ax, ay) = (a % n, a / n);
                for by in 0..n {
                    let row = &self.offset_dist[n * ay.abs_diff(by)..][..n];
                    out.extend((0..n).map(|bx| row[ax.abs_diff(bx)]));
                }
            }
        }
    }

    /// Trapezoidal integral of a grid field (iterated 1-D rule).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Flat index of a physical point that lies exactly on the grid.
    pub fn flat_of(&self, x: &[f64]) -> Option<usize> {
        let pos = self.spec.snap(x).ok()?;
        let flat = self.spec.flat(&pos);
        (self.coords[flat] == x).then_some(flat)
    }
}

/// Upper bound evaluated at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundField {
    lipschitz: f64,
    n_grid: usize,
    dim: usize,
    values: Vec<f64>,
    /// Number of samples folded in.
    sample_count: usize,
}

impl BoundField {
    /// Bound of the empty sample set: `+inf` everywhere.
    pub fn empty(spec: &GridSpec, lipschitz: f64) -> Self {
        Self {
            lipschitz,
            n_grid: spec.n_grid(),
            dim: spec.dim(),
            values: vec![f64::INFINITY; spec.len()],
            sample_count: 0,
        }
    }

    /// Field with explicit values, e.g. a hand-built bound for tests.
    pub fn from_values(spec: &GridSpec, lipschitz: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                spec.len()
            )));
        }
        Ok(Self {
            lipschitz,
            n_grid: spec.n_grid(),
            dim: spec.dim(),
            values,
            sample_count: 0,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    fn check_grid(&self, spec: &GridSpec) -> Result<()> {
        if spec.n_grid() != self.n_grid || spec.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "field is {}^{}, grid is {}^{}",
                self.n_grid,
                self.dim,
                spec.n_grid(),
                spec.dim()
            )));
        }
        Ok(())
    }

    /// Pointwise `min(B(y), value + M * |y - position|)`.
    pub fn min_overlay(&self, geom: &GridGeometry, position: &[f64], value: f64) -> BoundField {
        let mut out = self.clone();
        out.overlay_in_place(geom, position, value);
        out
    }

    pub fn overlay_in_place(&mut self, geom: &GridGeometry, position: &[f64], value: f64) {
        if value == f64::INFINITY {
            return;
        }
        let m = self.lipschitz;
        match geom.flat_of(position) {
            Some(src) => {
                for (y, b) in self.values.iter_mut().enumerate() {
                    let cone = value + m * geom.dist(src, y);
                    if cone < *b {
                        *b = cone;
                    }
                }
            }
            None => {
                for (y, b) in self.values.iter_mut().enumerate() {
                    let cone = value + m * dist2(geom.coords(y), position).sqrt();
                    if cone < *b {
                        *b = cone;
                    }
                }
            }
        }
        self.sample_count += 1;
    }

    /// Trapezoidal volume under the bound.
    pub fn volume(&self, geom: &GridGeometry) -> f64 {
        geom.integrate(&self.values)
    }

    /// Largest bound value and its flat index (first in grid order on ties).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// Direct evaluation of the saw-tooth bound on every grid point.
///
/// Distances come from the same table the incremental overlay uses, so
/// re-adding a sample that is already in `samples` changes nothing.
pub fn rebuild_bound(samples: &SampleSet, spec: &GridSpec, lipschitz: f64) -> BoundField {
    let geom = GridGeometry::new(spec);
    let mut field = BoundField::empty(spec, lipschitz);
    for s in samples.iter() {
        let src = geom.flat_of(&s.position);
        for (y, b) in field.values.iter_mut().enumerate() {
            let d = match src {
                Some(src) => geom.dist(src, y),
                None => dist2(geom.coords(y), &s.position).sqrt(),
            };
            *b = b.min(s.value + lipschitz * d);
        }
    }
    field.sample_count = samples.len();
    field
}

/// Predicted refinement of one state-action pair together with the two
/// hypothetical bounds it was computed from.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub volume: f64,
    /// Bound after adding the predicted sample at the current state.
    pub with_state: BoundField,
    /// Bound after also adding the predicted sample at the successor.
    pub with_successor: BoundField,
}

/// Predicted bound-volume decrease from moving `x -> x + u`.
///
/// The successor prediction `f_hat(x+)` is the nearest-sample value over
/// `S` extended with the predicted sample at `x`.
pub fn refinement(
    samples: &SampleSet,
    bound: &BoundField,
    geom: &GridGeometry,
    x: &GridPos,
    u: Action,
) -> Result<Refinement> {
    let spec = geom.spec();
    bound.check_grid(spec)?;
    let next = spec.step_dynamics(x, u)?;
    let xc = spec.coords(x);
    let nc = spec.coords(&next);

    let f_x = samples.f_hat(&xc)?;
    let with_state = bound.min_overlay(geom, &xc, f_x);

    let mut extended = samples.clone();
    extended.insert(xc, f_x);
    let f_next = extended.f_hat(&nc)?;
    let with_successor = with_state.min_overlay(geom, &nc, f_next);

    let diff: Vec<f64> = with_state
        .values
        .iter()
        .zip(&with_successor.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(Refinement {
        volume: geom.integrate(&diff),
        with_state,
        with_successor,
    })
}

/// Realized bound-volume decrease between two snapshots on the same grid.
pub fn actual_refinement(
    before: &BoundField,
    after: &BoundField,
    geom: &GridGeometry,
) -> Result<f64> {
    before.check_grid(geom.spec())?;
    after.check_grid(geom.spec())?;
    if before.lipschitz != after.lipschitz {
        return Err(Error::GridMismatch(format!(
            "Lipschitz constants differ ({} vs {})",
            before.lipschitz, after.lipschitz
        )));
    }
    if before.values.iter().all(|v| v.is_infinite()) {
        return Ok(0.0);
    }
    let diff: Vec<f64> = before
        .values
        .iter()
        .zip(&after.values)
        .map(|(a, b)| if a == b { 0.0 } else { a - b })
        .collect();
    Ok(geom.integrate(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: f64 = 364.54;

    fn grid21() -> GridSpec {
        GridSpec::square(0.0, 4.0, 21).unwrap()
    }

    fn one_sample(x: [f64; 2], v: f64) -> SampleSet {
        let mut s = SampleSet::new();
        s.insert(x.to_vec(), v);
        s
    }

    #[test]
    fn single_sample_cone() {
        let g = grid21();
        let b = rebuild_bound(&one_sample([2.0, 2.0], 100.0), &g, M);
        let q = g.flat(&g.pos(&[10, 11]).unwrap());
        assert!((b.at(q) - 172.908).abs() < 1e-9);
    }

    #[test]
    fn symmetric_pair() {
        let g = grid21();
        let mut s = one_sample([0.0, 0.0], 0.0);
        s.insert(vec![4.0, 4.0], 0.0);
        let b = rebuild_bound(&s, &g, 1.0);
        let q = g.flat(&g.pos(&[10, 10]).unwrap());
        assert!((b.at(q) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_bound_is_infinite() {
        let g = grid21();
        let b = rebuild_bound(&SampleSet::new(), &g, M);
        assert!(b.values().iter().all(|v| *v == f64::INFINITY));
    }

    #[test]
    fn overlay_identities() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let s = one_sample([1.2, 3.0], 40.0);
        let b = rebuild_bound(&s, &g, M);
        assert_eq!(b.min_overlay(&geom, &[1.2, 3.0], 40.0).values(), b.values());
        assert_eq!(
            b.min_overlay(&geom, &[0.4, 0.4], f64::INFINITY).values(),
            b.values()
        );
    }

    #[test]
    fn off_grid_overlay_matches_rebuild() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let mut s = one_sample([2.0, 2.0], 10.0);
        let b = rebuild_bound(&s, &g, 3.0).min_overlay(&geom, &[2.75, 3.5], 12.0);
        s.insert(vec![2.75, 3.5], 12.0);
        let r = rebuild_bound(&s, &g, 3.0);
        for (a, c) in b.values().iter().zip(r.values()) {
            assert!((a - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn f_hat_cases() {
        let s = one_sample([2.0, 2.0], 100.0);
        assert_eq!(s.f_hat(&[3.0, 3.0]).unwrap(), 100.0);

        let mut s = one_sample([1.0, 1.0], 212.5);
        s.insert(vec![3.0, 1.0], 7.0);
        assert_eq!(s.f_hat(&[1.0, 1.0]).unwrap(), 212.5);
        // Equidistant from both samples: the earlier one wins.
        assert_eq!(s.f_hat(&[2.0, 1.0]).unwrap(), 212.5);
        assert_eq!(s.f_hat(&[2.0, 5.0]).unwrap(), 212.5);

        let mut rev = one_sample([3.0, 1.0], 7.0);
        rev.insert(vec![1.0, 1.0], 212.5);
        assert_eq!(rev.f_hat(&[2.0, 1.0]).unwrap(), 7.0);

        assert!(matches!(
            SampleSet::new().f_hat(&[0.0, 0.0]),
            Err(Error::EmptySampleSet)
        ));
    }

    #[test]
    fn duplicate_positions_are_ignored() {
        let mut s = one_sample([0.2, 0.4], 1.0);
        assert!(!s.insert(vec![0.2, 0.4], 5.0));
        assert_eq!(s.len(), 1);
        assert_eq!(s.f_hat(&[0.2, 0.4]).unwrap(), 1.0);
    }

    #[test]
    fn two_point_trapezoid_refinement() {
        let g = GridSpec::new(vec![0.0], vec![1.0], 2).unwrap();
        let geom = GridGeometry::new(&g);
        let mut s = SampleSet::new();
        s.insert(vec![0.0], 0.0);
        let b = rebuild_bound(&s, &g, 1.0);
        let x = g.pos(&[0]).unwrap();
        let r = refinement(&s, &b, &geom, &x, Action::Right).unwrap();
        assert_eq!(r.with_state.values(), &[0.0, 1.0]);
        assert_eq!(r.with_successor.values(), &[0.0, 0.0]);
        assert!((r.volume - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampled_successor_gives_zero() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let mut s = one_sample([2.0, 2.0], 50.0);
        s.insert(vec![2.0, 2.2], 80.0);
        let b = rebuild_bound(&s, &g, M);
        let x = g.pos(&[10, 10]).unwrap();
        let r = refinement(&s, &b, &geom, &x, Action::Up).unwrap();
        assert_eq!(r.with_state.values(), r.with_successor.values());
        assert_eq!(r.volume, 0.0);
    }

    #[test]
    fn refinement_rejects_leaving_grid() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let s = one_sample([0.0, 0.0], 1.0);
        let b = rebuild_bound(&s, &g, M);
        let x = g.pos(&[0, 0]).unwrap();
        assert!(matches!(
            refinement(&s, &b, &geom, &x, Action::Left),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn first_step_from_center_is_positive() {
        use crate::objective::{Objective, RbfObjective};
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let f = RbfObjective::reference_3rbf();
        let s = one_sample([2.0, 2.0], f.eval(&[2.0, 2.0]));
        let b = rebuild_bound(&s, &g, M);
        let x = g.pos(&[10, 10]).unwrap();
        for &u in g.action_set().iter() {
            assert!(refinement(&s, &b, &geom, &x, u).unwrap().volume > 0.0);
        }
    }

    #[test]
    fn actual_refinement_cases() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let s = one_sample([2.0, 2.0], 50.0);
        let b = rebuild_bound(&s, &g, M);
        assert_eq!(actual_refinement(&b, &b, &geom).unwrap(), 0.0);
        let after = b.min_overlay(&geom, &[2.2, 2.0], 60.0);
        assert!(actual_refinement(&b, &after, &geom).unwrap() > 0.0);

        let other = BoundField::empty(&GridSpec::square(0.0, 4.0, 11).unwrap(), M);
        assert!(matches!(
            actual_refinement(&b, &other, &geom),
            Err(Error::GridMismatch(_))
        ));
        let other_m = rebuild_bound(&s, &g, 2.0 * M);
        assert!(actual_refinement(&b, &other_m, &geom).is_err());
    }

    #[test]
    fn trapezoid_weights_integrate_constants_exactly() {
        let g = grid21();
        let geom = GridGeometry::new(&g);
        let ones = vec![1.0; g.len()];
        assert!((geom.integrate(&ones) - 16.0).abs() < 1e-12);
        // Bilinear functions are integrated exactly by the iterated rule.
        let f: Vec<f64> = g.all_coords().iter().map(|c| c[0] * c[1]).collect();
        assert!((geom.integrate(&f) - 64.0).abs() < 1e-9);
    }
}
