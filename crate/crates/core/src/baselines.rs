//! Comparison methods sharing the grid motion model: a DOO variant that
//! commits to the current maximum of the bound, and gradient ascent on a
//! local linear fit.

use nalgebra::{DMatrix, DVector};

use crate::bound::SampleSet;
use crate::error::{Error, Result};
use crate::simulator::{StepContext, StepDecision, StepPlanner};
use crate::world::{Action, GridPos, GridSpec};

/// Travels to `argmax B`, re-targeting only once the target is reached.
#[derive(Debug, Clone, Default)]
pub struct CdooPlanner {
    target: Option<GridPos>,
}

impl CdooPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn target(&self) -> Option<GridPos> {
        self.target
    }
}

/// Next move on the axis-ordered Manhattan route from `from` to `to`:
/// the axis with the larger remaining offset goes first, axis 0 on ties.
pub fn manhattan_action(from: &GridPos, to: &GridPos) -> Option<Action> {
    let mut best: Option<(usize, i64)> = None;
    for (axis, (&a, &b)) in from.index().iter().zip(to.index()).enumerate() {
        let diff = b as i64 - a as i64;
        if diff != 0 && best.map_or(true, |(_, d)| diff.abs() > d.abs()) {
            best = Some((axis, diff));
        }
    }
    best.map(|(axis, diff)| match (axis, diff > 0) {
        (0, true) => Action::Right,
        (0, false) => Action::Left,
        (_, true) => Action::Up,
        (_, false) => Action::Down,
    })
}

impl StepPlanner for CdooPlanner {
    fn name(&self) -> &'static str {
        "cdoo"
    }

    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<StepDecision> {
        if self.target.map_or(true, |t| t == ctx.position) {
            // The current point is already sampled, so it is never a useful target.
            let here = ctx.spec.flat(&ctx.position);
            let mut best: Option<(usize, f64)> = None;
            for (y, &b) in ctx.bound.values().iter().enumerate() {
                if y != here && best.map_or(true, |(_, v)| b > v) {
                    best = Some((y, b));
                }
            }
            let (flat, _) = best.ok_or_else(|| Error::Config("grid has a single point".into()))?;
            self.target = Some(ctx.spec.pos_from_flat(flat));
        }
        let target = self.target.expect("target set above");
        let action = manhattan_action(&ctx.position, &target)
            .expect("target differs from the current position");
        Ok(StepDecision {
            action,
            predicted_refinement: None,
            settled: false,
        })
    }
}

/// Least-squares plane through the `n` samples nearest to `x`; returns its
/// slope. Ties in distance keep acquisition order.
pub fn llr_gradient(samples: &SampleSet, x: &[f64], n: usize) -> Result<Vec<f64>> {
    let dim = x.len();
    if n < dim + 1 {
        return Err(Error::Config(format!(
            "a plane in {dim} dimensions needs at least {} neighbours, got {n}",
            dim + 1
        )));
    }
    if samples.len() < n {
        return Err(Error::DegenerateFit(format!(
            "{} samples available, {n} requested",
            samples.len()
        )));
    }
    let mut order: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, crate::bound::dist2(&s.position, x)))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let chosen: Vec<_> = order[..n].iter().map(|&(i, _)| &samples.as_slice()[i]).collect();

    let mean_pos: Vec<f64> = (0..dim)
        .map(|d| chosen.iter().map(|s| s.position[d]).sum::<f64>() / n as f64)
        .collect();
    let mean_val = chosen.iter().map(|s| s.value).sum::<f64>() / n as f64;
    let design = DMatrix::from_fn(n, dim, |r, c| chosen[r].position[c] - mean_pos[c]);
    let rhs = DVector::from_fn(n, |r, _| chosen[r].value - mean_val);

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-9 * smax.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateFit(format!(
            "{n} neighbours of {x:?} are affinely dependent"
        )));
    }
    let slope = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    Ok(slope.iter().copied().collect())
}

/// Tries `n`, `n + 1`, ... neighbours until the fit is full rank. Returns
/// `None` when no subset of the samples gives one.
pub fn llr_gradient_with_fallback(samples: &SampleSet, x: &[f64], n: usize) -> Option<Vec<f64>> {
    let first = n.min(samples.len());
    (first..=samples.len()).find_map(|k| llr_gradient(samples, x, k).ok())
}

/// Follows the locally fitted gradient one grid step at a time.
#[derive(Debug, Clone)]
pub struct GradientPlanner {
    neighbors: usize,
    tolerance: f64,
    heading: Option<Vec<f64>>,
    settled: bool,
}

impl GradientPlanner {
    pub fn new(neighbors: usize) -> Result<Self> {
        if neighbors < 3 {
            return Err(Error::Config(format!(
                "gradient ascent needs at least 3 neighbours, got {neighbors}"
            )));
        }
        Ok(Self {
            neighbors,
            tolerance: 1e-6,
            heading: None,
            settled: false,
        })
    }

    pub fn heading(&self) -> Option<&[f64]> {
        self.heading.as_deref()
    }

    pub fn is_settled(&self) -> bool {
        self.settled
    }

    /// Admissible action best aligned with `heading` (canonical order on ties).
    fn aligned_action(spec: &GridSpec, at: &GridPos, heading: &[f64]) -> Action {
        let dim = spec.dim();
        let mut best: Option<(Action, f64)> = None;
        for &u in spec.action_set().iter() {
            if spec.step_dynamics(at, u).is_err() {
                continue;
            }
            let delta = u.delta(dim);
            let score: f64 = (0..dim).map(|d| delta[d] * spec.step(d) * heading[d]).sum();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((u, score));
            }
        }
        best.expect("every grid state has an admissible action").0
    }

    /// Move used before any plane can be fitted: prefer a successor that
    /// makes the sample positions affinely full rank, then an unsampled one.
    fn probe_action(spec: &GridSpec, at: &GridPos, samples: &SampleSet) -> Action {
        let mut unsampled = None;
        let mut first = None;
        for &u in spec.action_set().iter() {
            let Ok(next) = spec.step_dynamics(at, u) else {
                continue;
            };
            first.get_or_insert(u);
            let c = spec.coords(&next);
            if samples.contains(&c) {
                continue;
            }
            unsampled.get_or_insert(u);
            if spans_space(samples, &c) {
                return u;
            }
        }
        unsampled.or(first).expect("every grid state has an admissible action")
    }
}

fn spans_space(samples: &SampleSet, extra: &[f64]) -> bool {
    let dim = extra.len();
    let pts: Vec<&[f64]> = samples
        .iter()
        .map(|s| s.position.as_slice())
        .chain(std::iter::once(extra))
        .collect();
    if pts.len() < dim + 1 {
        return false;
    }
    let m = DMatrix::from_fn(pts.len() - 1, dim, |r, c| pts[r + 1][c] - pts[0][c]);
    m.rank(1e-9) == dim
}

impl StepPlanner for GradientPlanner {
    fn name(&self) -> &'static str {
        "gradient"
    }

    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<StepDecision> {
        let x = ctx.spec.coords(&ctx.position);
        if let Some(g) = llr_gradient_with_fallback(ctx.samples, &x, self.neighbors) {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < self.tolerance {
                self.settled = true;
            } else {
                self.heading = Some(g.iter().map(|v| v / norm).collect());
            }
        }
        let action = match &self.heading {
            Some(h) => Self::aligned_action(ctx.spec, &ctx.position, h),
            None => Self::probe_action(ctx.spec, &ctx.position, ctx.samples),
        };
        let next = ctx.spec.step_dynamics(&ctx.position, action)?;
        if ctx.previous == Some(next) && self.heading.is_some() {
            self.settled = true;
        }
        Ok(StepDecision {
            action,
            predicted_refinement: None,
            settled: self.settled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{rebuild_bound, BoundField, GridGeometry};
    use crate::objective::{GroundTruth, Objective, RbfObjective};
    use crate::simulator::{run, RunConfig};

    fn plane_samples(points: &[[f64; 2]]) -> SampleSet {
        let mut s = SampleSet::new();
        for p in points {
            s.insert(p.to_vec(), 2.0 * p[0] + 3.0 * p[1] + 1.0);
        }
        s
    }

    #[test]
    fn exact_plane_recovery() {
        let s = plane_samples(&[[0.0, 0.0], [1.0, 0.2], [0.4, 1.0], [2.0, 2.5], [3.0, 0.1]]);
        let g = llr_gradient(&s, &[0.5, 0.5], 4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9, "{g:?}");
    }

    #[test]
    fn collinear_neighbours_are_degenerate() {
        let s = plane_samples(&[[0.0, 0.0], [0.2, 0.2], [0.4, 0.4], [0.6, 0.6]]);
        assert!(matches!(
            llr_gradient(&s, &[0.3, 0.3], 4),
            Err(Error::DegenerateFit(_))
        ));
        assert!(llr_gradient_with_fallback(&s, &[0.3, 0.3], 4).is_none());
    }

    #[test]
    fn fallback_widens_the_neighbourhood() {
        let s = plane_samples(&[[0.0, 0.0], [0.2, 0.0], [0.4, 0.0], [0.6, 0.0], [0.0, 1.0]]);
        assert!(llr_gradient(&s, &[0.3, 0.0], 4).is_err());
        let g = llr_gradient_with_fallback(&s, &[0.3, 0.0], 4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn value_shift_leaves_gradient_unchanged() {
        let f = RbfObjective::reference_3rbf();
        let pts = [[2.0, 2.0], [2.2, 2.0], [2.0, 2.2], [1.8, 2.2], [2.2, 1.8]];
        let mut a = SampleSet::new();
        let mut b = SampleSet::new();
        for p in pts {
            a.insert(p.to_vec(), f.eval(&p));
            b.insert(p.to_vec(), f.eval(&p) + 1234.5);
        }
        let ga = llr_gradient(&a, &[2.0, 2.0], 4).unwrap();
        let gb = llr_gradient(&b, &[2.0, 2.0], 4).unwrap();
        for d in 0..2 {
            assert!((ga[d] - gb[d]).abs() < 1e-9);
        }
    }

    #[test]
    fn rbf_gradient_direction_near_center() {
        let f = RbfObjective::reference_3rbf();
        let x = [2.0, 2.0];
        let mut s = SampleSet::new();
        for p in [[2.0, 2.0], [2.2, 2.0], [2.0, 2.2], [1.8, 2.0], [2.0, 1.8]] {
            s.insert(p.to_vec(), f.eval(&p));
        }
        let g = llr_gradient(&s, &x, 4).unwrap();
        let truth = f.gradient(&x);
        let cos = (g[0] * truth[0] + g[1] * truth[1])
            / ((g[0].hypot(g[1])) * truth[0].hypot(truth[1]));
        assert!(cos > 30f64.to_radians().cos(), "cos = {cos}");
    }

    #[test]
    fn neighbour_count_is_validated() {
        assert!(GradientPlanner::new(2).is_err());
        let s = plane_samples(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(llr_gradient(&s, &[0.0, 0.0], 2), Err(Error::Config(_))));
    }

    #[test]
    fn manhattan_route_prefers_longer_axis() {
        let g = GridSpec::square(0.0, 4.0, 21).unwrap();
        let a = g.pos(&[10, 10]).unwrap();
        assert_eq!(manhattan_action(&a, &g.pos(&[12, 15]).unwrap()), Some(Action::Up));
        assert_eq!(manhattan_action(&a, &g.pos(&[4, 12]).unwrap()), Some(Action::Left));
        assert_eq!(manhattan_action(&a, &g.pos(&[7, 13]).unwrap()), Some(Action::Left));
        assert_eq!(manhattan_action(&a, &g.pos(&[10, 8]).unwrap()), Some(Action::Down));
        assert_eq!(manhattan_action(&a, &a), None);
    }

    #[test]
    fn cdoo_single_sample_targets_first_corner() {
        let spec = GridSpec::square(0.0, 4.0, 21).unwrap();
        let geom = GridGeometry::new(&spec);
        let mut s = SampleSet::new();
        s.insert(vec![2.0, 2.0], 100.0);
        let b = rebuild_bound(&s, &spec, 364.54);
        let mut p = CdooPlanner::new();
        let ctx = StepContext {
            spec: &spec,
            geom: &geom,
            samples: &s,
            bound: &b,
            position: spec.pos(&[10, 10]).unwrap(),
            previous: None,
            lipschitz: 364.54,
        };
        let d = p.decide(&ctx).unwrap();
        assert_eq!(p.target().unwrap().index(), &[0, 0]);
        assert_eq!(d.action, Action::Left);
    }

    #[test]
    fn cdoo_retargets_on_arrival_without_idling() {
        let spec = GridSpec::square(0.0, 2.0, 3).unwrap();
        let geom = GridGeometry::new(&spec);
        let mut s = SampleSet::new();
        s.insert(vec![0.0, 0.0], 0.0);
        let mut p = CdooPlanner::new();
        // Hand-built bound peaking at (1, 0); later at (1, 2).
        let first = BoundField::from_values(&spec, 1.0, vec![0., 9., 1., 1., 1., 1., 1., 1., 1.]).unwrap();
        fn ctx<'a>(
            spec: &'a GridSpec,
            geom: &'a GridGeometry,
            samples: &'a SampleSet,
            pos: &[usize],
            bound: &'a BoundField,
        ) -> StepContext<'a> {
            StepContext {
                spec,
                geom,
                samples,
                bound,
                position: spec.pos(pos).unwrap(),
                previous: None,
                lipschitz: 1.0,
            }
        }
        let d = p.decide(&ctx(&spec, &geom, &s, &[0, 0], &first)).unwrap();
        assert_eq!(d.action, Action::Right);
        let second = BoundField::from_values(&spec, 1.0, vec![0., 0., 1., 1., 1., 1., 1., 8., 1.]).unwrap();
        // Target not reached yet at (0,0): committed, ignores the new bound.
        assert_eq!(p.decide(&ctx(&spec, &geom, &s, &[0, 0], &second)).unwrap().action, Action::Right);
        // At (1,0) = target: retarget to (1,2) and move immediately.
        let d = p.decide(&ctx(&spec, &geom, &s, &[1, 0], &second)).unwrap();
        assert_eq!(p.target().unwrap().index(), &[1, 2]);
        assert_eq!(d.action, Action::Up);
    }

    #[test]
    fn plane_objective_climbs_to_boundary() {
        struct Plane;
        impl Objective for Plane {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, x: &[f64]) -> f64 {
                0.5 * x[0] + 2.0 * x[1]
            }
            fn gradient(&self, _x: &[f64]) -> Vec<f64> {
                vec![0.5, 2.0]
            }
        }
        let spec = GridSpec::square(0.0, 4.0, 21).unwrap();
        let cfg = RunConfig {
            start: vec![10, 2],
            steps: 40,
            lipschitz: 3.0,
            delta: 0.2,
            truth: GroundTruth::at(&Plane, vec![4.0, 4.0]),
        };
        let mut p = GradientPlanner::new(4).unwrap();
        let r = run(&mut p, &Plane, &spec, &cfg).unwrap();
        let ys: Vec<usize> = r.log.records.iter().map(|rec| rec.index[1]).collect();
        // After the initial probe the robot heads straight up to the boundary.
        let top = ys.iter().position(|&y| y == 20).expect("reaches the top edge");
        assert!(ys[2..=top].windows(2).all(|w| w[1] >= w[0]), "{ys:?}");
        assert!(r.settled_distance.is_some());
    }

    #[test]
    fn concave_quadratic_converges_to_nearest_grid_point() {
        struct Bowl;
        impl Objective for Bowl {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, x: &[f64]) -> f64 {
                -((x[0] - 1.33).powi(2) + 2.0 * (x[1] - 2.91).powi(2))
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![-2.0 * (x[0] - 1.33), -4.0 * (x[1] - 2.91)]
            }
        }
        let spec = GridSpec::square(0.0, 4.0, 21).unwrap();
        let cfg = RunConfig {
            start: vec![16, 4],
            steps: 80,
            lipschitz: 20.0,
            delta: 0.0,
            truth: GroundTruth::at(&Bowl, vec![1.33, 2.91]),
        };
        let mut p = GradientPlanner::new(4).unwrap();
        let r = run(&mut p, &Bowl, &spec, &cfg).unwrap();
        let best = r
            .log
            .records
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        assert_eq!(best.index, vec![7, 15]);
        assert!(r.settled_distance.is_some());
        let last = &r.log.records.last().unwrap().index;
        let near = (last[0] as i64 - 7).abs() + (last[1] as i64 - 15).abs();
        assert!(near <= 1, "ends at {last:?}");
    }
}
