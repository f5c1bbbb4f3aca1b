//! Operating space, its uniform grid discretization, the discrete action set
//! and the single-integrator motion model `x_{k+1} = x_k + u_k`.
//!
//! Positions are kept as integer grid indices. Physical coordinates are
//! derived on demand as `lower + index * step`, so long trajectories never
//! accumulate floating-point drift.
//!
//! Flat indices are row-major with axis 0 varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported space dimension.
pub const MAX_DIM: usize = 2;

/// Uniform grid over an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_grid: usize,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, n_grid: usize) -> Result<Self> {
        let spec = Self {
            lower,
            upper,
            n_grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Square `[lo, hi]^2` grid with `n_grid` points per axis.
    pub fn square(lo: f64, hi: f64, n_grid: usize) -> Result<Self> {
        Self::new(vec![lo, lo], vec![hi, hi], n_grid)
    }

    /// Checks the invariants. Deserialized specs must be validated before use.
    pub fn validate(&self) -> Result<()> {
        let p = self.lower.len();
        if p == 0 || p > MAX_DIM {
            return Err(Error::Config(format!(
                "grid dimension must be 1 or 2, got {p}"
            )));
        }
        if self.upper.len() != p {
            return Err(Error::Config(format!(
                "grid corners disagree in dimension ({} vs {})",
                p,
                self.upper.len()
            )));
        }
        if self.n_grid < 2 {
            return Err(Error::Config(format!(
                "n_grid must be at least 2, got {}",
                self.n_grid
            )));
        }
        for (d, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "axis {d}: upper corner {hi} must exceed lower corner {lo}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Grid spacing along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.n_grid - 1) as f64
    }

    /// Total number of grid points, `n_grid^p`.
    pub fn len(&self) -> usize {
        self.n_grid.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same box, different resolution.
    pub fn with_resolution(&self, n_grid: usize) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), n_grid)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn pos(&self, index: &[usize]) -> Result<GridPos> {
        if index.len() != self.dim() || index.iter().any(|&i| i >= self.n_grid) {
            return Err(Error::OutOfBounds(format!(
                "index {index:?} is not on a {}-point grid of dimension {}",
                self.n_grid,
                self.dim()
            )));
        }
        let mut idx = [0usize; MAX_DIM];
        idx[..index.len()].copy_from_slice(index);
        Ok(GridPos {
            idx,
            dim: index.len() as u8,
        })
    }

    /// Position with the given flat (row-major, axis 0 fastest) index.
    pub fn pos_from_flat(&self, flat: usize) -> GridPos {
        debug_assert!(flat < self.len());
        let mut idx = [0usize; MAX_DIM];
        let mut rest = flat;
        for slot in idx.iter_mut().take(self.dim()) {
            *slot = rest % self.n_grid;
            rest /= self.n_grid;
        }
        GridPos {
            idx,
            dim: self.dim() as u8,
        }
    }

    pub fn flat(&self, pos: &GridPos) -> usize {
        pos.index()
            .iter()
            .rev()
            .fold(0, |acc, &i| acc * self.n_grid + i)
    }

    /// Physical coordinates of a grid position.
    pub fn coords(&self, pos: &GridPos) -> Vec<f64> {
        pos.index()
            .iter()
            .enumerate()
            .map(|(d, &i)| self.lower[d] + i as f64 * self.step(d))
            .collect()
    }

    /// Grid point nearest to a physical location (ties round half away from zero).
    pub fn snap(&self, x: &[f64]) -> Result<GridPos> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!(
                "point {x:?} has dimension {}, grid has {}",
                x.len(),
                self.dim()
            )));
        }
        let index: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(d, &v)| {
                let t = ((v - self.lower[d]) / self.step(d)).round();
                t.clamp(0.0, (self.n_grid - 1) as f64) as usize
            })
            .collect();
        self.pos(&index)
    }

    /// Every grid position in flat order.
    pub fn enumerate(&self) -> Vec<GridPos> {
        (0..self.len()).map(|f| self.pos_from_flat(f)).collect()
    }

    /// Physical coordinates of every grid point, flat order.
    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        self.enumerate().iter().map(|p| self.coords(p)).collect()
    }

    /// Applies the integrator dynamics. Leaving the grid is an error.
    pub fn step_dynamics(&self, x: &GridPos, u: Action) -> Result<GridPos> {
        let axis = u.axis();
        if axis >= self.dim() {
            return Err(Error::OutOfBounds(format!(
                "action {u:?} moves along axis {axis}, grid has {} axes",
                self.dim()
            )));
        }
        let cur = x.idx[axis];
        let next = if u.is_positive() {
            cur.checked_add(1).filter(|&v| v < self.n_grid)
        } else {
            cur.checked_sub(1)
        };
        match next {
            Some(v) => {
                let mut out = *x;
                out.idx[axis] = v;
                Ok(out)
            }
            None => Err(Error::OutOfBounds(format!(
                "action {u:?} from {:?} leaves the grid",
                x.index()
            ))),
        }
    }

    pub fn action_set(&self) -> ActionSet {
        ActionSet::for_dim(self.dim())
    }

    /// Successor table: `table[flat * k + a]` is the flat successor of
    /// action `a` (in canonical order), `None` when inadmissible.
    pub fn successor_table(&self) -> Vec<Option<usize>> {
        let actions = self.action_set();
        let mut table = Vec::with_capacity(self.len() * actions.len());
        for pos in self.enumerate() {
            for &u in actions.iter() {
                table.push(self.step_dynamics(&pos, u).ok().map(|n| self.flat(&n)));
            }
        }
        table
    }
}

/// A grid point stored by integer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPos {
    idx: [usize; MAX_DIM],
    dim: u8,
}

impl GridPos {
    pub fn index(&self) -> &[usize] {
        &self.idx[..self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }
}

/// Unit grid displacement. `Up`/`Down` move along axis 1, `Left`/`Right`
/// along axis 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub fn axis(self) -> usize {
        match self {
            Action::Up | Action::Down => 1,
            Action::Left | Action::Right => 0,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Action::Up | Action::Right)
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    /// Displacement in index units along each of the first `dim` axes.
    pub fn delta(self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        if self.axis() < dim {
            d[self.axis()] = if self.is_positive() { 1.0 } else { -1.0 };
        }
        d
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Actions in canonical order. Ties in every argmax resolve to the earliest entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    actions: Vec<Action>,
}

impl ActionSet {
    pub fn for_dim(dim: usize) -> Self {
        let actions = match dim {
            1 => vec![Action::Left, Action::Right],
            _ => vec![Action::Up, Action::Down, Action::Left, Action::Right],
        };
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.actions.iter()
    }

    pub fn get(&self, i: usize) -> Action {
        self.actions[i]
    }

    pub fn position(&self, a: Action) -> Option<usize> {
        self.actions.iter().position(|&b| b == a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_grid() -> GridSpec {
        GridSpec::square(0.0, 4.0, 21).unwrap()
    }

    #[test]
    fn up_from_center() {
        let g = reference_grid();
        let x = g.pos(&[10, 10]).unwrap();
        assert_eq!(g.coords(&x), vec![2.0, 2.0]);
        let y = g.step_dynamics(&x, Action::Up).unwrap();
        assert_eq!(y.index(), &[10, 11]);
        let c = g.coords(&y);
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 2.2).abs() < 1e-12);
    }

    #[test]
    fn corners_reject_outward_moves() {
        let g = reference_grid();
        let origin = g.pos(&[0, 0]).unwrap();
        assert!(matches!(
            g.step_dynamics(&origin, Action::Down),
            Err(Error::OutOfBounds(_))
        ));
        let far = g.pos(&[20, 20]).unwrap();
        assert!(matches!(
            g.step_dynamics(&far, Action::Right),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn smallest_grid_enumeration() {
        let g = GridSpec::square(0.0, 4.0, 2).unwrap();
        let pts: Vec<Vec<usize>> = g.enumerate().iter().map(|p| p.index().to_vec()).collect();
        assert_eq!(pts, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(
            g.all_coords(),
            vec![
                vec![0.0, 0.0],
                vec![4.0, 0.0],
                vec![0.0, 4.0],
                vec![4.0, 4.0]
            ]
        );
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(reference_grid().enumerate().len(), 441);
        let fine = reference_grid().with_resolution(41).unwrap();
        assert_eq!(fine.enumerate().len(), 1681);
    }

    #[test]
    fn invalid_specs() {
        assert!(GridSpec::square(0.0, 4.0, 1).is_err());
        assert!(GridSpec::square(4.0, 0.0, 5).is_err());
        assert!(GridSpec::new(vec![0.0; 3], vec![1.0; 3], 5).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0, 1.0], 5).is_err());
    }

    #[test]
    fn one_dimensional_actions() {
        let g = GridSpec::new(vec![0.0], vec![1.0], 3).unwrap();
        assert_eq!(g.action_set().len(), 2);
        let x = g.pos(&[1]).unwrap();
        assert_eq!(g.step_dynamics(&x, Action::Right).unwrap().index(), &[2]);
        assert!(g.step_dynamics(&x, Action::Up).is_err());
    }

    #[test]
    fn snapping() {
        let g = reference_grid();
        assert_eq!(g.snap(&[2.75, 3.5]).unwrap().index(), &[14, 18]);
        assert_eq!(g.snap(&[-1.0, 9.0]).unwrap().index(), &[0, 20]);
    }

    #[test]
    fn boundary_states_keep_two_actions() {
        let g = GridSpec::square(0.0, 1.0, 2).unwrap();
        let table = g.successor_table();
        for chunk in table.chunks(4) {
            assert!(chunk.iter().filter(|s| s.is_some()).count() >= 2);
        }
    }
}
