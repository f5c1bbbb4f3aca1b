//! Black-box test functions and Lipschitz-constant estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::GridSpec;

/// A deterministic scalar field over the operating space.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Analytic gradient, used for Lipschitz estimation and as a test oracle.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// One anisotropic Gaussian bump `h * exp(-sum_d ((x_d - c_d) / b_d)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfComponent {
    pub width: Vec<f64>,
    pub height: f64,
    pub center: Vec<f64>,
}

impl RbfComponent {
    fn exponent(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(&self.width)
            .map(|((xi, ci), bi)| {
                let t = (xi - ci) / bi;
                t * t
            })
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.height * (-self.exponent(x)).exp()
    }
}

/// Sum of Gaussian radial basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfObjective {
    dim: usize,
    components: Vec<RbfComponent>,
}

impl RbfObjective {
    pub fn new(dim: usize, components: Vec<RbfComponent>) -> Result<Self> {
        let obj = Self { dim, components };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("objective dimension must be positive".into()));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.width.len() != self.dim || c.center.len() != self.dim {
                return Err(Error::Config(format!(
                    "component {i} does not match objective dimension {}",
                    self.dim
                )));
            }
            if c.width.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
                return Err(Error::Config(format!(
                    "component {i} has a non-positive width"
                )));
            }
            if !c.height.is_finite() || c.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("component {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Three-bump reference landscape on `[0, 4]^2`; global peak near `[2.75, 3.5]`.
    pub fn reference_3rbf() -> Self {
        let comp = |b: f64, h: f64, c: [f64; 2]| RbfComponent {
            width: vec![b, b],
            height: h,
            center: c.to_vec(),
        };
        Self {
            dim: 2,
            components: vec![
                comp(1.3, 148.75, [0.75, 1.5]),
                comp(0.6, 255.0, [2.75, 3.5]),
                comp(1.0, 212.5, [3.25, 0.75]),
            ],
        }
    }

    pub fn components(&self) -> &[RbfComponent] {
        &self.components
    }
}

impl Objective for RbfObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.eval(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for c in &self.components {
            let v = c.eval(x);
            for d in 0..self.dim {
                g[d] += -2.0 * v * (x[d] - c.center[d]) / (c.width[d] * c.width[d]);
            }
        }
        g
    }
}

/// Location and value of the maximum used by the error metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub optimum: Vec<f64>,
    pub f_star: f64,
}

impl GroundTruth {
    /// `f*` is taken as the objective value at the given optimum.
    pub fn at(objective: &dyn Objective, optimum: Vec<f64>) -> Self {
        let f_star = objective.eval(&optimum);
        Self { optimum, f_star }
    }
}

/// Largest analytic gradient norm over the grid refined by `refinement`
/// (and every coarser refinement, so the estimate never shrinks as the
/// factor grows).
pub fn estimate_lipschitz(
    objective: &dyn Objective,
    spec: &GridSpec,
    refinement: usize,
) -> Result<f64> {
    if refinement == 0 {
        return Err(Error::Config("refinement factor must be at least 1".into()));
    }
    let mut best = 0.0f64;
    for r in 1..=refinement {
        let fine = spec.with_resolution((spec.n_grid() - 1) * r + 1)?;
        for x in fine.all_coords() {
            let n = objective
                .gradient(&x)
                .iter()
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            best = best.max(n);
        }
    }
    Ok(best)
}
