//! Path-aware optimistic optimization: a robot samples an unknown spatial
//! function along a grid trajectory, keeps a Lipschitz saw-tooth upper bound
//! of it, and plans each move with a few sweeps of value iteration over the
//! predicted bound refinements.
//!
//! Modules, bottom-up:
//! - [`world`]: grid, actions and integrator dynamics
//! - [`objective`]: RBF test functions and Lipschitz estimation
//! - [`bound`]: samples, saw-tooth bound, refinement volumes
//! - [`planner`]: reward field, value-iteration sweeps, greedy action
//! - [`baselines`]: committed DOO and local-linear gradient ascent
//! - [`simulator`]: closed-loop runs and metrics
//! - [`experiments`]: configs, presets and the benchmark sweeps
//! - [`export`]: CSV/JSON writers

pub mod baselines;
pub mod bound;
pub mod error;
pub mod experiments;
pub mod export;
pub mod objective;
pub mod planner;
pub mod simulator;
pub mod world;

pub use error::{Error, Result};
