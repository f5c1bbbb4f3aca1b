//! Closed-loop runner: sample, plan, move, measure.
//!
//! A run of `n` steps samples `x_0 .. x_n` (n + 1 samples). The realized
//! refinement of step `k` is only known after `x_{k+1}` has been sampled,
//! so it is filled into record `k` one step late.

use std::time::Instant;

use serde::Serialize;

use crate::bound::{actual_refinement, BoundField, GridGeometry, SampleSet};
use crate::error::{Error, Result};
use crate::objective::{GroundTruth, Objective};
use crate::world::{Action, GridPos, GridSpec};

/// What a planner sees when choosing the next move.
pub struct StepContext<'a> {
    pub spec: &'a GridSpec,
    pub geom: &'a GridGeometry,
    pub samples: &'a SampleSet,
    /// Saw-tooth bound of `samples`.
    pub bound: &'a BoundField,
    pub position: GridPos,
    pub previous: Option<GridPos>,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub action: Action,
    pub predicted_refinement: Option<f64>,
    /// The planner considers itself converged (used by local methods).
    pub settled: bool,
}

/// Method-agnostic single-step policy.
pub trait StepPlanner {
    fn name(&self) -> &'static str;

    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<StepDecision>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub start: Vec<usize>,
    pub steps: usize,
    pub lipschitz: f64,
    /// Convergence radius around the optimum.
    pub delta: f64,
    pub truth: GroundTruth,
}

/// Running best-so-far metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Largest sampled value.
    pub best_value: f64,
    /// Smallest distance from a sample to the optimum.
    pub delta_x: f64,
    /// Smallest gap `f* - f(x_s)`.
    pub delta_f: f64,
}

impl Default for Metrics {
    fn default() -> Self {
        Self {
            best_value: f64::NEG_INFINITY,
            delta_x: f64::INFINITY,
            delta_f: f64::INFINITY,
        }
    }
}

impl Metrics {
    pub fn update(&mut self, truth: &GroundTruth, position: &[f64], value: f64) {
        let dx = position
            .iter()
            .zip(&truth.optimum)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.best_value = self.best_value.max(value);
        self.delta_x = self.delta_x.min(dx);
        self.delta_f = self.delta_f.min(truth.f_star - value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub index: Vec<usize>,
    pub position: Vec<f64>,
    pub value: f64,
    /// False when the position had been sampled before.
    pub new_sample: bool,
    /// `None` on the terminal record.
    pub action: Option<Action>,
    pub predicted_refinement: Option<f64>,
    pub actual_refinement: Option<f64>,
    /// Distance travelled when this sample was taken.
    pub distance: f64,
    pub metrics: Metrics,
    /// The new sample exceeded the bound predicted before taking it.
    pub domination_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub planner: String,
    pub records: Vec<StepRecord>,
    /// Volume under the bound after each sample.
    pub bound_volumes: Vec<f64>,
    /// Planning wall-clock per step, seconds.
    pub plan_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub planner: String,
    /// Some sample lies within `delta` of the optimum.
    pub converged: bool,
    /// Distance travelled at the first sample within `delta` of the optimum.
    pub distance_to_convergence: Option<f64>,
    /// Distance at which the planner declared itself converged, if it did.
    pub settled_distance: Option<f64>,
    pub final_metrics: Metrics,
    pub samples: usize,
    pub domination_violations: usize,
    pub mean_step_seconds: f64,
    #[serde(skip)]
    pub log: TrajectoryLog,
}

impl RunResult {
    /// Convergence distance as reported for method comparisons: the local
    /// settling distance for planners that declare one, otherwise the
    /// distance to the optimum.
    pub fn reported_distance(&self) -> Option<f64> {
        self.settled_distance.or(self.distance_to_convergence)
    }
}

/// Read-only view handed to observers after every sample.
pub struct StepView<'a> {
    pub k: usize,
    pub samples: &'a SampleSet,
    pub bound: &'a BoundField,
    pub geom: &'a GridGeometry,
}

pub fn run(
    planner: &mut dyn StepPlanner,
    objective: &dyn Objective,
    spec: &GridSpec,
    config: &RunConfig,
) -> Result<RunResult> {
    run_observed(planner, objective, spec, config, &mut |_| {})
}

/// Like [`run`], calling `observer` after each sample has been folded into the bound.
pub fn run_observed(
    planner: &mut dyn StepPlanner,
    objective: &dyn Objective,
    spec: &GridSpec,
    config: &RunConfig,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<RunResult> {
    validate(objective, spec, config)?;
    let geom = GridGeometry::new(spec);
    let step_len = spec.step(0);
    let mut position = spec.pos(&config.start)?;
    let mut previous = None;
    let mut samples = SampleSet::new();
    let mut bound = BoundField::empty(spec, config.lipschitz);
    let mut metrics = Metrics::default();
    let mut log = TrajectoryLog {
        planner: planner.name().to_string(),
        records: Vec::with_capacity(config.steps + 1),
        bound_volumes: Vec::with_capacity(config.steps + 1),
        plan_seconds: Vec::with_capacity(config.steps),
    };
    let mut settled_distance = None;
    let mut first_hit = None;
    let mut violations = 0;

    for k in 0..=config.steps {
        let distance = k as f64 * step_len;
        let coords = spec.coords(&position);
        let value = objective.eval(&coords);
        let flat = spec.flat(&position);

        let before = bound.at(flat);
        let violated =
            before.is_finite() && value > before + 1e-9 * value.abs().max(1.0);
        violations += usize::from(violated);

        let new_sample = samples.insert(coords.clone(), value);
        let prev_bound = bound.clone();
        if new_sample {
            bound.overlay_in_place(&geom, &coords, value);
        }
        if let Some(last) = log.records.last_mut() {
            last.actual_refinement = Some(actual_refinement(&prev_bound, &bound, &geom)?);
        }
        log.bound_volumes.push(bound.volume(&geom));

        metrics.update(&config.truth, &coords, value);
        if first_hit.is_none() && metrics.delta_x <= config.delta + 1e-9 {
            first_hit = Some(distance);
        }
        observer(&StepView {
            k,
            samples: &samples,
            bound: &bound,
            geom: &geom,
        });

        let mut record = StepRecord {
            k,
            index: position.index().to_vec(),
            position: coords,
            value,
            new_sample,
            action: None,
            predicted_refinement: None,
            actual_refinement: None,
            distance,
            metrics,
            domination_violated: violated,
        };

        if k < config.steps {
            let ctx = StepContext {
                spec,
                geom: &geom,
                samples: &samples,
                bound: &bound,
                position,
                previous,
                lipschitz: config.lipschitz,
            };
            let started = Instant::now();
            let decision = planner.decide(&ctx)?;
            log.plan_seconds.push(started.elapsed().as_secs_f64());
            if decision.settled && settled_distance.is_none() {
                settled_distance = Some(distance);
            }
            record.action = Some(decision.action);
            record.predicted_refinement = decision.predicted_refinement;
            let next = spec.step_dynamics(&position, decision.action)?;
            previous = Some(position);
            position = next;
        }
        log.records.push(record);
    }

    let mean_step_seconds = if log.plan_seconds.is_empty() {
        0.0
    } else {
        log.plan_seconds.iter().sum::<f64>() / log.plan_seconds.len() as f64
    };
    Ok(RunResult {
        planner: log.planner.clone(),
        converged: metrics.delta_x <= config.delta + 1e-9,
        distance_to_convergence: first_hit,
        settled_distance,
        final_metrics: metrics,
        samples: samples.len(),
        domination_violations: violations,
        mean_step_seconds,
        log,
    })
}

fn validate(objective: &dyn Objective, spec: &GridSpec, config: &RunConfig) -> Result<()> {
    spec.validate()?;
    if objective.dim() != spec.dim() {
        return Err(Error::Config(format!(
            "objective has dimension {}, grid has {}",
            objective.dim(),
            spec.dim()
        )));
    }
    if config.truth.optimum.len() != spec.dim() {
        return Err(Error::Config("optimum dimension does not match grid".into()));
    }
    if config.steps == 0 {
        return Err(Error::Config("a run needs at least one step".into()));
    }
    if !(config.lipschitz > 0.0 && config.lipschitz.is_finite()) {
        return Err(Error::Config(format!(
            "Lipschitz constant must be positive, got {}",
            config.lipschitz
        )));
    }
    if !(config.delta >= 0.0) {
        return Err(Error::Config("convergence radius must be nonnegative".into()));
    }
    spec.pos(&config.start)
        .map_err(|e| Error::Config(format!("start position: {e}")))?;
    Ok(())
}
