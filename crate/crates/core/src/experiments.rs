//! Declarative experiment configs, the named reference presets and the
//! benchmark sweeps built on top of [`crate::simulator::run`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::{CdooPlanner, GradientPlanner};
use crate::bound::{rebuild_bound, SampleSet};
use crate::error::{Error, Result};
use crate::objective::{GroundTruth, Objective, RbfObjective};
use crate::planner::OopaPlanner;
use crate::simulator::{run, RunConfig, RunResult, StepPlanner};
use crate::world::GridSpec;

/// Lipschitz constant used by every reference preset.
pub const REFERENCE_LIPSCHITZ: f64 = 364.54;
/// Sweep counts of the m study.
pub const M_VALUES: [usize; 5] = [1, 2, 3, 4, 5];
/// Points per axis of the grid study.
pub const GRID_SIZES: [usize; 5] = [21, 26, 31, 36, 41];
/// Path length of every run in the grid study, metres.
pub const GRID_STUDY_LENGTH: f64 = 75.0;
/// Multipliers of the Lipschitz robustness study.
pub const LAMBDAS: [f64; 10] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0];

pub const PRESETS: [&str; 6] = [
    "paper-standard",
    "paper-msweep",
    "paper-grids",
    "paper-lipschitz",
    "paper-baselines",
    "paper-refinement",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    /// Named objective; only `paper-3rbf` ships.
    Preset(String),
    Rbf(RbfObjective),
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<RbfObjective> {
        match self {
            ObjectiveSpec::Preset(name) if name == "paper-3rbf" => Ok(RbfObjective::reference_3rbf()),
            ObjectiveSpec::Preset(name) => {
                Err(Error::Config(format!("unknown objective preset `{name}`")))
            }
            ObjectiveSpec::Rbf(obj) => {
                obj.validate()?;
                Ok(obj.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Oopa,
    Cdoo,
    Gradient,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Oopa => "oopa",
            PlannerKind::Cdoo => "cdoo",
            PlannerKind::Gradient => "gradient",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oopa" => Ok(PlannerKind::Oopa),
            "cdoo" => Ok(PlannerKind::Cdoo),
            "gradient" => Ok(PlannerKind::Gradient),
            other => Err(Error::Config(format!("unknown planner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Single,
    MSweep,
    GridSweep,
    LipschitzSweep,
    Baselines,
    RefinementTrace,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_sweeps() -> usize {
    3
}

fn default_neighbors() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub objective: ObjectiveSpec,
    pub grid: GridSpec,
    /// Base Lipschitz constant; runs use `lambda * lipschitz`.
    pub lipschitz: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub planner: PlannerKind,
    /// Value-iteration sweeps per step.
    #[serde(default = "default_sweeps")]
    pub m: usize,
    /// Neighbours of the local linear fit.
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    pub steps: usize,
    /// Start positions in metres; snapped to the nearest grid point.
    pub starts: Vec<Vec<f64>>,
    /// Location of the maximum used by the metrics.
    pub optimum: Vec<f64>,
    /// Convergence radius; one grid step when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Reserved; every planner here is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = Self {
            name: name.to_string(),
            kind: ExperimentKind::Single,
            objective: ObjectiveSpec::Preset("paper-3rbf".into()),
            grid: GridSpec::square(0.0, 4.0, 21)?,
            lipschitz: REFERENCE_LIPSCHITZ,
            lambda: 1.0,
            planner: PlannerKind::Oopa,
            m: 3,
            neighbors: 4,
            steps: 125,
            starts: vec![vec![2.0, 2.0]],
            optimum: vec![2.75, 3.5],
            delta: None,
            out_dir: None,
            seed: 0,
        };
        match name {
            "paper-standard" => {}
            "paper-msweep" => cfg.kind = ExperimentKind::MSweep,
            "paper-grids" => {
                cfg.kind = ExperimentKind::GridSweep;
                cfg.steps = (GRID_STUDY_LENGTH / cfg.grid.step(0)).round() as usize;
            }
            "paper-lipschitz" => cfg.kind = ExperimentKind::LipschitzSweep,
            "paper-baselines" => {
                cfg.kind = ExperimentKind::Baselines;
                cfg.steps = 250;
                cfg.starts = baseline_starts(&RbfObjective::reference_3rbf());
            }
            "paper-refinement" => {
                cfg.kind = ExperimentKind::RefinementTrace;
                cfg.steps = 250;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let objective = self.objective.build()?;
        let dim = self.grid.dim();
        if objective.dim() != dim {
            return Err(Error::Config(format!(
                "objective dimension {} does not match grid dimension {dim}",
                objective.dim()
            )));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::Config("lipschitz must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.neighbors < 3 {
            return Err(Error::Config("neighbors must be at least 3".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::Config("at least one start position is required".into()));
        }
        for s in &self.starts {
            if !self.grid.contains_point(s) {
                return Err(Error::Config(format!("start {s:?} lies outside the grid")));
            }
        }
        if !self.grid.contains_point(&self.optimum) {
            return Err(Error::Config(format!(
                "optimum {:?} lies outside the grid",
                self.optimum
            )));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Config("delta must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn effective_lipschitz(&self) -> f64 {
        self.lambda * self.lipschitz
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| self.grid.step(0))
    }

    fn planner(&self) -> Result<Box<dyn StepPlanner>> {
        Ok(match self.planner {
            PlannerKind::Oopa => Box::new(OopaPlanner::new(&self.grid, self.m)?),
            PlannerKind::Cdoo => Box::new(CdooPlanner::new()),
            PlannerKind::Gradient => Box::new(GradientPlanner::new(self.neighbors)?),
        })
    }

    /// Runs the configured planner from one start.
    pub fn run_from(&self, start: &[f64]) -> Result<RunResult> {
        self.validate()?;
        let objective = self.objective.build()?;
        let start = self.grid.snap(start)?.index().to_vec();
        let cfg = RunConfig {
            start,
            steps: self.steps,
            lipschitz: self.effective_lipschitz(),
            delta: self.delta(),
            truth: GroundTruth::at(&objective, self.optimum.clone()),
        };
        let mut planner = self.planner()?;
        run(planner.as_mut(), &objective, &self.grid, &cfg)
    }
}

/// Five equidistant interior points on each segment joining two bump
/// centers (t = 1/6 .. 5/6), in metres.
pub fn baseline_starts(objective: &RbfObjective) -> Vec<Vec<f64>> {
    let centers: Vec<&[f64]> = objective
        .components()
        .iter()
        .map(|c| c.center.as_slice())
        .collect();
    let n = centers.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (centers[i], centers[(i + 1) % n]);
        if n == 2 && i == 1 {
            break;
        }
        for k in 1..=5 {
            let t = k as f64 / 6.0;
            out.push(a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect());
        }
    }
    out
}

/// One run inside a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// Unique, file-name safe identifier.
    pub label: String,
    pub planner: PlannerKind,
    /// Swept parameter value (m, grid size, lambda or start index).
    pub parameter: f64,
    pub start: Vec<usize>,
    /// Domination violated or optimum not reached.
    pub failure: bool,
    pub delta: f64,
    pub result: RunResult,
}

impl SweepRow {
    fn new(label: String, planner: PlannerKind, parameter: f64, delta: f64, result: RunResult) -> Self {
        let start = result.log.records[0].index.clone();
        let failure = result.domination_violations > 0 || !result.converged;
        Self {
            label,
            planner,
            parameter,
            start,
            failure,
            delta,
            result,
        }
    }
}

/// Per-planner aggregate over the rows of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerAggregate {
    pub planner: PlannerKind,
    pub runs: usize,
    pub converged: usize,
    pub success_rate: f64,
    /// Mean distance to convergence over converged runs.
    pub mean_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub planners: Vec<PlannerAggregate>,
    /// Mean OOPA and CDOO distances over starts where both reached the optimum.
    pub mutual_oopa_mean: Option<f64>,
    pub mutual_cdoo_mean: Option<f64>,
    /// `1 - oopa / cdoo` over mutually converged starts.
    pub oopa_distance_reduction: Option<f64>,
}

/// Minimal per-run facts that aggregates are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryRow {
    pub label: String,
    pub planner: PlannerKind,
    pub parameter: f64,
    pub start_index: String,
    pub converged: bool,
    pub distance: Option<f64>,
    pub settled_distance: Option<f64>,
    pub failure: bool,
    pub samples: usize,
    pub best_value: f64,
    pub delta_x: f64,
    pub delta_f: f64,
    pub violations: usize,
}

impl From<&SweepRow> for RunSummaryRow {
    fn from(row: &SweepRow) -> Self {
        let r = &row.result;
        Self {
            label: row.label.clone(),
            planner: row.planner,
            parameter: row.parameter,
            start_index: row
                .start
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            converged: r.converged,
            distance: r.distance_to_convergence,
            settled_distance: r.settled_distance,
            failure: row.failure,
            samples: r.samples,
            best_value: r.final_metrics.best_value,
            delta_x: r.final_metrics.delta_x,
            delta_f: r.final_metrics.delta_f,
            violations: r.domination_violations,
        }
    }
}

/// Recomputes the aggregate statistics from per-run rows alone.
pub fn aggregate(rows: &[RunSummaryRow]) -> SweepAggregate {
    let mut kinds: Vec<PlannerKind> = Vec::new();
    for r in rows {
        if !kinds.contains(&r.planner) {
            kinds.push(r.planner);
        }
    }
    let planners = kinds
        .iter()
        .map(|&k| {
            let mine: Vec<_> = rows.iter().filter(|r| r.planner == k).collect();
            let hits: Vec<f64> = mine.iter().filter_map(|r| r.distance).collect();
            let converged = mine.iter().filter(|r| r.converged).count();
            PlannerAggregate {
                planner: k,
                runs: mine.len(),
                converged,
                success_rate: converged as f64 / mine.len() as f64,
                mean_distance: mean(&hits),
            }
        })
        .collect();

    // Pair OOPA and CDOO rows that share a start.
    let mut pairs = Vec::new();
    for o in rows.iter().filter(|r| r.planner == PlannerKind::Oopa) {
        if let Some(c) = rows
            .iter()
            .find(|r| r.planner == PlannerKind::Cdoo && r.start_index == o.start_index)
        {
            if let (Some(a), Some(b)) = (o.distance, c.distance) {
                pairs.push((a, b));
            }
        }
    }
    let mutual_oopa_mean = mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let mutual_cdoo_mean = mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let oopa_distance_reduction = match (mutual_oopa_mean, mutual_cdoo_mean) {
        (Some(a), Some(b)) if b > 0.0 => Some(1.0 - a / b),
        _ => None,
    };
    SweepAggregate {
        planners,
        mutual_oopa_mean,
        mutual_cdoo_mean,
        oopa_distance_reduction,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub name: String,
    pub kind: ExperimentKind,
    pub rows: Vec<SweepRow>,
    pub aggregate: SweepAggregate,
}

impl SweepResult {
    pub fn from_rows(name: &str, kind: ExperimentKind, rows: Vec<SweepRow>) -> Self {
        let summaries: Vec<RunSummaryRow> = rows.iter().map(RunSummaryRow::from).collect();
        Self {
            name: name.to_string(),
            kind,
            aggregate: aggregate(&summaries),
            rows,
        }
    }

    pub fn summary_rows(&self) -> Vec<RunSummaryRow> {
        self.rows.iter().map(RunSummaryRow::from).collect()
    }

    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

fn single_row(config: &ExperimentConfig, label: String, parameter: f64) -> Result<SweepRow> {
    let result = config.run_from(&config.starts[0])?;
    Ok(SweepRow::new(label, config.planner, parameter, config.delta(), result))
}

/// The configured planner from every start.
pub fn run_single(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for (i, s) in config.starts.iter().enumerate() {
        let result = config.run_from(s)?;
        let label = if config.starts.len() == 1 {
            config.planner.as_str().to_string()
        } else {
            format!("{}_start{:02}", config.planner.as_str(), i)
        };
        rows.push(SweepRow::new(label, config.planner, i as f64, config.delta(), result));
    }
    Ok(SweepResult::from_rows(&config.name, ExperimentKind::Single, rows))
}

/// OOPA for every m in [`M_VALUES`].
pub fn sweep_m(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for m in M_VALUES {
        let cfg = ExperimentConfig {
            m,
            planner: PlannerKind::Oopa,
            ..config.clone()
        };
        rows.push(single_row(&cfg, format!("m{m}"), m as f64)?);
    }
    Ok(SweepResult::from_rows(&config.name, ExperimentKind::MSweep, rows))
}

/// OOPA on every grid in [`GRID_SIZES`], each run covering the same path
/// length and judged at one grid step of accuracy.
pub fn sweep_grid(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for n in GRID_SIZES {
        let grid = config.grid.with_resolution(n)?;
        let step = grid.step(0);
        let cfg = ExperimentConfig {
            steps: (GRID_STUDY_LENGTH / step).round() as usize,
            delta: Some(step),
            grid,
            planner: PlannerKind::Oopa,
            ..config.clone()
        };
        rows.push(single_row(&cfg, format!("grid{n}"), n as f64)?);
    }
    Ok(SweepResult::from_rows(&config.name, ExperimentKind::GridSweep, rows))
}

/// OOPA with `lambda * M` for every lambda in [`LAMBDAS`].
pub fn sweep_lipschitz(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for lambda in LAMBDAS {
        let cfg = ExperimentConfig {
            lambda,
            planner: PlannerKind::Oopa,
            ..config.clone()
        };
        rows.push(single_row(&cfg, format!("lambda{lambda}"), lambda)?);
    }
    Ok(SweepResult::from_rows(&config.name, ExperimentKind::LipschitzSweep, rows))
}

/// OOPA, CDOO and gradient ascent from every configured start.
pub fn compare_baselines(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for (i, s) in config.starts.iter().enumerate() {
        for planner in [PlannerKind::Oopa, PlannerKind::Cdoo, PlannerKind::Gradient] {
            let cfg = ExperimentConfig {
                planner,
                ..config.clone()
            };
            let result = cfg.run_from(s)?;
            rows.push(SweepRow::new(
                format!("{}_start{:02}", planner.as_str(), i),
                planner,
                i as f64,
                cfg.delta(),
                result,
            ));
        }
    }
    Ok(SweepResult::from_rows(&config.name, ExperimentKind::Baselines, rows))
}

/// Predicted versus realized refinement along one OOPA run.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementTrace {
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub correlation: f64,
    /// Mean absolute prediction error over the first and last `window` steps.
    pub early_error: f64,
    pub late_error: f64,
    pub window: usize,
    pub run: SweepResult,
}

pub fn trace_refinement_accuracy(config: &ExperimentConfig) -> Result<RefinementTrace> {
    config.validate()?;
    let cfg = ExperimentConfig {
        planner: PlannerKind::Oopa,
        ..config.clone()
    };
    let row = single_row(&cfg, "oopa".into(), cfg.m as f64)?;
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    for rec in &row.result.log.records {
        if let (Some(p), Some(a)) = (rec.predicted_refinement, rec.actual_refinement) {
            predicted.push(p);
            actual.push(a);
        }
    }
    let window = 50.min(predicted.len());
    let mae = |range: std::ops::Range<usize>| {
        let n = range.len().max(1) as f64;
        range.map(|i| (predicted[i] - actual[i]).abs()).sum::<f64>() / n
    };
    let n = predicted.len();
    Ok(RefinementTrace {
        correlation: pearson(&predicted, &actual),
        early_error: mae(0..window),
        late_error: mae(n - window..n),
        window,
        predicted,
        actual,
        run: SweepResult::from_rows(&config.name, ExperimentKind::RefinementTrace, vec![row]),
    })
}

/// Pearson correlation; 0 when either series is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] - ma, b[i] - mb);
        cov += x * y;
        va += x * x;
        vb += y * y;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Least-squares slope of `ln(time)` against `ln(grid points)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Dense grid fields left behind by an OOPA run: the final bound, and the
/// rewards, Q-values and state values of the last planning step.
#[derive(Debug, Clone)]
pub struct FieldDump {
    pub actions: Vec<&'static str>,
    pub bound: Vec<f64>,
    pub value: Vec<f64>,
    /// Indexed `[action][state]`.
    pub rewards: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

/// Runs OOPA from the first configured start and keeps the planner state.
pub fn run_oopa_with_fields(config: &ExperimentConfig) -> Result<(SweepRow, FieldDump)> {
    config.validate()?;
    let objective = config.objective.build()?;
    let cfg = RunConfig {
        start: config.grid.snap(&config.starts[0])?.index().to_vec(),
        steps: config.steps,
        lipschitz: config.effective_lipschitz(),
        delta: config.delta(),
        truth: GroundTruth::at(&objective, config.optimum.clone()),
    };
    let mut planner = OopaPlanner::new(&config.grid, config.m)?;
    let result = run(&mut planner, &objective, &config.grid, &cfg)?;

    let mut samples = SampleSet::new();
    for rec in &result.log.records {
        samples.insert(rec.position.clone(), rec.value);
    }
    let bound = rebuild_bound(&samples, &config.grid, cfg.lipschitz);
    let model = planner.model();
    let step = planner
        .last_step()
        .ok_or_else(|| Error::Config("run made no planning step".into()))?;
    let per_action = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..model.n_actions())
            .map(|a| (0..model.n_states()).map(|s| f(s, a)).collect())
            .collect()
    };
    let dump = FieldDump {
        actions: model.actions().iter().map(|a| a.as_str()).collect(),
        bound: bound.values().to_vec(),
        value: step.q.value_field(model),
        rewards: per_action(&|s, a| step.rewards.reward(s, a)),
        q: per_action(&|s, a| step.q.get(s, a)),
    };
    let row = SweepRow::new("oopa".into(), PlannerKind::Oopa, config.m as f64, config.delta(), result);
    Ok((row, dump))
}

/// Runs whatever experiment the config describes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    match config.kind {
        ExperimentKind::Single => run_single(config),
        ExperimentKind::MSweep => sweep_m(config),
        ExperimentKind::GridSweep => sweep_grid(config),
        ExperimentKind::LipschitzSweep => sweep_lipschitz(config),
        ExperimentKind::Baselines => compare_baselines(config),
        ExperimentKind::RefinementTrace => trace_refinement_accuracy(config).map(|t| t.run),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("paper-nothing").is_err());
    }

    #[test]
    fn grid_preset_covers_75_metres() {
        let cfg = ExperimentConfig::preset("paper-grids").unwrap();
        assert_eq!(cfg.steps, 375);
    }

    #[test]
    fn baseline_starts_lie_between_centers() {
        let starts = baseline_starts(&RbfObjective::reference_3rbf());
        assert_eq!(starts.len(), 15);
        // First segment runs from [0.75, 1.5] to [2.75, 3.5].
        let s = &starts[2];
        assert!((s[0] - 1.75).abs() < 1e-12 && (s[1] - 2.5).abs() < 1e-12);
        let spec = GridSpec::square(0.0, 4.0, 21).unwrap();
        assert!(starts.iter().all(|s| spec.contains_point(s)));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let base = ExperimentConfig::preset("paper-standard").unwrap();
        let mut c = base.clone();
        c.starts = vec![vec![5.0, 1.0]];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.objective = ObjectiveSpec::Preset("nope".into());
        assert!(c.validate().is_err());
        let mut c = base;
        c.grid = GridSpec::new(vec![0.0], vec![4.0], 21).unwrap();
        c.starts = vec![vec![2.0]];
        c.optimum = vec![2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip_keeps_defaults() {
        let text = r#"{
            "name": "custom",
            "kind": "single",
            "objective": {"preset": "paper-3rbf"},
            "grid": {"lower": [0.0, 0.0], "upper": [4.0, 4.0], "n_grid": 11},
            "lipschitz": 364.54,
            "planner": "cdoo",
            "steps": 10,
            "starts": [[2.0, 2.0]],
            "optimum": [2.75, 3.5]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.m, 3);
        assert_eq!(cfg.neighbors, 4);
        assert!((cfg.delta() - 0.4).abs() < 1e-12);
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn aggregate_pairs_mutual_starts() {
        let row = |planner, start: &str, distance: Option<f64>| RunSummaryRow {
            label: format!("{planner:?}{start}"),
            planner,
            parameter: 0.0,
            start_index: start.into(),
            converged: distance.is_some(),
            distance,
            settled_distance: None,
            failure: distance.is_none(),
            samples: 1,
            best_value: 0.0,
            delta_x: 0.0,
            delta_f: 0.0,
            violations: 0,
        };
        let rows = vec![
            row(PlannerKind::Oopa, "1;1", Some(6.0)),
            row(PlannerKind::Cdoo, "1;1", Some(10.0)),
            row(PlannerKind::Oopa, "2;2", Some(4.0)),
            row(PlannerKind::Cdoo, "2;2", None),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.mutual_oopa_mean, Some(6.0));
        assert_eq!(agg.mutual_cdoo_mean, Some(10.0));
        assert!((agg.oopa_distance_reduction.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(agg.planners[0].converged, 2);
        assert_eq!(agg.planners[1].success_rate, 0.5);
    }

    #[test]
    fn pearson_and_slope() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.9986).abs() < 1e-3);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 3.0]), 0.0);
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&g| (g, 3.0 * g * g)).collect();
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }
}
