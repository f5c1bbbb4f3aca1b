//! CSV and JSON writers for runs, sweeps and dense grid fields.
//!
//! Timing never enters a CSV file, so repeated runs produce byte-identical
//! tables; wall-clock figures live only in the JSON summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{aggregate, FieldDump, RefinementTrace, RunSummaryRow, SweepAggregate, SweepResult, SweepRow};
use crate::simulator::{RunResult, TrajectoryLog};
use crate::world::GridSpec;

pub const STEP_HEADER: [&str; 12] = [
    "k",
    "x0",
    "x1",
    "f",
    "action",
    "predicted_r",
    "actual_r",
    "distance",
    "best_f",
    "delta_x",
    "delta_f",
    "new_sample",
];

/// One parsed row of a per-step CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub k: usize,
    pub x0: f64,
    pub x1: Option<f64>,
    pub f: f64,
    pub action: Option<String>,
    pub predicted_r: Option<f64>,
    pub actual_r: Option<f64>,
    pub distance: f64,
    pub best_f: f64,
    pub delta_x: f64,
    pub delta_f: f64,
    pub new_sample: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_steps<W: Write>(out: W, log: &TrajectoryLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEP_HEADER)?;
    for r in &log.records {
        w.write_record([
            r.k.to_string(),
            r.position[0].to_string(),
            opt(r.position.get(1).copied()),
            r.value.to_string(),
            r.action.map(|a| a.as_str().to_string()).unwrap_or_default(),
            opt(r.predicted_refinement),
            opt(r.actual_refinement),
            r.distance.to_string(),
            r.metrics.best_value.to_string(),
            r.metrics.delta_x.to_string(),
            r.metrics.delta_f.to_string(),
            r.new_sample.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_steps_csv(path: &Path, log: &TrajectoryLog) -> Result<()> {
    write_steps(BufWriter::new(File::create(path)?), log)
}

pub fn read_steps_csv(path: &Path) -> Result<Vec<StepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// First cumulative distance at which `delta_x <= delta`.
pub fn convergence_from_steps(rows: &[StepRow], delta: f64) -> Option<f64> {
    rows.iter()
        .find(|r| r.delta_x <= delta + 1e-9)
        .map(|r| r.distance)
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary<'a> {
    label: &'a str,
    delta: f64,
    failure: bool,
    #[serde(flatten)]
    result: &'a RunResult,
}

pub fn write_run_json(path: &Path, row: &SweepRow) -> Result<()> {
    let summary = RunSummary {
        label: &row.label,
        delta: row.delta,
        failure: row.failure,
        result: &row.result,
    };
    fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

pub fn write_runs_csv(path: &Path, rows: &[RunSummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunSummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub aggregate: SweepAggregate,
    pub runs: Vec<RunSummaryRow>,
    /// Mean planning seconds per step, keyed by run label.
    pub timing: Vec<(String, f64)>,
}

/// Writes a sweep to `dir`: one step CSV and JSON summary per run, the
/// per-run table `runs.csv` and the aggregate `summary.json`.
pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for row in &sweep.rows {
        let csv_path = dir.join(format!("{}.csv", row.label));
        write_steps_csv(&csv_path, &row.result.log)?;
        let json_path = dir.join(format!("{}.json", row.label));
        write_run_json(&json_path, row)?;
        written.extend([csv_path, json_path]);
    }
    let runs = sweep.summary_rows();
    let runs_path = dir.join("runs.csv");
    write_runs_csv(&runs_path, &runs)?;
    let summary = SweepSummary {
        name: sweep.name.clone(),
        aggregate: sweep.aggregate.clone(),
        runs,
        timing: sweep
            .rows
            .iter()
            .map(|r| (r.label.clone(), r.result.mean_step_seconds))
            .collect(),
    };
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    written.extend([runs_path, summary_path]);
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<SweepSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Recomputes the aggregate of a results directory from `runs.csv` and
/// writes it to `report.json`.
pub fn report(dir: &Path) -> Result<SweepAggregate> {
    let rows = read_runs_csv(&dir.join("runs.csv"))?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{} holds no runs", dir.display())));
    }
    let agg = aggregate(&rows);
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&agg)?)?;
    Ok(agg)
}

/// Dumps per-state columns over the grid, one row per grid point.
pub fn write_field_csv(path: &Path, spec: &GridSpec, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in columns {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "column `{name}` has {} values for {} states",
                values.len(),
                spec.len()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["state".to_string()];
    for a in 0..spec.dim() {
        header.push(format!("i{a}"));
    }
    for a in 0..spec.dim() {
        header.push(format!("x{a}"));
    }
    header.extend(columns.iter().map(|c| c.0.to_string()));
    w.write_record(&header)?;
    for s in 0..spec.len() {
        let pos = spec.pos_from_flat(s);
        let mut rec = vec![s.to_string()];
        rec.extend(pos.index().iter().map(|i| i.to_string()));
        rec.extend(spec.coords(&pos).iter().map(|x| x.to_string()));
        rec.extend(columns.iter().map(|c| c.1[s].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes bound, state value, rewards and Q-values to one grid table.
pub fn write_fields_csv(path: &Path, spec: &GridSpec, dump: &FieldDump) -> Result<()> {
    let rho_names: Vec<String> = dump.actions.iter().map(|a| format!("rho_{a}")).collect();
    let q_names: Vec<String> = dump.actions.iter().map(|a| format!("q_{a}")).collect();
    let mut columns: Vec<(&str, &[f64])> = vec![("bound", &dump.bound), ("value", &dump.value)];
    for (name, col) in rho_names.iter().zip(&dump.rewards) {
        columns.push((name, col));
    }
    for (name, col) in q_names.iter().zip(&dump.q) {
        columns.push((name, col));
    }
    write_field_csv(path, spec, &columns)
}

pub fn write_refinement_trace(path: &Path, trace: &RefinementTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "predicted_r", "actual_r"])?;
    for (k, (p, a)) in trace.predicted.iter().zip(&trace.actual).enumerate() {
        w.write_record([k.to_string(), p.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
