use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oopa::experiments::{
    self, ExperimentConfig, ExperimentKind, PlannerKind, SweepResult, PRESETS,
};
use oopa::export;

#[derive(Parser)]
#[command(name = "oopa-bench", version, about = "Path-aware optimistic optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planner from every configured start.
    Run {
        #[command(flatten)]
        source: Source,
        /// Also dump bound, reward, Q and value grids of the final OOPA step.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Run the experiment kind named by the config or preset.
    Sweep {
        #[command(flatten)]
        source: Source,
    },
    /// Recompute aggregate statistics of a results directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Results directory; defaults to the config's `out_dir`, then `results/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    planner: Option<PlannerKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Source {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => bail!("either --config or --preset is required"),
        };
        if let Some(p) = self.planner {
            cfg.planner = p;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(n) = self.grid {
            cfg.grid = cfg.grid.with_resolution(n)?;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        cfg.validate().context("invalid experiment config")?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| Path::new("results").join(&cfg.name));
        Ok((cfg, out))
    }
}

fn print_rows(sweep: &SweepResult) {
    for row in &sweep.rows {
        let r = &row.result;
        let dist = r
            .reported_distance()
            .map(|d| format!("{d:.2} m"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<18} converged={:<5} distance={:<10} best={:.3} samples={} violations={}",
            row.label, r.converged, dist, r.final_metrics.best_value, r.samples, r.domination_violations
        );
    }
    let agg = &sweep.aggregate;
    for p in &agg.planners {
        println!(
            "{}: {}/{} converged",
            p.planner.as_str(),
            p.converged,
            p.runs
        );
    }
    if let Some(red) = agg.oopa_distance_reduction {
        println!("oopa distance reduction over cdoo (mutual starts): {:.1}%", 100.0 * red);
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
        }
        Command::Run { source, dump_fields } => {
            let (mut cfg, out) = source.load()?;
            cfg.kind = ExperimentKind::Single;
            if dump_fields {
                if cfg.planner != PlannerKind::Oopa {
                    bail!("--dump-fields needs the oopa planner");
                }
                let (row, dump) = experiments::run_oopa_with_fields(&cfg)?;
                fs::create_dir_all(&out)?;
                export::write_fields_csv(&out.join("fields.csv"), &cfg.grid, &dump)?;
                let sweep = SweepResult::from_rows(&cfg.name, ExperimentKind::Single, vec![row]);
                export::write_sweep(&out, &sweep)?;
                print_rows(&sweep);
            } else {
                let sweep = experiments::run_single(&cfg)?;
                export::write_sweep(&out, &sweep)?;
                print_rows(&sweep);
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep { source } => {
            let (cfg, out) = source.load()?;
            let sweep = if cfg.kind == ExperimentKind::RefinementTrace {
                let trace = experiments::trace_refinement_accuracy(&cfg)?;
                fs::create_dir_all(&out)?;
                export::write_refinement_trace(&out.join("trace.csv"), &trace)?;
                println!(
                    "refinement: correlation={:.3} error first {} steps={:.3} last {} steps={:.3}",
                    trace.correlation, trace.window, trace.early_error, trace.window, trace.late_error
                );
                trace.run
            } else {
                experiments::run_experiment(&cfg)?
            };
            export::write_sweep(&out, &sweep)?;
            print_rows(&sweep);
            if cfg.kind == ExperimentKind::GridSweep {
                let pts: Vec<(f64, f64)> = sweep
                    .rows
                    .iter()
                    .map(|r| (r.parameter * r.parameter, r.result.mean_step_seconds))
                    .collect();
                println!("time-per-step log-log slope: {:.2}", experiments::loglog_slope(&pts));
            }
            println!("wrote {}", out.display());
        }
        Command::Report { out } => {
            let agg = export::report(&out)?;
            for p in &agg.planners {
                let mean = p
                    .mean_distance
                    .map(|d| format!("{d:.2} m"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{}: {}/{} converged, mean distance {}",
                    p.planner.as_str(),
                    p.converged,
                    p.runs,
                    mean
                );
            }
            if let Some(red) = agg.oopa_distance_reduction {
                println!("oopa distance reduction over cdoo: {:.1}%", 100.0 * red);
            }
            println!("wrote {}", out.join("report.json").display());
        }
    }
    Ok(())
}
