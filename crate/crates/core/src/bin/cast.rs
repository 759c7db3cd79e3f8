//! Command-line front end: run one experiment, sweep a grid of them, or
//! replay an output directory to verify its aggregation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cast_core::baselines::PlannerKind;
use cast_core::experiment::{
    emit_outputs, preset, replay, run_experiment, run_sweep, ExperimentConfig, ExperimentResult,
    SweepSpec,
};
use cast_core::{CastError, Result};

#[derive(Parser)]
#[command(name = "cast", about = "Cost-aware asynchronous multi-agent search experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config and write its outputs.
    Run(RunArgs),
    /// Run the cartesian product of sweep axes over a base config.
    Sweep(SweepArgs),
    /// Re-aggregate an output directory from its logs and verify the stored
    /// summary and curve.
    Replay {
        /// Output directory produced by `run`.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; accepts both a bare config and an emitted
    /// config.json (with its hash wrapper).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named base config: paper-16x16 or desk. Default when --config is
    /// absent: desk.
    #[arg(long)]
    preset: Option<String>,
    /// Override the planner: cast, ps, ts-myopic, or info-greedy.
    #[arg(long)]
    planner: Option<String>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trials; 1 runs serially.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, name) => preset(name.as_deref().unwrap_or("desk"))?,
            (Some(_), Some(_)) => {
                return Err(CastError::Config(
                    "--config and --preset are mutually exclusive".into(),
                ))
            }
        };
        if let Some(name) = &self.planner {
            cfg.planner = name.parse()?;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Output directory; falls back to the config's output_dir, then
    /// ./cast-out.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Output root; one subdirectory per combination plus a combined
    /// summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Team sizes to sweep (comma-separated). Empty keeps the base value.
    #[arg(long, value_delimiter = ',')]
    n_agents: Vec<usize>,
    /// Target counts to sweep.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Sensing costs to sweep.
    #[arg(long, value_delimiter = ',')]
    sensing_cost: Vec<f64>,
    /// Planners to sweep.
    #[arg(long, value_delimiter = ',')]
    planners: Vec<String>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let body = doc.get("config").cloned().unwrap_or(doc);
    Ok(serde_json::from_value(body)?)
}

fn describe(result: &ExperimentResult, dir: &Path) {
    println!(
        "{} planner={} grid={}x{} J={} k={} c_s={} trials={} incomplete={} mean_cost={:.3} se={:.3} -> {}",
        result.config_hash,
        result.config.planner.name(),
        result.config.grid.rows,
        result.config.grid.cols,
        result.config.n_agents,
        result.config.k,
        result.config.sensing_cost,
        result.config.trials,
        result.aggregate.n_incomplete,
        result.aggregate.mean_cost,
        result.aggregate.se_cost,
        dir.display(),
    );
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = args.base.resolve()?;
            let dir = args
                .out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("cast-out"));
            let result = run_experiment(&cfg, args.base.parallel)?;
            emit_outputs(&result, &dir)?;
            describe(&result, &dir);
        }
        Cmd::Sweep(args) => {
            let base = args.base.resolve()?;
            let planners = args
                .planners
                .iter()
                .map(|name| name.parse::<PlannerKind>())
                .collect::<Result<Vec<_>>>()?;
            let spec = SweepSpec {
                n_agents: args.n_agents,
                k: args.k,
                sensing_cost: args.sensing_cost,
                planner: planners,
            };
            let results = run_sweep(&base, &spec, &args.out, args.base.parallel)?;
            for (dir, result) in &results {
                describe(result, dir);
            }
            println!(
                "{} combinations -> {}",
                results.len(),
                args.out.join("summary.csv").display()
            );
        }
        Cmd::Replay { dir } => {
            let report = replay(&dir)?;
            println!(
                "replay verified {}: trials={} incomplete={} mean_cost={:.3} se={:.3} curve_rows={}",
                report.config_hash,
                report.config.trials,
                report.aggregate.n_incomplete,
                report.aggregate.mean_cost,
                report.aggregate.se_cost,
                report.aggregate.curve.len(),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
