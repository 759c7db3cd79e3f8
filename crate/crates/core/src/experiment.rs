//! Multi-trial experiment orchestration and reproducible output emission.
//!
//! A config fixes the scenario (grid, targets, team, costs, noise, planner,
//! comms) and a base seed; trial i runs on seed `base_seed + i` with a fresh
//! random truth. Results aggregate to mean and standard error of total cost
//! plus a recovery-versus-cost step curve, and everything is written out with
//! 17-significant-digit floats so a replay can verify the aggregation
//! bit-for-bit from the logs alone. Every output file embeds a 16-hex-digit
//! hash of the science-relevant config fields, so rows from different setups
//! can never silently mix in one table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::baselines::PlannerKind;
use crate::belief::GaussianBelief;
use crate::env::{AnchorMode, GridSpec, GroundTruth, SearchEnv};
use crate::error::{CastError, Result};
use crate::planner::PlannerConfig;
use crate::seeding::{stream_rng, tag};
use crate::sim::{point_sweep_cost, run_trial, CommsConfig, Planner, StopRule, TrialConfig, TrialLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_width: f64,
    pub speed: f64,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.rows, self.cols, self.cell_width, self.speed)
    }
}

fn default_recovery_threshold() -> f64 {
    0.5
}

fn default_prior_var() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    /// Number of targets planted per trial.
    pub k: usize,
    /// Team size.
    pub n_agents: usize,
    /// Seconds spent per sensing action, on top of travel.
    pub sensing_cost: f64,
    pub sigma2: f64,
    pub planner: PlannerKind,
    #[serde(default)]
    pub planner_cfg: PlannerConfig,
    pub comms: CommsConfig,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_recovery_threshold")]
    pub recovery_threshold: f64,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "default_prior_var")]
    pub prior_var: f64,
    /// Budget ceiling as a multiple of the point-sweep cost; None uses the
    /// simulator default (50×).
    #[serde(default)]
    pub budget_multiplier: Option<f64>,
    /// Resample the aggregate curve onto this many evenly spaced costs;
    /// None keeps the union of all trials' change points.
    #[serde(default)]
    pub curve_points: Option<usize>,
    /// Where outputs go unless overridden on the command line. Not part of
    /// the config hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.spec()?;
        let n = self.grid.rows * self.grid.cols;
        if self.k > n {
            return Err(CastError::Config(format!(
                "k = {} exceeds the {} grid cells",
                self.k, n
            )));
        }
        if self.n_agents == 0 {
            return Err(CastError::Config("n_agents must be at least 1".into()));
        }
        if self.sensing_cost < 0.0 || !self.sensing_cost.is_finite() {
            return Err(CastError::Config("sensing_cost must be finite and >= 0".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(CastError::Config("sigma2 must be positive".into()));
        }
        if self.trials == 0 {
            return Err(CastError::Config("trials must be at least 1".into()));
        }
        if !self.recovery_threshold.is_finite() {
            return Err(CastError::Config("recovery_threshold must be finite".into()));
        }
        if !(self.prior_var > 0.0) {
            return Err(CastError::Config("prior_var must be positive".into()));
        }
        if let Some(m) = self.budget_multiplier {
            if !(m > 0.0) {
                return Err(CastError::Config("budget_multiplier must be positive".into()));
            }
        }
        if self.curve_points == Some(0) {
            return Err(CastError::Config("curve_points must be at least 1".into()));
        }
        self.comms.validate()?;
        self.planner_cfg.validate()?;
        Ok(())
    }

    pub fn env(&self) -> Result<SearchEnv> {
        SearchEnv::new(
            self.grid.spec()?,
            self.sensing_cost,
            self.sigma2,
            AnchorMode::default(),
        )
    }

    pub fn prior(&self) -> Result<GaussianBelief> {
        GaussianBelief::scaled_prior(
            self.grid.rows * self.grid.cols,
            self.prior_mean,
            self.prior_var,
            self.sigma2,
        )
    }

    /// 16 hex digits of SHA-256 over the science fields (everything except
    /// `output_dir`), identifying which setup produced an output file.
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut value {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value)?;
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            let _ = write!(hex, "{byte:02x}");
        }
        Ok(hex)
    }
}

/// Named default setups. `paper-16x16` is the full-size scenario; `desk`
/// shrinks the grid and episode budget so a complete comparison fits in a
/// test suite.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let grid10 = |rows: usize| GridConfig {
        rows,
        cols: rows,
        cell_width: 10.0,
        speed: 5.0,
    };
    // Floor tree edges at 1% of one cell's travel time so zero-cost
    // self-loops cannot dominate reward rates during planning.
    let planner_cfg = |episodes: usize| PlannerConfig {
        episodes,
        min_edge_cost: 10.0 / (100.0 * 5.0),
        ..PlannerConfig::default()
    };
    match name {
        "paper-16x16" => Ok(ExperimentConfig {
            grid: grid10(16),
            k: 5,
            n_agents: 4,
            sensing_cost: 0.0,
            sigma2: 1.0 / 16.0,
            planner: PlannerKind::Cast,
            planner_cfg: planner_cfg(25_000),
            comms: CommsConfig::perfect(),
            trials: 10,
            base_seed: 1,
            recovery_threshold: 0.5,
            prior_mean: 0.0,
            prior_var: 1.0,
            budget_multiplier: None,
            curve_points: None,
            output_dir: None,
        }),
        "desk" => Ok(ExperimentConfig {
            grid: grid10(8),
            k: 2,
            n_agents: 2,
            sensing_cost: 0.0,
            sigma2: 1.0 / 16.0,
            planner: PlannerKind::Cast,
            planner_cfg: planner_cfg(2_000),
            comms: CommsConfig::perfect(),
            trials: 10,
            base_seed: 1,
            recovery_threshold: 0.5,
            prior_mean: 0.0,
            prior_var: 1.0,
            budget_multiplier: None,
            curve_points: None,
            output_dir: None,
        }),
        other => Err(CastError::Config(format!(
            "unknown preset '{other}' (expected paper-16x16 or desk)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub cost: f64,
    pub mean_rate: f64,
    pub se_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    /// Per-trial costs as aggregated: the spend for completed trials, the
    /// budget ceiling for incomplete ones.
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    pub se_cost: f64,
    pub n_incomplete: usize,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub log: TrialLog,
    /// Change points of the trial's best-rate-so-far step curve, starting at
    /// cost 0.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub records: Vec<TrialRecord>,
    pub aggregate: AggregateResult,
}

/// Monotone recovery-vs-cost change points for one trial.
fn trial_curve(log: &TrialLog) -> Vec<(f64, f64)> {
    let mut points = vec![(0.0, if log.k == 0 { 1.0 } else { 0.0 })];
    let mut best = points[0].1;
    for event in &log.events {
        if event.recovery_rate > best {
            best = event.recovery_rate;
            points.push((event.cost_so_far, best));
        }
    }
    points
}

/// Right-continuous step evaluation: the rate achieved at cost ≤ x.
fn step_value(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|&(c, _)| c <= x);
    if idx == 0 {
        points[0].1
    } else {
        points[idx - 1].1
    }
}

/// The per-trial facts aggregation needs; replay rebuilds these from logs.
#[derive(Debug, Clone)]
pub(crate) struct TrialStats {
    pub completed: bool,
    pub total_cost: f64,
    pub budget_ceiling: f64,
    pub curve: Vec<(f64, f64)>,
}

impl TrialStats {
    fn aggregated_cost(&self) -> f64 {
        if self.completed {
            self.total_cost
        } else {
            self.budget_ceiling
        }
    }
}

pub(crate) fn aggregate(stats: &[TrialStats], curve_points: Option<usize>) -> AggregateResult {
    debug_assert!(!stats.is_empty(), "aggregation needs at least one trial");
    let n = stats.len();
    let costs: Vec<f64> = stats.iter().map(TrialStats::aggregated_cost).collect();
    let mean_cost = costs.iter().sum::<f64>() / n as f64;
    let se_cost = if n < 2 {
        0.0
    } else {
        let var = costs.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt() / (n as f64).sqrt()
    };
    let n_incomplete = stats.iter().filter(|s| !s.completed).count();

    let grid: Vec<f64> = match curve_points {
        Some(p) => {
            let max = stats
                .iter()
                .flat_map(|s| s.curve.iter().map(|&(c, _)| c))
                .fold(0.0_f64, f64::max);
            if p == 1 || max == 0.0 {
                vec![0.0]
            } else {
                (0..p).map(|i| max * i as f64 / (p - 1) as f64).collect()
            }
        }
        None => {
            let mut xs: Vec<f64> = stats
                .iter()
                .flat_map(|s| s.curve.iter().map(|&(c, _)| c))
                .collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs
        }
    };
    let curve = grid
        .into_iter()
        .map(|cost| {
            let rates: Vec<f64> = stats.iter().map(|s| step_value(&s.curve, cost)).collect();
            let mean_rate = rates.iter().sum::<f64>() / n as f64;
            let se_rate = if n < 2 {
                0.0
            } else {
                let var =
                    rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / (n - 1) as f64;
                var.sqrt() / (n as f64).sqrt()
            };
            CurvePoint { cost, mean_rate, se_rate }
        })
        .collect();

    AggregateResult { costs, mean_cost, se_cost, n_incomplete, curve }
}

fn run_one_trial(cfg: &ExperimentConfig, env: &SearchEnv, prior: &GaussianBelief, trial: usize) -> Result<TrialRecord> {
    let seed = cfg.base_seed + trial as u64;
    let mut truth_rng = stream_rng(seed, &[tag::TRUTH]);
    let truth = GroundTruth::sample_uniform(&env.grid, cfg.k, &mut truth_rng)?;
    let mut planners: Vec<Box<dyn Planner>> = (0..cfg.n_agents)
        .map(|agent| cfg.planner.build(agent, cfg.n_agents, seed, env, &cfg.planner_cfg))
        .collect();
    let budget_ceiling = cfg.budget_multiplier.map(|m| {
        let starts = vec![crate::env::Position::ORIGIN; cfg.n_agents];
        m * point_sweep_cost(env, cfg.n_agents, &starts)
    });
    let trial_cfg = TrialConfig {
        comms: cfg.comms,
        stop: StopRule::FullRecovery { threshold: cfg.recovery_threshold },
        budget_ceiling,
        max_decisions: None,
        start_positions: None,
    };
    let log = run_trial(env, &truth, prior, &mut planners, &trial_cfg, seed)?;
    let curve = trial_curve(&log);
    Ok(TrialRecord { trial, seed, log, curve })
}

/// Run every trial of the config, serially or on `parallel` worker threads.
/// Results are identical either way: each trial depends only on its own seed,
/// and aggregation consumes them in trial order.
pub fn run_experiment(cfg: &ExperimentConfig, parallel: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let env = cfg.env()?;
    let prior = cfg.prior()?;
    let config_hash = cfg.hash()?;

    let records: Vec<TrialRecord> = if parallel <= 1 {
        (0..cfg.trials)
            .map(|i| run_one_trial(cfg, &env, &prior, i))
            .collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CastError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|i| run_one_trial(cfg, &env, &prior, i))
                .collect::<Result<_>>()
        })?
    };

    let stats: Vec<TrialStats> = records
        .iter()
        .map(|r| TrialStats {
            completed: r.log.completed,
            total_cost: r.log.total_cost,
            budget_ceiling: r.log.budget_ceiling,
            curve: r.curve.clone(),
        })
        .collect();
    let aggregate = aggregate(&stats, cfg.curve_points);

    Ok(ExperimentResult { config: cfg.clone(), config_hash, records, aggregate })
}

/// 17 significant digits: enough for every f64 to round-trip exactly.
fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SUMMARY_HEADER: &str =
    "config_hash,planner,rows,cols,n_agents,k,sensing_cost,trials,n_incomplete,mean_cost,se_cost";

pub fn summary_row(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        result.config_hash,
        cfg.planner.name(),
        cfg.grid.rows,
        cfg.grid.cols,
        cfg.n_agents,
        cfg.k,
        fmt_f(cfg.sensing_cost),
        cfg.trials,
        result.aggregate.n_incomplete,
        fmt_f(result.aggregate.mean_cost),
        fmt_f(result.aggregate.se_cost),
    )
}

fn curve_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("config_hash,cost,mean_rate,se_rate\n");
    for point in &result.aggregate.curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            result.config_hash,
            fmt_f(point.cost),
            fmt_f(point.mean_rate),
            fmt_f(point.se_rate)
        );
    }
    out
}

fn trial_jsonl(result: &ExperimentResult, record: &TrialRecord) -> Result<String> {
    let hash = &result.config_hash;
    let mut out = String::new();
    for e in &record.log.events {
        let _ = writeln!(
            out,
            "{{\"record\":\"event\",\"config_hash\":\"{hash}\",\"trial\":{},\"time\":{},\"agent\":{},\"action_id\":{},\"observation\":{},\"cost_so_far\":{},\"recovery_rate\":{},\"false_positives\":{},\"data_size\":{}}}",
            record.trial,
            fmt_f(e.time),
            e.agent,
            e.action_id,
            fmt_f(e.observation),
            fmt_f(e.cost_so_far),
            fmt_f(e.recovery_rate),
            e.false_positives,
            e.data_size,
        );
    }
    let per_agent = record
        .log
        .per_agent_cost
        .iter()
        .map(|&c| fmt_f(c))
        .collect::<Vec<_>>()
        .join(",");
    let sizes = record
        .log
        .final_data_sizes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let _ = writeln!(
        out,
        "{{\"record\":\"trial_summary\",\"config_hash\":\"{hash}\",\"trial\":{},\"seed\":{},\"completed\":{},\"end\":{},\"stop_time\":{},\"total_cost\":{},\"budget_ceiling\":{},\"k\":{},\"per_agent_cost\":[{per_agent}],\"final_data_sizes\":[{sizes}]}}",
        record.trial,
        record.seed,
        record.log.completed,
        serde_json::to_string(&record.log.end)?,
        fmt_f(record.log.stop_time),
        fmt_f(record.log.total_cost),
        fmt_f(record.log.budget_ceiling),
        record.log.k,
    );
    Ok(out)
}

/// Write config.json, summary.csv, curve.csv, and one JSON-lines event log
/// per trial into `dir` (created if needed).
pub fn emit_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let config_doc = serde_json::json!({
        "config_hash": result.config_hash,
        "config": result.config,
    });
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config_doc)?)?;
    fs::write(
        dir.join("summary.csv"),
        format!("{SUMMARY_HEADER}\n{}\n", summary_row(result)),
    )?;
    fs::write(dir.join("curve.csv"), curve_csv(result))?;
    for record in &result.records {
        let name = format!("trial_{:03}.jsonl", record.trial);
        fs::write(dir.join(name), trial_jsonl(result, record)?)?;
    }
    Ok(())
}

fn get<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| CastError::InvalidInput(format!("log record missing field '{key}'")))
}

fn get_f64(v: &Value, key: &str) -> Result<f64> {
    get(v, key)?
        .as_f64()
        .ok_or_else(|| CastError::InvalidInput(format!("field '{key}' is not a number")))
}

fn get_bool(v: &Value, key: &str) -> Result<bool> {
    get(v, key)?
        .as_bool()
        .ok_or_else(|| CastError::InvalidInput(format!("field '{key}' is not a bool")))
}

fn get_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    get(v, key)?
        .as_str()
        .ok_or_else(|| CastError::InvalidInput(format!("field '{key}' is not a string")))
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub aggregate: AggregateResult,
}

/// Re-aggregate an output directory from its JSON-lines logs and verify that
/// the stored summary and curve match bit-for-bit, and that every file
/// carries the same config hash.
pub fn replay(dir: &Path) -> Result<ReplayReport> {
    let config_text = fs::read_to_string(dir.join("config.json"))?;
    let config_doc: Value = serde_json::from_str(&config_text)?;
    let stored_hash = get_str(&config_doc, "config_hash")?.to_string();
    let config: ExperimentConfig = serde_json::from_value(get(&config_doc, "config")?.clone())?;
    let recomputed_hash = config.hash()?;
    if recomputed_hash != stored_hash {
        return Err(CastError::InvalidInput(format!(
            "config.json hash mismatch: stored {stored_hash}, recomputed {recomputed_hash}"
        )));
    }

    let mut stats = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let path = dir.join(format!("trial_{trial:03}.jsonl"));
        let text = fs::read_to_string(&path)?;
        let mut curve: Vec<(f64, f64)> = Vec::new();
        let mut summary: Option<Value> = None;
        for line in text.lines() {
            let record: Value = serde_json::from_str(line)?;
            if get_str(&record, "config_hash")? != stored_hash {
                return Err(CastError::InvalidInput(format!(
                    "{} contains a record from a different config",
                    path.display()
                )));
            }
            match get_str(&record, "record")? {
                "event" => {
                    if curve.is_empty() {
                        curve.push((0.0, 0.0));
                    }
                    let cost = get_f64(&record, "cost_so_far")?;
                    let rate = get_f64(&record, "recovery_rate")?;
                    if rate > curve.last().unwrap().1 {
                        curve.push((cost, rate));
                    }
                }
                "trial_summary" => summary = Some(record),
                other => {
                    return Err(CastError::InvalidInput(format!(
                        "unknown record type '{other}' in {}",
                        path.display()
                    )))
                }
            }
        }
        let summary = summary.ok_or_else(|| {
            CastError::InvalidInput(format!("{} has no trial_summary record", path.display()))
        })?;
        let k = get_f64(&summary, "k")? as usize;
        if curve.is_empty() {
            curve.push((0.0, if k == 0 { 1.0 } else { 0.0 }));
        }
        stats.push(TrialStats {
            completed: get_bool(&summary, "completed")?,
            total_cost: get_f64(&summary, "total_cost")?,
            budget_ceiling: get_f64(&summary, "budget_ceiling")?,
            curve,
        });
    }
    let recomputed = aggregate(&stats, config.curve_points);

    let summary_text = fs::read_to_string(dir.join("summary.csv"))?;
    let mut lines = summary_text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(CastError::InvalidInput("summary.csv header mismatch".into()));
    }
    let row = lines
        .next()
        .ok_or_else(|| CastError::InvalidInput("summary.csv has no data row".into()))?;
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 11 {
        return Err(CastError::InvalidInput("summary.csv row has wrong arity".into()));
    }
    if fields[0] != stored_hash {
        return Err(CastError::InvalidInput("summary.csv carries a different config hash".into()));
    }
    let checks = [
        ("n_incomplete", fields[8], recomputed.n_incomplete.to_string()),
        ("mean_cost", fields[9], fmt_f(recomputed.mean_cost)),
        ("se_cost", fields[10], fmt_f(recomputed.se_cost)),
    ];
    for (what, stored, expect) in checks {
        if stored != expect {
            return Err(CastError::InvalidInput(format!(
                "summary.csv {what} = {stored} but logs re-aggregate to {expect}"
            )));
        }
    }

    let curve_text = fs::read_to_string(dir.join("curve.csv"))?;
    let mut curve_lines = curve_text.lines();
    if curve_lines.next() != Some("config_hash,cost,mean_rate,se_rate") {
        return Err(CastError::InvalidInput("curve.csv header mismatch".into()));
    }
    let stored_rows: Vec<&str> = curve_lines.collect();
    if stored_rows.len() != recomputed.curve.len() {
        return Err(CastError::InvalidInput(format!(
            "curve.csv has {} rows but logs re-aggregate to {}",
            stored_rows.len(),
            recomputed.curve.len()
        )));
    }
    for (row, point) in stored_rows.iter().zip(&recomputed.curve) {
        let expect = format!(
            "{},{},{},{}",
            stored_hash,
            fmt_f(point.cost),
            fmt_f(point.mean_rate),
            fmt_f(point.se_rate)
        );
        if *row != expect {
            return Err(CastError::InvalidInput(format!(
                "curve.csv row '{row}' does not match re-aggregated '{expect}'"
            )));
        }
    }

    Ok(ReplayReport { config, config_hash: stored_hash, aggregate: recomputed })
}

/// Axes of a cartesian sweep; empty axes keep the base config's value.
#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub n_agents: Vec<usize>,
    pub k: Vec<usize>,
    pub sensing_cost: Vec<f64>,
    pub planner: Vec<PlannerKind>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

fn cost_label(c: f64) -> String {
    if c == c.trunc() && c.abs() < 1e12 {
        format!("{}", c as i64)
    } else {
        format!("{c}").replace('.', "p")
    }
}

/// Run the full product of the sweep axes. Each combination writes its own
/// output directory under `out_root`, and a combined summary table collects
/// one row per combination.
pub fn run_sweep(
    base: &ExperimentConfig,
    spec: &SweepSpec,
    out_root: &Path,
    parallel: usize,
) -> Result<Vec<(PathBuf, ExperimentResult)>> {
    let agents = axis(&spec.n_agents, base.n_agents);
    let targets = axis(&spec.k, base.k);
    let costs = axis(&spec.sensing_cost, base.sensing_cost);
    let planners = axis(&spec.planner, base.planner);

    let mut results = Vec::new();
    let mut combined = String::from(SUMMARY_HEADER);
    combined.push('\n');
    for &n_agents in &agents {
        for &k in &targets {
            for &sensing_cost in &costs {
                for &planner in &planners {
                    let cfg = ExperimentConfig {
                        n_agents,
                        k,
                        sensing_cost,
                        planner,
                        ..base.clone()
                    };
                    let result = run_experiment(&cfg, parallel)?;
                    let dir = out_root.join(format!(
                        "J{n_agents}_k{k}_cs{}_{}",
                        cost_label(sensing_cost),
                        planner.name()
                    ));
                    emit_outputs(&result, &dir)?;
                    combined.push_str(&summary_row(&result));
                    combined.push('\n');
                    results.push((dir, result));
                }
            }
        }
    }
    fs::create_dir_all(out_root)?;
    fs::write(out_root.join("summary.csv"), combined)?;
    Ok(results)
}
