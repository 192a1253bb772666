//! Batch sweeps over ego β, group β and sample budget.
//!
//! Each sweep cell gets its own directory (`cell-000`, `cell-001`, ...) with
//! `trajectory.csv`, `metrics.csv` and `diagnostics.csv`. The coordinator then
//! writes `aggregates.csv`, computed only from those files, and
//! `manifest.json`. Every row carries the scenario hash, the run seed and the
//! cell coordinates, so a cell can be rerun from the manifest alone.

use crate::prior::run_seed;
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::simulation::{aggregate_metrics, run_scenario, EpisodeResult, RunMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The agent whose β the ego axis controls.
pub const EGO_AGENT: usize = 0;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Formats with 9 significant digits, dropping trailing zeros.
pub fn fmt9(x: f64) -> String {
    round9(x).to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// Path recorded in the manifest; the scenario itself is `scenario`.
    pub scenario_path: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    /// Values for agent 0's β. `None` keeps the scenario's value.
    pub ego_betas: Option<Vec<f64>>,
    /// Values applied to every agent before the ego override.
    pub group_betas: Option<Vec<f64>>,
    pub samples: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// A single-cell experiment using the scenario's own settings.
    pub fn from_scenario(scenario: ScenarioConfig, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            scenario_path: None,
            samples: vec![scenario.solver.samples_per_response],
            runs: scenario.episode.runs,
            seed: scenario.episode.base_seed,
            deterministic: scenario.solver.deterministic,
            scenario,
            ego_betas: None,
            group_betas: None,
            threads: 1,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let invalid = |m: &str| Err(ExperimentError::Invalid(m.to_string()));
        for (name, axis) in [
            ("ego-beta", &self.ego_betas),
            ("group-beta", &self.group_betas),
        ] {
            if let Some(values) = axis {
                if values.is_empty() {
                    return invalid(&format!("{name} list is empty"));
                }
                if values.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return invalid(&format!("{name} values must be finite and >= 0"));
                }
            }
        }
        if self.samples.is_empty() {
            return invalid("samples list is empty");
        }
        if self.samples.contains(&0) {
            return invalid("samples must be >= 1");
        }
        if self.runs == 0 {
            return invalid("runs must be >= 1");
        }
        if self.threads == 0 {
            return invalid("threads must be >= 1");
        }
        Ok(())
    }

    /// Cartesian product of the axes, group β outermost and samples innermost.
    pub fn cells(&self) -> Vec<Cell> {
        let opt = |axis: &Option<Vec<f64>>| match axis {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let groups: Vec<Option<f64>> = opt(&self.group_betas);
        let egos: Vec<Option<f64>> = opt(&self.ego_betas);
        let mut cells = Vec::new();
        for &group_beta in &groups {
            for &ego_beta in &egos {
                for &samples in &self.samples {
                    cells.push(Cell {
                        index: cells.len(),
                        ego_beta,
                        group_beta,
                        samples,
                    });
                }
            }
        }
        cells
    }

    /// The resolved scenario one cell runs with.
    pub fn cell_config(&self, cell: &Cell) -> ScenarioConfig {
        let mut config = self.scenario.clone();
        if let Some(g) = cell.group_beta {
            config.agents.iter_mut().for_each(|a| a.beta = g);
        }
        if let Some(e) = cell.ego_beta {
            config.agents[EGO_AGENT].beta = e;
        }
        config.solver.samples_per_response = cell.samples;
        config.solver.deterministic = self.deterministic;
        config.episode.runs = self.runs;
        config.episode.base_seed = self.seed;
        config
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub ego_beta: Option<f64>,
    pub group_beta: Option<f64>,
    pub samples: usize,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!("cell-{:03}", self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dir: String,
    pub ego_beta: Option<f64>,
    pub group_beta: Option<f64>,
    pub samples: usize,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    /// `ok`, `partial` or `failed`.
    pub status: String,
    pub failures: Vec<RunFailure>,
    pub safe_fraction: Option<f64>,
    pub convergence_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario_path: Option<String>,
    pub scenario_hash: String,
    pub resolved_scenario: String,
    pub base_seed: u64,
    pub runs: usize,
    pub deterministic: bool,
    pub ego_agent: usize,
    pub ego_betas: Option<Vec<f64>>,
    pub group_betas: Option<Vec<f64>>,
    pub samples: Vec<usize>,
    pub std_convention: String,
    pub significant_digits: usize,
    pub cells: Vec<CellRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub manifest: Manifest,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutcome {
    pub fn all_failed(&self) -> bool {
        self.manifest.cells.iter().all(|c| c.status == "failed")
    }
}

/// Runs every cell and writes all output files under `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let out = &spec.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;

    let base_hash = spec.scenario.hash();
    let cells = spec.cells();
    let records = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(spec, cell, &base_hash))
            .collect::<Result<Vec<_>>>()
    })?;

    let aggregates = aggregate_dir(out)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_path: spec.scenario_path.as_ref().map(|p| p.display().to_string()),
        scenario_hash: base_hash,
        resolved_scenario: spec.scenario.to_toml_string(),
        base_seed: spec.seed,
        runs: spec.runs,
        deterministic: spec.deterministic,
        ego_agent: EGO_AGENT,
        ego_betas: spec.ego_betas.clone(),
        group_betas: spec.group_betas.clone(),
        samples: spec.samples.clone(),
        std_convention: "population".to_string(),
        significant_digits: 9,
        cells: records,
    };
    let path = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(ExperimentOutcome {
        manifest,
        aggregates,
    })
}

fn run_cell(spec: &ExperimentSpec, cell: &Cell, base_hash: &str) -> Result<CellRecord> {
    let config = spec.cell_config(cell);
    let dir = spec.out_dir.join(cell.dir_name());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let seeds: Vec<u64> = (0..spec.runs).map(|r| run_seed(spec.seed, r)).collect();

    let outcomes: Vec<std::result::Result<EpisodeResult, RunFailure>> = match config.build() {
        Ok(scenario) => (0..spec.runs)
            .into_par_iter()
            .map(|run| {
                run_scenario(&scenario, run).map_err(|e| RunFailure {
                    run,
                    error: e.to_string(),
                })
            })
            .collect(),
        Err(e) => (0..spec.runs)
            .map(|run| {
                Err(RunFailure {
                    run,
                    error: e.to_string(),
                })
            })
            .collect(),
    };
    let (results, failures): (Vec<_>, Vec<_>) = outcomes.into_iter().partition(|r| r.is_ok());
    let results: Vec<EpisodeResult> = results.into_iter().map(|r| r.unwrap()).collect();
    let failures: Vec<RunFailure> = failures.into_iter().map(|r| r.unwrap_err()).collect();

    let key = RowKey {
        scenario_hash: base_hash.to_string(),
        ego_beta: cell.ego_beta,
        group_beta: cell.group_beta,
        samples: cell.samples,
    };
    write_cell_files(&dir, &key, &results)?;

    let status = match (results.is_empty(), failures.is_empty()) {
        (true, _) => "failed",
        (false, true) => "ok",
        (false, false) => "partial",
    };
    let (safe_fraction, convergence_rate) = if results.is_empty() {
        (None, None)
    } else {
        let runs: Vec<RunMetrics> = results.iter().map(RunMetrics::from).collect();
        let summary = aggregate_metrics(&runs, None).expect("non-empty runs");
        let steps: Vec<bool> = results
            .iter()
            .flat_map(|r| r.diagnostics.iter().map(|d| d.converged))
            .collect();
        (
            Some(round9(summary.safe_fraction)),
            Some(round9(fraction(&steps))),
        )
    };
    Ok(CellRecord {
        dir: cell.dir_name(),
        ego_beta: cell.ego_beta,
        group_beta: cell.group_beta,
        samples: cell.samples,
        scenario_hash: config.hash(),
        seeds,
        status: status.to_string(),
        failures,
        safe_fraction,
        convergence_rate,
    })
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 1.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

struct RowKey {
    scenario_hash: String,
    ego_beta: Option<f64>,
    group_beta: Option<f64>,
    samples: usize,
}

impl RowKey {
    fn fields(&self, seed: u64) -> Vec<String> {
        vec![
            self.scenario_hash.clone(),
            seed.to_string(),
            opt9(self.ego_beta),
            opt9(self.group_beta),
            self.samples.to_string(),
        ]
    }
}

fn opt9(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

const KEY_HEADER: [&str; 5] = ["scenario_hash", "seed", "ego_beta", "group_beta", "samples"];

fn header(extra: &[&str]) -> Vec<String> {
    KEY_HEADER
        .iter()
        .chain(extra)
        .map(|s| s.to_string())
        .collect()
}

fn write_cell_files(dir: &Path, key: &RowKey, results: &[EpisodeResult]) -> Result<()> {
    let path = dir.join(TRAJECTORY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(header(&[
        "run",
        "t",
        "agent",
        "x",
        "y",
        "z",
        "min_distance",
    ]))
    .map_err(csv_err(&path))?;
    for r in results {
        for (t, state) in r.trajectory.iter().enumerate() {
            for (i, p) in state.positions().enumerate() {
                let min = r.metrics.min_pairwise_distance[i][t];
                let mut row = key.fields(r.seed);
                row.extend([
                    r.run_index.to_string(),
                    t.to_string(),
                    i.to_string(),
                    fmt9(p.x),
                    fmt9(p.y),
                    fmt9(p.z),
                    opt9(min),
                ]);
                w.write_record(row).map_err(csv_err(&path))?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(METRICS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(header(&[
        "run",
        "agent",
        "timesteps",
        "travel_distance",
        "collision_steps",
        "goal_reached",
    ]))
    .map_err(csv_err(&path))?;
    for r in results {
        let m = &r.metrics;
        for i in 0..m.travel_distance.len() {
            let mut row = key.fields(r.seed);
            row.extend([
                r.run_index.to_string(),
                i.to_string(),
                r.executed_actions.len().to_string(),
                fmt9(m.travel_distance[i]),
                m.collision_steps[i].to_string(),
                m.goal_reached[i].to_string(),
            ]);
            w.write_record(row).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(DIAGNOSTICS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(header(&[
        "run",
        "t",
        "agent",
        "iterations",
        "converged",
        "final_metric",
        "kl",
        "ess",
    ]))
    .map_err(csv_err(&path))?;
    for r in results {
        for (t, d) in r.diagnostics.iter().enumerate() {
            for i in 0..d.kl.len() {
                let mut row = key.fields(r.seed);
                row.extend([
                    r.run_index.to_string(),
                    t.to_string(),
                    i.to_string(),
                    d.iterations.to_string(),
                    d.converged.to_string(),
                    fmt9(d.final_metric),
                    fmt9(d.kl[i]),
                    fmt9(d.ess[i]),
                ]);
                w.write_record(row).map_err(csv_err(&path))?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// One line of `aggregates.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub cell: String,
    pub scenario_hash: String,
    pub ego_beta: Option<f64>,
    pub group_beta: Option<f64>,
    pub samples: usize,
    pub runs: usize,
    pub ego_travel_mean: Option<f64>,
    pub ego_travel_std: Option<f64>,
    pub others_travel_mean: Option<f64>,
    pub others_travel_std: Option<f64>,
    pub group_travel_mean: f64,
    pub group_travel_std: f64,
    pub collision_rate: f64,
    pub goal_rate: f64,
    pub safe_fraction: f64,
    pub convergence_rate: f64,
}

const AGGREGATE_HEADER: [&str; 16] = [
    "cell",
    "scenario_hash",
    "ego_beta",
    "group_beta",
    "samples",
    "runs",
    "ego_travel_mean",
    "ego_travel_std",
    "others_travel_mean",
    "others_travel_std",
    "group_travel_mean",
    "group_travel_std",
    "collision_rate",
    "goal_rate",
    "safe_fraction",
    "convergence_rate",
];

fn read_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err(path))?;
            Ok(headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect())
        })
        .collect()
}

fn field<T: std::str::FromStr>(
    row: &BTreeMap<String, String>,
    name: &str,
    path: &Path,
) -> Result<T> {
    row.get(name)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ExperimentError::Format {
            path: path.to_path_buf(),
            reason: format!("missing or malformed column {name}"),
        })
}

fn opt_field(row: &BTreeMap<String, String>, name: &str, path: &Path) -> Result<Option<f64>> {
    match row.get(name).map(String::as_str) {
        None | Some("") => Ok(None),
        Some(_) => field(row, name, path).map(Some),
    }
}

/// Recomputes the per-cell aggregates from the files under `out_dir` and
/// writes `aggregates.csv`. Cells without successful runs are skipped.
pub fn aggregate_dir(out_dir: &Path) -> Result<Vec<AggregateRow>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out_dir)
        .map_err(io_err(out_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("cell-"))
        })
        .collect();
    dirs.sort();

    let mut rows = Vec::new();
    for dir in &dirs {
        if let Some(row) = aggregate_cell(dir)? {
            rows.push(row);
        }
    }

    let path = out_dir.join(AGGREGATES_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err(&path))?;
    for a in &rows {
        w.write_record([
            a.cell.clone(),
            a.scenario_hash.clone(),
            opt9(a.ego_beta),
            opt9(a.group_beta),
            a.samples.to_string(),
            a.runs.to_string(),
            opt9(a.ego_travel_mean),
            opt9(a.ego_travel_std),
            opt9(a.others_travel_mean),
            opt9(a.others_travel_std),
            fmt9(a.group_travel_mean),
            fmt9(a.group_travel_std),
            fmt9(a.collision_rate),
            fmt9(a.goal_rate),
            fmt9(a.safe_fraction),
            fmt9(a.convergence_rate),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(rows)
}

/// `(timesteps, travel_distance, collision_steps, goal_reached)` for one agent and run.
type AgentRow = (usize, f64, usize, bool);

fn aggregate_cell(dir: &Path) -> Result<Option<AggregateRow>> {
    let metrics_path = dir.join(METRICS_FILE);
    let rows = read_rows(&metrics_path)?;
    let Some(first) = rows.first() else {
        return Ok(None);
    };
    let scenario_hash: String = field(first, "scenario_hash", &metrics_path)?;
    let ego_beta = opt_field(first, "ego_beta", &metrics_path)?;
    let group_beta = opt_field(first, "group_beta", &metrics_path)?;
    let samples: usize = field(first, "samples", &metrics_path)?;

    let mut by_run: BTreeMap<usize, BTreeMap<usize, AgentRow>> = BTreeMap::new();
    for row in &rows {
        let run: usize = field(row, "run", &metrics_path)?;
        let agent: usize = field(row, "agent", &metrics_path)?;
        by_run.entry(run).or_default().insert(
            agent,
            (
                field(row, "timesteps", &metrics_path)?,
                field(row, "travel_distance", &metrics_path)?,
                field(row, "collision_steps", &metrics_path)?,
                field(row, "goal_reached", &metrics_path)?,
            ),
        );
    }
    let runs: Vec<RunMetrics> = by_run
        .values()
        .map(|agents| RunMetrics {
            timesteps: agents.values().next().map_or(0, |a| a.0),
            travel_distance: agents.values().map(|a| a.1).collect(),
            collision_steps: agents.values().map(|a| a.2).collect(),
            goal_reached: agents.values().map(|a| a.3).collect(),
        })
        .collect();
    let n = runs[0].travel_distance.len();
    let ego = (n > 1).then_some(EGO_AGENT);
    let summary = aggregate_metrics(&runs, ego).map_err(|e| ExperimentError::Format {
        path: metrics_path.clone(),
        reason: e.to_string(),
    })?;

    let diag_path = dir.join(DIAGNOSTICS_FILE);
    let mut converged = BTreeMap::new();
    for row in read_rows(&diag_path)? {
        let run: usize = field(&row, "run", &diag_path)?;
        let t: usize = field(&row, "t", &diag_path)?;
        converged.insert((run, t), field::<bool>(&row, "converged", &diag_path)?);
    }
    let converged: Vec<bool> = converged.into_values().collect();

    let mean = |f: &dyn Fn(&crate::simulation::AgentSummary) -> f64| {
        summary.agents.iter().map(f).sum::<f64>() / n as f64
    };
    let (ego_s, others_s) = summary.ego_vs_others.unzip();
    Ok(Some(AggregateRow {
        cell: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        scenario_hash,
        ego_beta,
        group_beta,
        samples,
        runs: summary.runs,
        ego_travel_mean: ego_s.map(|m| m.mean),
        ego_travel_std: ego_s.map(|m| m.std),
        others_travel_mean: others_s.map(|m| m.mean),
        others_travel_std: others_s.map(|m| m.std),
        group_travel_mean: summary.group_travel.mean,
        group_travel_std: summary.group_travel.std,
        collision_rate: mean(&|a| a.collision_rate),
        goal_rate: mean(&|a| a.goal_rate),
        safe_fraction: summary.safe_fraction,
        convergence_rate: fraction(&converged),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::position_swap_scenario;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(6.0), "6");
        assert_eq!(fmt9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt9(123456789.123), "123456789");
        assert_eq!(fmt9(-2.5e-7), "-0.00000025");
        assert!(round9(f64::NAN).is_nan());
    }

    fn spec() -> ExperimentSpec {
        let scenario = position_swap_scenario(2, 6.0, 1.0, 0.05).unwrap();
        let mut s = ExperimentSpec::from_scenario(scenario, "unused");
        s.ego_betas = Some(vec![0.01, 0.13]);
        s.group_betas = Some(vec![0.05, 0.3]);
        s.samples = vec![10, 20];
        s
    }

    #[test]
    fn cells_are_the_cartesian_product() {
        let s = spec();
        let cells = s.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].dir_name(), "cell-000");
        assert_eq!(
            (cells[0].group_beta, cells[0].ego_beta, cells[0].samples),
            (Some(0.05), Some(0.01), 10)
        );
        assert_eq!(
            (cells[7].group_beta, cells[7].ego_beta, cells[7].samples),
            (Some(0.3), Some(0.13), 20)
        );
        let c = s.cell_config(&cells[5]);
        assert_eq!(c.agents[0].beta, 0.01);
        assert_eq!(c.agents[1].beta, 0.3);
        assert_eq!(c.solver.samples_per_response, 20);
    }

    #[test]
    fn unswept_axes_give_one_cell() {
        let mut s = spec();
        s.ego_betas = None;
        s.group_betas = None;
        s.samples = vec![7];
        let cells = s.cells();
        assert_eq!(cells.len(), 1);
        let c = s.cell_config(&cells[0]);
        assert_eq!(c.agents[0].beta, 0.05);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec();
        s.samples.clear();
        assert!(s.validate().is_err());
        let mut s = spec();
        s.ego_betas = Some(vec![]);
        assert!(s.validate().is_err());
        let mut s = spec();
        s.runs = 0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.group_betas = Some(vec![-1.0]);
        assert!(s.validate().is_err());
    }
}
