use anyhow::{bail, Context};
use bounded_ibr::experiment::{aggregate_dir, run_experiment, ExperimentSpec};
use bounded_ibr::ScenarioConfig;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "brnav",
    version,
    about = "Bounded-rational multi-agent navigation sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write per-cell data files, aggregates and a manifest.
    Run(RunArgs),
    /// Print the scenario with all defaults filled in.
    Resolve {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Recompute aggregates.csv from the per-cell files of an output directory.
    Aggregate {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// β values for the ego agent (agent 0).
    #[arg(long, value_delimiter = ',')]
    ego_beta: Option<Vec<f64>>,
    /// β values applied to every agent; the ego axis overrides agent 0.
    #[arg(long, value_delimiter = ',')]
    group_beta: Option<Vec<f64>>,
    /// Sample budgets per best response. Defaults to the scenario's value.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "BRNAV_THREADS")]
    threads: Option<usize>,
    /// Fixed-order reductions; outputs do not depend on the thread count.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let scenario = ScenarioConfig::from_file(&args.scenario)?;
    let mut spec = ExperimentSpec::from_scenario(scenario, args.out);
    spec.scenario_path = Some(args.scenario);
    spec.ego_betas = args.ego_beta;
    spec.group_betas = args.group_beta;
    if let Some(samples) = args.samples {
        spec.samples = samples;
    }
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    spec.deterministic |= args.deterministic;

    let outcome = run_experiment(&spec)?;
    for cell in &outcome.manifest.cells {
        for f in &cell.failures {
            eprintln!("{} run {}: {}", cell.dir, f.run, f.error);
        }
    }
    if outcome.all_failed() {
        eprintln!("every cell failed");
        return Ok(ExitCode::FAILURE);
    }
    println!(
        "wrote {} cells to {}",
        outcome.manifest.cells.len(),
        spec.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Resolve { scenario } => {
            let config = ScenarioConfig::from_file(&scenario)?;
            print!("{}", config.to_toml_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::Aggregate { out } => {
            if !out.is_dir() {
                bail!("{} is not a directory", out.display());
            }
            let rows = aggregate_dir(&out).context("recomputing aggregates")?;
            println!("aggregated {} cells", rows.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}
