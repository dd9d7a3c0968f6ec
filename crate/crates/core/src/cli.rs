//! Command-line front end: parse a config, generate or load a trace, run
//! paired (mover-off vs mover-on) experiments or sweeps, write CSVs and a
//! summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::cluster::JobSpec;
use crate::config::{MoverAlgorithm, SimConfig};
use crate::engine;
use crate::error::{Result, SimError};
use crate::metrics::{self, SimReport};
use crate::workload::{self, WorkloadSpec};

#[derive(Parser)]
#[command(
    name = "jobmover-sim",
    version,
    about = "Deterministic batch-farm simulator with a runtime job-consolidation engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one workload twice (mover off, mover on) and compare
    Run(RunArgs),
    /// Paired runs across a range of farm shapes
    Sweep(SweepArgs),
    /// Generate a workload trace file
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (flat `key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Directory for baseline.csv, mover.csv, summary.txt
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's rng_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's mover_algorithm
    #[arg(long, value_enum)]
    algorithm: Option<MoverAlgorithm>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Farm dimension to vary
    #[arg(long, value_enum)]
    axis: SweepAxis,
    /// Comma-separated axis values
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u32>,
    /// Comma-separated seeds (defaults to the config's rng_seed)
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Directory for sweep.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SweepAxis {
    Cores,
    Servers,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace file to write
    #[arg(long)]
    out: PathBuf,
    /// Override the config's rng_seed
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses arguments, dispatches, and maps errors onto the exit-code
/// contract: 0 success, 1 bad config/trace/I-O, 2 broken internal invariant.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("JOBMOVER_SIM_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Gen(args) => cmd_gen(&args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                SimError::Config(_) | SimError::Trace(_) | SimError::Io { .. } => 1,
                SimError::Comparison(_) | SimError::EmptyEventQueue | SimError::Internal(_) => 2,
            }
        }
    }
}

fn load_or_generate(config: &SimConfig) -> Result<Vec<JobSpec>> {
    match &config.workload {
        WorkloadSpec::TraceFile { path } => workload::load_trace(path),
        spec => workload::generate(
            spec,
            config.num_servers,
            config.cores_per_server,
            config.horizon,
            config.rng_seed,
        ),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut config = SimConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(algorithm) = args.algorithm {
        config.mover_algorithm = algorithm;
    }
    config.validate()?;
    let trace = load_or_generate(&config)?;
    let (baseline, mover) = engine::run_pair(&config, &trace)?;

    std::fs::create_dir_all(&args.out).map_err(|e| SimError::io(&args.out, e))?;
    baseline.save_csv(&args.out.join("baseline.csv"))?;
    mover.save_csv(&args.out.join("mover.csv"))?;
    let summary = summarize(&config, &trace, &baseline, &mover)?;
    write_file(&args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Fixed-format comparison of the paired runs; percentages to one decimal
/// so the file is golden-testable.
fn summarize(
    config: &SimConfig,
    trace: &[JobSpec],
    baseline: &SimReport,
    mover: &SimReport,
) -> Result<String> {
    let improvement = metrics::efficiency_improvement(mover, baseline)?;
    let mut s = String::new();
    let _ = writeln!(s, "seed: {}", config.rng_seed);
    let _ = writeln!(s, "algorithm: {}", config.mover_algorithm);
    let _ = writeln!(s, "workload_jobs: {}", trace.len());
    let _ = writeln!(s, "baseline_completed_jobs: {}", baseline.totals.completed_jobs);
    let _ = writeln!(s, "mover_completed_jobs: {}", mover.totals.completed_jobs);
    let _ = writeln!(s, "migration_events: {}", mover.totals.migration_events);
    let _ = writeln!(s, "efficiency_improvement: {improvement:.1}%");
    let _ = writeln!(s, "moved_fraction: {:.1}%", mover.moved_fraction_pct());
    let _ = writeln!(s, "exploitation_baseline: {:.1}%", 100.0 * baseline.exploitation());
    let _ = writeln!(s, "exploitation_mover: {:.1}%", 100.0 * mover.exploitation());
    if config.power_managed() {
        let base_energy = metrics::energy(baseline);
        let mover_energy = metrics::energy(mover);
        let _ = writeln!(
            s,
            "powered_on_server_seconds_baseline: {}",
            baseline.totals.powered_on_server_seconds
        );
        let _ = writeln!(
            s,
            "powered_on_server_seconds_mover: {}",
            mover.totals.powered_on_server_seconds
        );
        let cross = if baseline.totals.powered_on_server_seconds == 0 {
            0.0
        } else {
            100.0
                * (1.0
                    - mover.totals.powered_on_server_seconds as f64
                        / baseline.totals.powered_on_server_seconds as f64)
        };
        let _ = writeln!(s, "energy_saving_mover_vs_baseline: {cross:.1}%");
        let _ = writeln!(s, "energy_saving_vs_always_on_baseline: {:.1}%", base_energy.saving_pct);
        let _ = writeln!(s, "energy_saving_vs_always_on_mover: {:.1}%", mover_energy.saving_pct);
        if let (Some(b), Some(m)) = (base_energy.consumed_wh, mover_energy.consumed_wh) {
            let _ = writeln!(s, "energy_wh_baseline: {b:.1}");
            let _ = writeln!(s, "energy_wh_mover: {m:.1}");
        }
    }
    Ok(s)
}

pub const SWEEP_HEADER: &str =
    "axis_value,seed,improvement_pct,moved_pct,exploitation_base,exploitation_mover";

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = SimConfig::from_file(&args.config)?;
    let seeds = if args.seeds.is_empty() {
        vec![base.rng_seed]
    } else {
        args.seeds.clone()
    };
    let mut points = Vec::new();
    for &value in &args.values {
        for &seed in &seeds {
            points.push((value, seed));
        }
    }

    // Points are independent simulations; run them in parallel but emit
    // rows in the given order.
    let rows: Result<Vec<String>> = points
        .par_iter()
        .map(|&(value, seed)| {
            let mut config = base.clone();
            match args.axis {
                SweepAxis::Cores => config.cores_per_server = value,
                SweepAxis::Servers => config.num_servers = value,
            }
            config.rng_seed = seed;
            config.validate()?;
            let trace = load_or_generate(&config)?;
            let (baseline, mover) = engine::run_pair(&config, &trace)?;
            let improvement = metrics::efficiency_improvement(&mover, &baseline)?;
            Ok(format!(
                "{value},{seed},{improvement:.1},{:.1},{:.4},{:.4}",
                mover.moved_fraction_pct(),
                baseline.exploitation(),
                mover.exploitation()
            ))
        })
        .collect();
    let rows = rows?;

    std::fs::create_dir_all(&args.out).map_err(|e| SimError::io(&args.out, e))?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    write_file(&args.out.join("sweep.csv"), &csv)?;
    println!("wrote {} sweep points to {}", rows.len(), args.out.join("sweep.csv").display());
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let mut config = SimConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    config.validate()?;
    let trace = load_or_generate(&config)?;
    workload::save_trace(&trace, &args.out)?;
    println!("wrote {} jobs to {}", trace.len(), args.out.display());
    Ok(())
}
