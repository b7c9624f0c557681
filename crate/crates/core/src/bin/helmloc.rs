//! Batch front end: reads a scenario file and runs one of the experiment
//! verbs. Exit codes: 0 on success, 2 on configuration errors, 3 when the
//! solver stops at its iteration cap without reaching the gap tolerance.

use clap::{Args, Parser, Subcommand};
use helmloc::error::Error;
use helmloc::obsop::WeightKind;
use helmloc::scenario::{
    non_convergent, run_benchmark, run_lcurve, run_mixcache, run_scenario, Scenario,
};
use helmloc::solver::Algorithm;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "helmloc",
    about = "Sparse recovery of acoustic point sources from microphone measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (or cache file for mixcache).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's grid level.
    #[arg(long)]
    level: Option<u32>,
    /// Override the scenario's regularization parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the scenario's weight kind.
    #[arg(long)]
    weight: Option<WeightKind>,
    /// Override the scenario's algorithm.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// Override the noise and random-source seeds.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single reconstruction with full diagnostics.
    Solve(CommonArgs),
    /// Warm-started continuation over the alpha schedule.
    Lcurve(CommonArgs),
    /// Statistical benchmark over random sources.
    Benchmark(CommonArgs),
    /// Precompute and store the mixing matrix.
    Mixcache(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Lcurve(a)
            | Command::Benchmark(a)
            | Command::Mixcache(a) => a,
        }
    }
}

fn load_scenario(args: &CommonArgs) -> helmloc::Result<Scenario> {
    let mut scn = Scenario::from_file(&args.config)?;
    if let Some(level) = args.level {
        scn.level = level;
        if scn.data_level.map(|dl| dl < level).unwrap_or(false) {
            scn.data_level = None;
        }
    }
    if let Some(alpha) = args.alpha {
        scn.alpha = Some(alpha);
    }
    if let Some(weight) = args.weight {
        scn.weight = weight;
    }
    if let Some(algo) = args.algo {
        scn.algorithm = algo;
    }
    if let Some(seed) = args.seed {
        scn.noise_seed = seed;
        if let Some(rs) = scn.random_sources.as_mut() {
            rs.seed = seed;
        }
    }
    scn.validate()?;
    Ok(scn)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        Error::NonConvergence(_) => ExitCode::from(3),
        _ => ExitCode::FAILURE,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let scn = load_scenario(cli.command.common())?;
    match &cli.command {
        Command::Solve(args) => {
            let outcome = run_scenario(&scn, &args.out)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "solve: {} support points, misfit {:.6e}, gap {:.6e}, {} iterations ({:?})",
                outcome.solution.entries.len(),
                outcome.report.misfit,
                outcome.report.trace.last().map(|r| r.gap).unwrap_or(0.0),
                outcome.report.iterations,
                outcome.report.termination,
            );
            if non_convergent(&outcome.report) {
                eprintln!("error: iteration cap reached before the duality gap tolerance");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lcurve(args) => {
            let result = run_lcurve(&scn, &args.out)?;
            println!(
                "lcurve: {} alphas, Morozov crossing {}",
                result.rows.len(),
                result
                    .morozov_index
                    .map(|i| format!("at alpha = {:.6e}", result.rows[i].alpha))
                    .unwrap_or_else(|| "not found".into()),
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Benchmark(args) => {
            let result = run_benchmark(&scn, &args.out)?;
            for m in &result.means {
                println!(
                    "benchmark: N={} weight={:?} draws={} failures={} mean_e1={:.6e}",
                    m.n_sources, m.weight, m.draws, m.failures, m.mean_e1
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mixcache(args) => {
            run_mixcache(&scn, &args.out)?;
            println!("mixcache: wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
