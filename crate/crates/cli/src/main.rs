//! `stl-dro`: synthesis and evaluation of open-loop controllers for
//! stochastic linear systems under STL chance constraints.
//!
//! Subcommands: `check` (formula + Lipschitz report), `solve`
//! (nominal / sample-average / distributionally robust), `evaluate`
//! (out-of-sample Monte Carlo), `plot` (phase-plane SVG).
//!
//! Exit codes: 0 success/feasible, 1 error, 2 infeasible.

mod commands;
mod output;
mod plot;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "stl-dro", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a scenario and report the formula, horizon, Lipschitz constants,
    /// and the constraint tightening.
    Check {
        /// Scenario file path or the built-in name `casestudy-sec4`.
        scenario: String,
    },
    /// Synthesize an input sequence and write the solution, the nominal
    /// trajectory, and a results summary.
    Solve(SolveArgs),
    /// Evaluate a saved solution out of sample.
    Evaluate(EvaluateArgs),
    /// Render trajectory CSVs into a phase-plane SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file path or the built-in name `casestudy-sec4`.
    scenario: String,
    /// Which program to solve.
    #[arg(long, value_parser = ["nominal", "ecp", "drp"])]
    method: String,
    /// Number of disturbance samples (defaults: scenario `samples.drp` /
    /// `samples.ecp` by method).
    #[arg(long)]
    samples: Option<usize>,
    /// Wasserstein radius (overrides the scenario radius section).
    #[arg(long)]
    radius: Option<f64>,
    /// Sampling seed (overrides the scenario `seeds.samples`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $STL_DRO_OUT or ./stl-dro-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scenario file path or the built-in name `casestudy-sec4`.
    scenario: String,
    /// Solution file produced by `solve`.
    solution: PathBuf,
    /// Monte-Carlo trials (0 skips the Monte-Carlo fields).
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Evaluation seed (overrides the scenario `seeds.evaluate`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $STL_DRO_OUT or ./stl-dro-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one trajectory CSV per trial plus an index file.
    #[arg(long)]
    write_trajectories: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV files (as written by `solve`/`evaluate`).
    trajectories: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Safety level drawn as the horizontal line x2 = level.
    #[arg(long, default_value_t = 0.75)]
    safety_level: f64,
    /// Semi-axes of the target ellipse x1^2/a^2 + x2^2/b^2 = 1.
    #[arg(long, default_value_t = 2.0)]
    ellipse_a: f64,
    #[arg(long, default_value_t = 5.0)]
    ellipse_b: f64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Check { scenario } => commands::check(&scenario),
        Command::Solve(args) => commands::solve(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Plot(args) => commands::plot(&args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
