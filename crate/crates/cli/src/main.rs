//! `cbnp`: solve, simulate and benchmark contagion resource-allocation instances.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exit code for command-line usage errors.
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_TIME_LIMIT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "cbnp",
    version,
    about = "Branch-and-price for resource allocation over contagion dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance to (near) optimality.
    Solve(SolveArgs),
    /// Evaluate a fixed plan, or do nothing when no plan is given.
    Simulate(SimulateArgs),
    /// Compare baseline allocations with the optimized one.
    Benchmark(BenchmarkArgs),
    /// Report cluster counts and diameters of the pricing state spaces.
    ClusterStats(ClusterArgs),
    /// Write the shipped desk instances as JSON.
    #[command(hide = true)]
    GenFixtures {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BranchingArg {
    Tri,
    Bi,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Cluster diameter; 0 enumerates states exactly.
    #[arg(long)]
    eps: Option<f64>,
    /// Relative optimality gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, value_enum)]
    branching: Option<BranchingArg>,
    /// Solution file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include state trajectories in the solution file.
    #[arg(long)]
    trajectories: bool,
    /// Node trace CSV.
    #[arg(long)]
    tree_csv: Option<PathBuf>,
    /// Column-generation iteration log CSV.
    #[arg(long)]
    log_csv: Option<PathBuf>,
    /// Directory for allocation.csv and trajectories.csv.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    /// Root restricted master problem in LP format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solution file; omitted means the do-nothing plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Trajectory CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated: uniform, cost, topk, optimized.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "uniform,cost,topk,optimized"
    )]
    methods: Vec<String>,
    /// Perturbation samples per method (0 skips the robustness run).
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 0.2)]
    magnitude: f64,
    /// Seed of the perturbation streams; defaults to the instance seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("CBNP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // fails only if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::ClusterStats(a) => commands::cluster_stats(a),
        Command::GenFixtures { dir } => commands::gen_fixtures(&dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
