use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpp::experiments::{run, Command, ExperimentConfig};
use lpp::Error;

#[derive(Parser)]
#[command(name = "lpp", version, about = "Inhomogeneous last passage percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use seeds base..base+COUNT instead of the configured list
    #[arg(long, global = true)]
    seed_count: Option<u64>,
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Round each N up to the nearest admissible lattice size
    #[arg(long, global = true)]
    auto_adjust_n: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Sample rewards and solve the lattice problem per (N, seed)
    Lpp,
    /// Maximize the limiting functional by dynamic programming
    Variational,
    /// Solve the Euler-Lagrange boundary value problem by shooting
    Ode,
    /// Check the strict concavity condition
    Concavity,
    /// Exclusion-process crossing times and the passage-value curve
    Tasep,
    /// Compare the global maximizer with the Euler-Lagrange roots
    Crossval,
    /// Passage-value convergence study
    Theorem1,
    /// Maximal-path convergence study
    Theorem2,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Lpp => Command::Lpp,
            Cmd::Variational => Command::Variational,
            Cmd::Ode => Command::Ode,
            Cmd::Concavity => Command::Concavity,
            Cmd::Tasep => Command::Tasep,
            Cmd::Crossval => Command::Crossval,
            Cmd::Theorem1 => Command::Theorem1,
            Cmd::Theorem2 => Command::Theorem2,
        }
    }
}

fn execute(cli: &Cli) -> lpp::Result<PathBuf> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(count) = cli.seed_count {
        let base = cfg.seeds.first().copied().unwrap_or(0);
        cfg.seeds = (base..base + count).collect();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.auto_adjust_n {
        cfg.auto_adjust_n = true;
    }
    let command = Command::from(cli.command);
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run(command, &cfg)),
        None => run(command, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
