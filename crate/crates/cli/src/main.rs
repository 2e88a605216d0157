use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use threebox::lg_stats::SamplingPolicy;

mod commands;

#[derive(Parser)]
#[command(
    name = "threebox",
    version,
    about = "Quantum three-box game: simulation, Leggett-Garg analysis, macrorealist search"
)]
struct Cli {
    /// Worker threads for simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Fair,
    Adverse,
}

impl From<Policy> for SamplingPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Fair => SamplingPolicy::FairSampling,
            Policy::Adverse => SamplingPolicy::Adverse,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play the rounds of a session config; writes records.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "fair")]
        policy: Policy,
    },
    /// Sequential-measurement verification tables; writes verification.json.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Measurement pairs per ordered box combination.
        #[arg(long, default_value_t = 1200)]
        pairs: u64,
    },
    /// Leggett-Garg analysis of an existing records.csv.
    Analyze {
        records: PathBuf,
        #[arg(long, value_enum, default_value = "fair")]
        policy: Policy,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive deterministic scan plus a stochastic fit to target statistics;
    /// writes fit.json and frontier.csv.
    Mrscan {
        /// JSON fit targets (default: ideal quantum statistics).
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Strategy evaluations for the stochastic search.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict the search to non-disturbing measurements.
        #[arg(long)]
        lock_disturbance: bool,
    },
    /// Interactive game service over HTTP + JSON.
    Serve {
        /// Default session config for `POST /sessions` without a body.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Idle seconds before a session expires.
        #[arg(long, default_value_t = 1800)]
        idle_timeout: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THREEBOX_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed, policy } => {
            commands::simulate(&config, &out, seed, policy.into(), cli.threads)
        }
        Command::Verify { config, out, seed, pairs } => commands::verify(&config, &out, seed, pairs),
        Command::Analyze { records, policy, out } => commands::analyze(&records, policy.into(), out.as_deref()),
        Command::Mrscan { targets, budget, out, seed, lock_disturbance } => {
            commands::mrscan(targets.as_deref(), budget, &out, seed, lock_disturbance)
        }
        Command::Serve { config, bind, idle_timeout } => commands::serve(config.as_deref(), bind, idle_timeout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("threebox: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
