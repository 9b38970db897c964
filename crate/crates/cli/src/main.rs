//! `slog`: data generation, ADMM, training, inference and benchmarks for
//! blind deconvolution of graph signals.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{BenchArgs, GenDataArgs, Globals, InferArgs, ReportArgs, SolveAdmmArgs, TrainArgs};
use config::{usage, CliError, CliResult, ConfigFile};

const GLOBAL_KEYS: [&str; 4] = ["config", "seed", "jobs", "quiet"];

#[derive(Parser, Debug)]
#[command(name = "slog", version, about = "Blind deconvolution of graph signals")]
struct Cli {
    /// JSON file whose keys mirror the flags; flags win over file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for bench realizations [default: 1]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only log warnings and errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a graph with training, validation and test datasets
    GenData(GenDataArgs),
    /// Solve one dataset batch with ADMM
    SolveAdmm(SolveAdmmArgs),
    /// Train an unrolled network
    Train(TrainArgs),
    /// Run a trained network on every batch of a dataset
    Infer(InferArgs),
    /// Compare ADMM and a trained network over a noise sweep
    Bench(BenchArgs),
    /// Aggregate benchmark CSVs into a JSON summary
    Report(ReportArgs),
}

fn run(cli: Cli, matches: &ArgMatches) -> CliResult<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let quiet = cli.quiet || file.get::<bool>("quiet")?.unwrap_or(false);
    env_logger::Builder::new()
        .filter_level(if quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .format_target(false)
        .init();

    let globals = Globals {
        seed: cli.seed.map_or_else(|| file.get("seed"), |s| Ok(Some(s)))?.unwrap_or(0),
        jobs: cli.jobs.map_or_else(|| file.get("jobs"), |j| Ok(Some(j)))?.unwrap_or(1),
        config_file: file.path.clone(),
    };
    if globals.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let (_, sub) = matches.subcommand().expect("a subcommand is required");
    match cli.command {
        Command::GenData(a) => commands::gen_data(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
        Command::SolveAdmm(a) => commands::solve_admm(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
        Command::Train(a) => commands::train_cmd(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
        Command::Infer(a) => commands::infer_cmd(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
        Command::Bench(a) => commands::bench(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
        Command::Report(a) => commands::report(file.apply(a, sub, &GLOBAL_KEYS)?, &globals),
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
