use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bees::harness::{
    default_threads, read_csv, run_experiment, summarize, write_csv, write_summary, ExperimentConfig,
    THREADS_ENV,
};
use clap::{Parser, Subcommand};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

/// Bandits with expert advice over unbounded expert pools.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, horizon, seed) combination of a config and write CSV.
    Run {
        config: PathBuf,
        /// CSV destination; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-epoch error rate delta (true) or delta / L (false).
        #[arg(long, action = clap::ArgAction::Set)]
        anytime: Option<bool>,
        /// Worker threads.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// Mean and sample standard deviation of regret per (algorithm, T).
    Summarize { csv: PathBuf },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run(config_path: PathBuf, out: Option<PathBuf>, anytime: Option<bool>, threads: Option<usize>) -> ExitCode {
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", config_path.display())),
    };
    let mut config = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", config_path.display())),
    };
    if let Some(a) = anytime {
        config.anytime = a;
    }
    let threads = threads.filter(|&n| n > 0).unwrap_or_else(default_threads);
    let (rows, error) = match run_experiment(&config, threads) {
        Ok(rows) => (rows, None),
        Err(partial) => (partial.rows, Some(partial.error)),
    };

    let destination = out.or_else(|| config.output.clone());
    let written = match &destination {
        Some(path) => File::create(path)
            .map_err(|e| bees::Error::Resource(format!("{}: {e}", path.display())))
            .and_then(|f| write_csv(&rows, BufWriter::new(f))),
        None => write_csv(&rows, io::stdout().lock()),
    };
    if let Err(e) = written {
        return fail(RUNTIME_ERROR, e);
    }
    if destination.is_some() && !rows.is_empty() {
        if let Ok(summary) = summarize(&rows) {
            let _ = write_summary(&summary, io::stdout().lock());
        }
    }
    match error {
        Some(e) => fail(RUNTIME_ERROR, e),
        None => ExitCode::SUCCESS,
    }
}

fn summarize_file(path: PathBuf) -> ExitCode {
    let rows = match File::open(&path)
        .map_err(|e| bees::Error::Parameter(format!("{}: {e}", path.display())))
        .and_then(read_csv)
    {
        Ok(r) => r,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let summary = match summarize(&rows) {
        Ok(s) => s,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let mut stdout = io::stdout().lock();
    match write_summary(&summary, &mut stdout).and_then(|_| stdout.flush()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(RUNTIME_ERROR, e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            anytime,
            threads,
        } => run(config, out, anytime, threads),
        Command::Summarize { csv } => summarize_file(csv),
    }
}
