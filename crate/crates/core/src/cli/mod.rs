//! Command-line front end.
//!
//! Every subcommand reads an optional JSON config (`--config`), applies flag
//! overrides, validates, runs and writes CSV/JSON files plus a
//! `manifest.json` into `--out`. Exit codes: 0 success, 2 invalid
//! configuration, 3 runtime or numeric failure.

mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::error::Error;
use config::{BoundsArgs, ExitArgs, SchemeArgs, SimulateArgs, SpeedscanArgs, WaveArgs};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "npbbm", version, about = "Branching Brownian motion with two-sided selection")]
pub struct Cli {
    /// JSON file with the command's options; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the particle system; optionally estimate its speed.
    Simulate(SimulateArgs),
    /// Run the discrete lower and upper bounding systems.
    Bounds(BoundsArgs),
    /// Iterate the deterministic sandwich scheme.
    Scheme(SchemeArgs),
    /// Tabulate the travelling wave over a grid of p.
    Wave(WaveArgs),
    /// Killed Brownian motion between the wave barriers.
    Exit(ExitArgs),
    /// Speed estimates over a grid of N.
    Speedscan(SpeedscanArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Runtime(other),
        }
    }
}

fn load<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.code()
        }
    }
}

/// Runs a parsed command and returns the files written (manifest last).
pub fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(Error::invalid(e.to_string())))?;
    let out = cli.out.clone();
    let config = cli.config.clone();
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(a.over(load(&config)?).resolve(), &out),
        Command::Bounds(a) => commands::bounds(a.over(load(&config)?).resolve(), &out),
        Command::Scheme(a) => commands::scheme(a.over(load(&config)?).resolve(), &out),
        Command::Wave(a) => commands::wave(a.over(load(&config)?).resolve(), &out),
        Command::Exit(a) => commands::exit(a.over(load(&config)?).resolve(), &out),
        Command::Speedscan(a) => commands::speedscan(a.over(load(&config)?).resolve(), &out),
    })
}
