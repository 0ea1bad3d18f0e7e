//! Command-line front end for the qganf forecasting pipeline.
//!
//! Every command reads a flat `key = value` config file, applies `--seed`,
//! `--out` and positional `key=value` overrides, validates the result and
//! only then touches the filesystem. Outputs go under the `out` directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;

pub use config::ExperimentConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qganf_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    BadFile { path: PathBuf, message: String },
    #[error("dataset {} not found; run `qganf prepare` first", .0.display())]
    MissingDataset(PathBuf),
    #[error("model {} not found; run `qganf train` first", .0.display())]
    MissingModel(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qganf_core::ErrorClass;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Training => EXIT_TRAINING,
            },
            _ => EXIT_DATA,
        }
    }
}

fn key_help() -> String {
    let mut s = String::from("Config keys (file lines `key = value`, or KEY=VALUE overrides):\n");
    for (key, desc) in config::KEYS {
        s.push_str(&format!("  {key:<14} {desc}\n"));
    }
    s.push_str("\nExit codes: 0 ok, 2 config error, 3 data error, 4 training aborted.");
    s
}

#[derive(Debug, Parser)]
#[command(name = "qganf", version, about = "Quantum and classical GAN price forecasting", after_help = key_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smooth, split, scale and window a price CSV.
    Prepare(CommonArgs),
    /// Write technical indicators of the prepared series.
    Features(CommonArgs),
    /// Train a model on the prepared training split.
    Train(CommonArgs),
    /// Forecast every window of both splits.
    Predict(CommonArgs),
    /// Score a predictions file per split.
    Evaluate(CommonArgs),
    /// Train and score every kind over a window list.
    Sweep(CommonArgs),
    /// Report qubits, circuit depth and trainable parameters per window.
    Resources(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::load(&self.config).map_err(|e| match e {
            CliError::Io { path, source } => {
                CliError::Config(format!("cannot read config {}: {source}", path.display()))
            }
            other => other,
        })?;
        for item in &self.overrides {
            config.apply_override(item)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

type CommandFn = fn(&ExperimentConfig) -> Result<Vec<PathBuf>, CliError>;

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (args, command): (_, CommandFn) = match &cli.command {
        Command::Prepare(a) => (a, commands::cmd_prepare),
        Command::Features(a) => (a, commands::cmd_features),
        Command::Train(a) => (a, commands::cmd_train),
        Command::Predict(a) => (a, commands::cmd_predict),
        Command::Evaluate(a) => (a, commands::cmd_evaluate),
        Command::Sweep(a) => (a, commands::cmd_sweep),
        Command::Resources(a) => (a, commands::cmd_resources),
    };
    command(&args.resolve()?)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
