//! Command-line front end.
//!
//! Every command reads one JSON configuration (flat keys, see
//! [`config::RunConfig`]), applies `--seed`, `--out-dir` and `--set key=value`
//! overrides, and writes CSV files, each with a `<file>.meta.json` sidecar
//! holding the full configuration. `--from-meta <sidecar>` reruns from one.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 physics
//! error (unstable operating point or non-classical noise), 4 numerical failure.

// Progress lines on stdout; a closed pipe (e.g. `| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, ErrorClass};
use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "spinflip",
    version,
    about = "Polarization noise of spin-flip VCSELs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Take the configuration from a `.meta.json` sidecar of an earlier run.
    #[arg(long, global = true, conflicts_with = "config")]
    pub from_meta: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set pump_r=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Closed-form Stokes spectra and C+- on the frequency grid.
    Spectra,
    /// Monte-Carlo ensemble, Welch estimate and comparison with the closed forms.
    Simulate,
    /// Detection spectra for the configured geometries and the squeezing table.
    Detect,
    /// Eigenvalues of the linearized drift.
    Stability,
    /// Summary quantities along one laser-parameter axis.
    Sweep,
    /// Tables and plots of the full spectral power and the C+- correlation.
    ReproduceFigures,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A library failure, with an optional explanation for the user.
    Run(Error, Option<String>),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Run(e, _) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Physics => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Run(e, None) => write!(f, "{e}"),
            CliError::Run(e, Some(hint)) => write!(f, "{e}\n  {hint}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e, None)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Resolves the effective configuration from file, sidecar and flags.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.from_meta) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::from_json(&text)?
        }
        (None, Some(path)) => output::config_from_meta(&std::fs::read_to_string(path)?)?,
        (None, None) => RunConfig::default(),
    };
    cfg = cfg.with_overrides(&cli.sets)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

/// Runs one command; returns the files written.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Spectra => commands::spectra(cfg),
        Command::Simulate => commands::simulate(cfg),
        Command::Detect => commands::detect(cfg),
        Command::Stability => commands::stability_report(cfg),
        Command::Sweep => commands::sweep(cfg),
        Command::ReproduceFigures => commands::reproduce_figures(cfg),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match load_config(&cli).and_then(|cfg| run(cli.command, &cfg)) {
        Ok(files) => {
            for f in files {
                say!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run_args(std::env::args_os())
}
