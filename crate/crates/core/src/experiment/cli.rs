use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use super::config::parse_config;
use super::runner::{run_experiment, summary, write_outputs};
use crate::error::SolaError;
use crate::fusion::FusionMode;

/// Run a switched online learning experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "sola", version)]
pub struct Cli {
    /// Experiment config (.toml or .json).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for CSV and summary outputs.
    #[arg(long, default_value = "./out")]
    pub out_dir: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forces α ≡ 1.
    #[arg(long)]
    pub naive: bool,
    /// Suppresses the summary on standard output.
    #[arg(long)]
    pub quiet: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Entry point of the `sola` binary; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e @ SolaError::Io { .. }) => {
            eprintln!("error: cannot read config {}: {e}", cli.config.display());
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.naive {
        cfg.mode = FusionMode::Naive;
    }
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e @ (SolaError::Config(_) | SolaError::Io { .. } | SolaError::NotIdx | SolaError::ShortRead)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = write_outputs(&outcome, &cli.out_dir) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    if !cli.quiet {
        print!("{}", summary(&outcome));
    }
    match &outcome.failure {
        Some(f) => {
            eprintln!("error: {f}");
            EXIT_RUNTIME
        }
        None => EXIT_OK,
    }
}
