//! Config-driven experiments: regression, MNIST classification and custom
//! quadratics, with CSV outputs and the command-line entry point.

mod build;
mod cli;
mod config;
mod runner;

pub use build::{build_scenario, Prepared};
pub use cli::{cli_main, Cli, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use config::{
    parse_config, AgentConfig, AlgorithmKind, AnalysisConfig, CustomConfig, ExperimentConfig, ExperimentKind, Format,
    LinregConfig, MnistConfig,
};
pub use runner::{run_experiment, summary, write_contraction_csv, write_outputs, EvalRow, ExperimentOutcome};
