//! Command-line front end for `xml_ridge`: train, tune, predict, eval,
//! sparsify and stats.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

use std::io::Write;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, Metric, Options, ReduceSpec};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "xml-ridge", version, about = "Closed-form ridge regression for extreme multi-label learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Ŵ for one λ and write the model
    Train(Options),
    /// Pick λ on a held-out split of the training set
    Tune(Options),
    /// Write the top-K labels of each test instance
    Predict(Options),
    /// P@K and PSP@K of a model on a test set
    Eval(Options),
    /// Threshold small weights; sweep report with optional test metrics
    Sparsify(Options),
    /// Label frequency and per-label P@K contribution CSVs
    Stats(Options),
}

impl Command {
    fn options(&self) -> &Options {
        match self {
            Command::Train(o)
            | Command::Tune(o)
            | Command::Predict(o)
            | Command::Eval(o)
            | Command::Sparsify(o)
            | Command::Stats(o) => o,
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let opts = cli.command.options().clone().with_config_file()?;
    let cfg = ExperimentConfig::from_options(opts)?;
    if let Some(n) = cfg.threads {
        // A pool that already exists (repeated in-process runs) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Train(_) => commands::train(&cfg, out),
        Command::Tune(_) => commands::tune(&cfg, out),
        Command::Predict(_) => commands::predict(&cfg, out),
        Command::Eval(_) => commands::eval(&cfg, out),
        Command::Sparsify(_) => commands::sparsify(&cfg, out),
        Command::Stats(_) => commands::stats(&cfg, out),
    }
}
