//! Thin CLI over the experiment driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use relu_spectra::driver::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "relu-spectra",
    version,
    about = "Spectral analysis and harmonic pruning of small ReLU networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the data directory (fallback: RELU_SPECTRA_DATA_DIR)
    #[arg(long = "data-dir", global = true)]
    data_dir: Option<PathBuf>,
    /// Override the output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an MLP and write checkpoints plus a metrics CSV
    Train,
    /// Per-layer ReLU singular value bound curves on correct/incorrect subsets
    Rsv,
    /// Gaussian mean width trace over checkpoints and layers
    Gmw,
    /// Harmonic pruning from a trained checkpoint
    Prune,
    /// Render an SVG line plot from an emitted CSV
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Rsv => "rsv",
            Command::Gmw => "gmw",
            Command::Prune => "prune",
            Command::Report => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let result = (|| {
        let config_path = cli.config.ok_or_else(|| {
            driver::CliError::Usage("missing --config <path>".into())
        })?;
        let mut cfg = ExperimentConfig::load(&config_path)?;
        if let Some(seed) = cli.seed {
            cfg.set("seed", seed.to_string());
        }
        if let Some(dir) = cli.data_dir {
            cfg.set("data_dir", dir.display().to_string());
        }
        if let Some(out) = cli.out {
            cfg.set("out_dir", out.display().to_string());
        }
        driver::run(cli.command.name(), &cfg)
    })();

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
