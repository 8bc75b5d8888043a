//! Experiment CLI: simulate measurements, reconstruct, compare algorithms,
//! or emit a phantom. Exit codes: 0 success, 2 config error, 3 i/o error,
//! 4 divergence, 5 plugin failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rev_ct::harness::{cmd_compare, cmd_reconstruct, cmd_simulate, ExperimentConfig};
use rev_ct::{io, shepp_logan, RevError};

#[derive(Parser)]
#[command(name = "revct", about = "Sparse-view CT reconstruction experiments")]
struct Cli {
    /// Experiment config file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's output directory
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads (affects speed only, never results)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override every seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write zeros into the time_ms metric column so outputs are
    /// byte-reproducible
    #[arg(long, global = true)]
    zero_time: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurements: phantom, clean sinogram, counts, linearized b
    Simulate,
    /// Reconstruct one labelled run from simulated inputs
    Reconstruct {
        /// Run label from the config
        label: String,
    },
    /// Execute all runs and write combined metrics and a summary table
    Compare,
    /// Generate a Shepp-Logan phantom
    Phantom {
        /// Side length in pixels
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, RevError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| RevError::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), RevError> {
    match &cli.command {
        Command::Simulate => cmd_simulate(&load_config(cli)?),
        Command::Reconstruct { label } => cmd_reconstruct(&load_config(cli)?, label, cli.zero_time),
        Command::Compare => cmd_compare(&load_config(cli)?, cli.zero_time),
        Command::Phantom { size } => {
            let out = cli
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from("phantom_out"));
            std::fs::create_dir_all(&out)?;
            let p = shepp_logan(*size)?;
            io::write_image_raw(out.join("phantom.revi"), &p)?;
            io::write_image_png(out.join("phantom.png"), &p, 0.0, 1.0)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("failed to size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
