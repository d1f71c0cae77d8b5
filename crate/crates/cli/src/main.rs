//! `lact`: limited-angle CT simulation and reconstruction pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lact_core::commands::{self, Context};
use lact_core::config::OUT_DIR_ENV;
use lact_core::{Error, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "lact", version, about = "Limited-angle CT simulation, reconstruction and analysis")]
struct Cli {
    /// Run configuration (JSON). Built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    /// Scanned angular range in degrees, overriding the config.
    #[arg(long, global = true, num_args = 2, value_names = ["START", "END"], allow_negative_numbers = true)]
    range_deg: Option<Vec<f64>>,

    /// Output directory [default: config out_dir, then $LACT_OUT_DIR, then ./lact-out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for network and perceptual-extractor parameters.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Rasterize the phantom.
    Phantom,
    /// Simulate the sinogram.
    Project,
    /// Ram-Lak filter the sinogram.
    Filter,
    /// Reconstruct over the selected range and over the full scan.
    Recon,
    /// Label boundary singularities and predict streak lines.
    Visibility,
    /// Build the anisotropic loss weight map.
    Weights,
    /// Run the reconstruction through the network blocks.
    BlockDemo,
    /// Evaluate the loss terms.
    Loss,
    /// Write the PSNR/SSIM report.
    Metrics,
    /// Run every step in order.
    Pipeline,
}

fn context(cli: &Cli) -> Result<Context, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(r) = &cli.range_deg {
        config = config.with_range_deg(r[0], r[1])?;
    }
    let out = config.out_dir(cli.out.as_deref());
    Ok(Context::new(config, out))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    let ctx = context(cli)?;
    match cli.command {
        Command::Phantom => commands::cmd_phantom(&ctx),
        Command::Project => commands::cmd_project(&ctx),
        Command::Filter => commands::cmd_filter(&ctx),
        Command::Recon => commands::cmd_recon(&ctx),
        Command::Visibility => commands::cmd_visibility(&ctx),
        Command::Weights => commands::cmd_weights(&ctx),
        Command::BlockDemo => commands::cmd_block_demo(&ctx),
        Command::Loss => commands::cmd_loss(&ctx),
        Command::Metrics => commands::cmd_metrics(&ctx),
        Command::Pipeline => commands::cmd_pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lact: {e}");
            if matches!(e, Error::MissingInput { .. }) {
                eprintln!("lact: run the upstream steps first, or set --out / {OUT_DIR_ENV}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
