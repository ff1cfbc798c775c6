use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wavesense_cli::commands::{run, Command, Context};
use wavesense_cli::config::Variant;
use wavesense_cli::Config;

#[derive(Debug, Parser)]
#[command(name = "wavesense", version, about = "Wavelet electro-sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Proportionality constant of the universal threshold.
    #[arg(long, global = true)]
    mu_scale: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pixel written by imaging-by-maximum.
    #[arg(long, global = true, value_enum)]
    variant: Option<Variant>,
    /// Input file for `reconstruct` (MSR) or `image` (wavelet matrix).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Print stage timings to stderr.
    #[arg(long, global = true)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => match Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => Config::default(),
    };
    let mut config = config;
    if let Some(s) = cli.seed {
        config.noise.seed = s;
    }
    if let Some(c) = cli.mu_scale {
        config.solver.mu_scale = c;
    }
    if let Some(o) = cli.out {
        config.output = o;
    }
    if let Some(v) = cli.variant {
        config.imaging.variant = v;
    }
    let ctx = Context { config, input: cli.input, timings: cli.timings };
    match run(cli.command, &ctx) {
        Ok(record) => {
            println!("{}: wrote {} files to {}", record.command, record.outputs.len(), ctx.config.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
