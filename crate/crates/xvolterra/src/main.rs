use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xvolterra::commands::{cmd_enumerate, cmd_extract, cmd_plan, cmd_probe, cmd_synthesize, cmd_validate, Outcome};
use xvolterra::config::RunConfig;
use xvolterra::Result;

/// Multi-tone Volterra kernel extraction and time-domain synthesis.
#[derive(Debug, Parser)]
#[command(name = "xvolterra", version)]
struct Cli {
    /// Run configuration (JSON); defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the jittered amplitude rows (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print and save the output-frequency and kernel tables.
    Enumerate {
        #[arg(long, default_value_t = 3)]
        tones: usize,
        #[arg(long, default_value_t = 3)]
        order: u32,
    },
    /// Build and check the sweep plan.
    Plan,
    /// Probe the configured system over the plan.
    Probe,
    /// Fit kernels to the dataset.
    Extract,
    /// Predict the pulse response from the kernel archive.
    Synthesize,
    /// Compare the archive with the system in time and frequency domain.
    Validate,
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.paths.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| xvolterra::Error::Config(format!("thread pool: {e}")))?;
    }
    let stdout = &mut std::io::stdout();
    match cli.command {
        Command::Enumerate { tones, order } => cmd_enumerate(&cfg.paths.out, tones, order, stdout),
        Command::Plan => cmd_plan(&cfg, stdout),
        Command::Probe => cmd_probe(&cfg, stdout),
        Command::Extract => cmd_extract(&cfg, stdout),
        Command::Synthesize => cmd_synthesize(&cfg, stdout),
        Command::Validate => cmd_validate(&cfg, stdout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
