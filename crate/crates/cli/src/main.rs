//! `kusuoka`: batch front end for the transfer-operator toolkit.
//!
//! Exit codes: 0 on success, 1 for configuration or argument errors, 2 for
//! numerical failures (non-convergence, range errors, broken contracts).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use output::Format;

#[derive(Parser)]
#[command(name = "kusuoka", version, about = "Matrix-valued Gibbs measures, pressure and zeta functions of IFS fractals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Perron eigendata of the block operator.
    Solve,
    /// Orbit counting tables and their asymptotic checks.
    Count,
    /// Series, Euler-product and determinant forms of the zeta function.
    Zeta,
    /// Entropy + energy functional for the Kusuoka measure and Bernoulli competitors.
    Variational,
    /// Lyapunov-matrix estimates and rank-one checks along sampled words.
    Lyapunov,
    /// The root c of P(−cV̂) = 0.
    Root,
    /// |det(I − L_{−(1+iy)V})| along a vertical line.
    Scanline,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<kusuoka::Error>()) {
        Some(e) if e.is_numeric() => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            anyhow::bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = match cli.command {
        Command::Solve => commands::solve(&cfg)?,
        Command::Count => commands::count(&cfg)?,
        Command::Zeta => commands::zeta(&cfg)?,
        Command::Variational => commands::variational(&cfg)?,
        Command::Lyapunov => commands::lyapunov(&cfg)?,
        Command::Root => commands::root(&cfg)?,
        Command::Scanline => commands::scanline(&cfg)?,
    };
    out.write(&cli.out, cli.format, &serde_json::to_value(&cfg)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
