use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod figures;
mod output;

use config::RunConfig;

/// Attosecond electron pulse shaping by sequential phase modulation.
#[derive(Parser)]
#[command(name = "attoshape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Talbot distance, quarter-Talbot distance and paraxial focus.
    Talbot(Common),
    /// Density evolution, rms duration and bunching moments along a scheme.
    Propagate(Common),
    /// Optimize a single, dual or triple scheme.
    Optimize(Common),
    /// Data for one of the figures: fig2, fig3, fig4 or figS1.
    Figure {
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Talbot(c) => commands::talbot(&RunConfig::load(&c.config)?, c.out.as_deref()),
        Command::Propagate(c) => {
            commands::propagate(&RunConfig::load(&c.config)?, &c.out.unwrap_or_else(default_out))
        }
        Command::Optimize(c) => commands::optimize(&RunConfig::load(&c.config)?, &c.out.unwrap_or_else(default_out)),
        Command::Figure { id, common } => {
            if !["fig2", "fig3", "fig4", "figS1"].contains(&id.as_str()) {
                anyhow::bail!("unknown figure '{id}' (use fig2, fig3, fig4 or figS1)");
            }
            let config = RunConfig::load(&common.config)?;
            figures::run(&id, &config, &common.out.unwrap_or_else(default_out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
