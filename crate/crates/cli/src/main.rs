use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faraday_cli::config::OUT_DIR_ENV;
use faraday_cli::{resolve, run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "faraday", version, about = "Cavity Faraday-rotation figure data")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML file with parameter overrides and an optional [run] table
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Drop positions (fig2) or selected trajectories (fig4, fig5)
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Detuning grid START:STOP:N in MHz (fig2, fig4, fig5 inset)
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Fluorescence lineshapes for three excitation powers
    Fig2,
    /// Transmittance and rotation, pinned and trajectory-averaged
    Fig4,
    /// Conditional spin populations after a click
    Fig5,
    /// Maximum rotation versus cavity length and mirror reflectivity
    Fig6,
    /// Run the invariant suite
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fig2 => Command::Fig2,
            Cmd::Fig4 => Command::Fig4,
            Cmd::Fig5 => Command::Fig5,
            Cmd::Fig6 => Command::Fig6,
            Cmd::Validate => Command::Validate,
        }
    }
}

fn execute(cli: &Cli) -> Result<usize, CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        samples: cli.samples,
        grid: cli.grid.clone(),
    };
    let resolved = resolve(cli.command.into(), &config, &overrides)?;
    let report = run(&resolved)?;
    for line in &report.summary {
        println!("{line}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(report.failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} failures");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("faraday: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
