use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coagdiff_cli::{cmd_check, cmd_converge, cmd_horizon, cmd_oracle, cmd_run, RefineAxis};

/// Deterministic coagulation-diffusion solver and verification harness.
#[derive(Parser)]
#[command(name = "coagdiff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural admissibility checks; JSON report on stdout.
    Check { scenario: PathBuf },
    /// Integrate a scenario; writes diagnostics, snapshots and a manifest.
    Run {
        scenario: PathBuf,
        /// Skip the admissibility gate.
        #[arg(long)]
        force: bool,
        /// Override the output cadence (steps between rows).
        #[arg(long)]
        cadence: Option<usize>,
        /// Override the scenario's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Report alpha and the guaranteed existence horizon for the initial data.
    Horizon { scenario: PathBuf },
    /// Refinement study along dt, dx or M.
    Converge {
        scenario: PathBuf,
        /// Refinement axis: dt, dx or M.
        #[arg(long)]
        grid: RefineAxis,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare a reducible scenario against an independent oracle.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check { scenario } => cmd_check(&scenario),
        Command::Run {
            scenario,
            force,
            cadence,
            out_dir,
        } => cmd_run(&scenario, force, cadence, out_dir.as_deref()),
        Command::Horizon { scenario } => cmd_horizon(&scenario),
        Command::Converge {
            scenario,
            grid,
            out_dir,
        } => cmd_converge(&scenario, grid, out_dir.as_deref()),
        Command::Oracle { scenario, out_dir } => cmd_oracle(&scenario, out_dir.as_deref()),
    };
    ExitCode::from(code as u8)
}
