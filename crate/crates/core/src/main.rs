use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsvd::cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "nsvd", version, about = "Damped Navier-Stokes-Voigt simulation and optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Forward solve with energy diagnostics
    Simulate(Common),
    /// Box-constrained optimal control
    Optimize(Common),
    /// Run the property suite; exit 1 on any failing check
    Verify(Common),
    /// Taylor remainder table for the adjoint gradient
    GradientCheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; every section is optional
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Set a config value, e.g. model.r=5 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Optimize(c) => (Command::Optimize, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::GradientCheck(c) => (Command::GradientCheck, c),
    };
    let inv = Invocation {
        command,
        config: c.config,
        output: c.output,
        seed: c.seed,
        overrides: c.overrides,
    };
    ExitCode::from(run(&inv) as u8)
}
