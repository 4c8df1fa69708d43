//! `liesym` command-line runner. Every command takes a JSON config and an
//! output root; results land in a run directory named by the config hash so
//! identical configs reproduce identical artifacts.

mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "liesym", version, about = "symmetry enforcement, discovery, and promotion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a model, point cloud, or dynamical system for symmetries.
    Discover(RunArgs),
    /// Compute a basis of exactly equivariant dictionary models.
    Enforce(RunArgs),
    /// Regularized regression over a gamma grid.
    Fit(RunArgs),
    /// Sample-complexity sweep for constrained polynomial recovery.
    ExpPolyrec(RunArgs),
    /// Planar spring-mass extrapolation study.
    ExpSpringmass(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output root; artifacts go to `<out>/<config-hash>/`.
    #[arg(long)]
    out: PathBuf,
}

/// Failure class determining the exit code: 2 for configuration problems,
/// 3 for numerical ones.
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn from_lib(e: liesym::Error) -> Self {
        use liesym::Error::*;
        match e {
            NonFinite(_) | SingularGram(_) | NotInAlgebra(_) | Infeasible(_) => {
                Failure::Numerical(e.to_string())
            }
            UnsupportedGroup(_) | DimensionMismatch(_) | InsufficientSamples { .. }
            | SizeCap(_) | InvalidInput(_) => Failure::Config(e.to_string()),
        }
    }
}

impl From<liesym::Error> for Failure {
    fn from(e: liesym::Error) -> Self {
        Failure::from_lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Discover(a) => ("discover", a),
        Command::Enforce(a) => ("enforce", a),
        Command::Fit(a) => ("fit", a),
        Command::ExpPolyrec(a) => ("exp-polyrec", a),
        Command::ExpSpringmass(a) => ("exp-springmass", a),
    };
    match config::run(name, args) {
        Ok(dir) => {
            println!("ok: artifacts in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
