//! `effmed` - batch front end for the scattering toolkit.
//!
//! Every subcommand takes one JSON manifest describing inputs, parameters
//! and the output directory, and writes CSV tables plus a `summary.json`.
//! Exit codes: 0 success, 2 validation/input error, 3 numerical failure.

mod commands;
mod error;
mod manifest;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "effmed",
    about = "Scalar wave scattering by many small inhomogeneities: solvers, material design and studies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Validate inputs and print predicted sizes without solving.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever subcommand the manifest declares.
    Run { manifest: PathBuf },
    /// Design a scatterer configuration for a target potential.
    Design { manifest: PathBuf },
    /// Solve the M-body system for a configuration file.
    #[command(name = "solve-discrete")]
    SolveDiscrete { manifest: PathBuf },
    /// Solve the limiting integral equation on the medium grid.
    #[command(name = "solve-effective")]
    SolveEffective { manifest: PathBuf },
    /// Scattering amplitude on a sphere quadrature.
    Farfield { manifest: PathBuf },
    /// Radius-convergence study of the M-body field against the limit.
    Converge { manifest: PathBuf },
    /// Riemann-sum convergence study for the count law.
    Lemma1 { manifest: PathBuf },
    /// Negative-refraction bands of a sampled dispersion curve.
    Dispersion { manifest: PathBuf },
    /// Design a potential approximating a target far-field pattern.
    Focus { manifest: PathBuf },
    /// Particle-count comparison of the two material recipes.
    Counts { manifest: PathBuf },
}

impl Command {
    fn manifest_path(&self) -> &PathBuf {
        match self {
            Command::Run { manifest }
            | Command::Design { manifest }
            | Command::SolveDiscrete { manifest }
            | Command::SolveEffective { manifest }
            | Command::Farfield { manifest }
            | Command::Converge { manifest }
            | Command::Lemma1 { manifest }
            | Command::Dispersion { manifest }
            | Command::Focus { manifest }
            | Command::Counts { manifest } => manifest,
        }
    }

    fn expected_subcommand(&self) -> Option<&'static str> {
        match self {
            Command::Run { .. } => None,
            Command::Design { .. } => Some("design"),
            Command::SolveDiscrete { .. } => Some("solve-discrete"),
            Command::SolveEffective { .. } => Some("solve-effective"),
            Command::Farfield { .. } => Some("farfield"),
            Command::Converge { .. } => Some("converge"),
            Command::Lemma1 { .. } => Some("lemma1"),
            Command::Dispersion { .. } => Some("dispersion"),
            Command::Focus { .. } => Some("focus"),
            Command::Counts { .. } => Some("counts"),
        }
    }
}

fn configure_threads(manifest: &RunManifest) {
    let from_env = std::env::var("EFFMED_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = from_env.or(manifest.threads) {
        // Results are thread-count independent by construction; this only
        // tunes wall time. A failure here means a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let manifest = RunManifest::load(cli.command.manifest_path())?;
    if let Some(expected) = cli.command.expected_subcommand() {
        commands::check_subcommand(&manifest, expected)?;
    }
    configure_threads(&manifest);
    commands::dispatch(&manifest, cli.dry_run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code.exit_code() as u8)
        }
    }
}
