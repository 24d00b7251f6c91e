//! Batch front end for the filtnoise pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 missing or unreadable input.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "filtnoise", version, about = "Filtered-noise models of turbulent Fourier modes")]
pub struct Cli {
    #[command(subcommand)]
    pub group: Group,
    /// Configuration file (sectioned key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `global.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides `global.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to FILTNOISE_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Group {
    /// Direct numerical simulation.
    Dns {
        #[command(subcommand)]
        cmd: DnsCmd,
    },
    /// Fourier-mode time series.
    Modes {
        #[command(subcommand)]
        cmd: ModesCmd,
    },
    /// Single-mode diagnostics.
    Diag {
        #[command(subcommand)]
        cmd: DiagCmd,
    },
    /// Synthetic shell field.
    Synth {
        #[command(subcommand)]
        cmd: SynthCmd,
    },
    /// Passive-tracer dispersion.
    Tracer {
        #[command(subcommand)]
        cmd: TracerCmd,
    },
    /// Plot-ready tables.
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
}

#[derive(Subcommand, Debug)]
pub enum DnsCmd {
    /// Run the solver; write snapshot, spectrum, energy and mode series.
    Run,
}

#[derive(Subcommand, Debug)]
pub enum ModesCmd {
    /// Run the solver and write only the requested mode series.
    Extract,
}

#[derive(Subcommand, Debug)]
pub enum DiagCmd {
    /// Analyze mode or path CSVs.
    Run,
}

#[derive(Subcommand, Debug)]
pub enum SynthCmd {
    /// Build the shell field and write its description.
    Build,
}

#[derive(Subcommand, Debug)]
pub enum TracerCmd {
    /// Monte Carlo dispersion curve with regime report.
    Disperse,
    /// Closed-form dispersion curve with regime report.
    Predict,
}

#[derive(Subcommand, Debug)]
pub enum ReportCmd {
    /// Autocorrelations against rescaled lag from diagnostics JSON.
    Collapse,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
