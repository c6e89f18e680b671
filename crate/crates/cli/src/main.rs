//! `nse-lab`: command-line front end of the spectral laboratory.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clab::Error;

#[derive(Parser, Debug)]
#[command(name = "nse-lab", version, about = "Littlewood-Paley analysis and mild Navier-Stokes experiments on periodic grids")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Points per axis.
    #[arg(long = "grid", global = true, default_value_t = 32)]
    pub n: usize,
    /// Spatial dimension (2 or 3).
    #[arg(long, global = true, default_value_t = 3)]
    pub dim: usize,
    /// Box side length.
    #[arg(long = "box", global = true, default_value_t = 2.0 * std::f64::consts::PI)]
    pub box_length: f64,
    /// Experiment configuration (JSON, `"clab_config": 1`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that the dyadic blocks sum to one on the grid spectrum.
    PartitionCheck,
    /// Besov norm of a CLF1 field (critical regularity unless `--s` is given).
    Norm(commands::NormArgs),
    /// Split a CLF1 field into a finite-energy part and a small subcritical part.
    Split(commands::SplitArgs),
    /// Power laws of both split parts over a range of thresholds.
    Sweep(commands::SweepArgs),
    /// Per-block heat decay rates against the annulus bounds.
    HeatVerify(commands::HeatArgs),
    /// Run a solver experiment and write archive, report and series.
    Solve(commands::SolveArgs),
    /// Apply the scaling `lambda u(x0 + lambda x, t0 + lambda^2 t)` to a field or archive.
    Rescale(commands::RescaleArgs),
    /// Pair a field with bumps concentrating at a point.
    Vanish(commands::VanishArgs),
    /// Diagnostics of an archived trajectory.
    Report(commands::ReportArgs),
}

/// Process exit statuses.
pub mod status {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const DIVERGENCE: u8 = 3;
    pub const GATE: u8 = 4;
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Divergence { .. } | Error::MaxIterations { .. } => status::DIVERGENCE,
        _ => status::VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { status::VALIDATION } else { status::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::PartitionCheck => commands::partition_check(g),
        Command::Norm(a) => commands::norm(g, a),
        Command::Split(a) => commands::split(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::HeatVerify(a) => commands::heat_verify(g, a),
        Command::Solve(a) => commands::solve(g, a),
        Command::Rescale(a) => commands::rescale(g, a),
        Command::Vanish(a) => commands::vanish(g, a),
        Command::Report(a) => commands::report(g, a),
    };
    match result {
        Ok(out) => {
            print!("{}", out.render(g.format));
            ExitCode::from(out.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Divergence { history, .. } | Error::MaxIterations { history, .. } = &e {
                eprintln!("iterate differences: {history:?}");
            }
            ExitCode::from(exit_code_for(&e))
        }
    }
}
