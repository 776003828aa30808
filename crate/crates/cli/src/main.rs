//! `distill`: command-line front end for the distillation toolkit.
//!
//! Exit codes: 0 on success, 2 on a validation error, 3 when a numerical
//! iteration did not converge.

// Parameter checks are written as `!(x > 0.0)` so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod emit;
mod figures;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use distill_core::DistillError;
use serde_json::json;

use crate::commands::{Context, Status};
use crate::config::{
    resolve_seed, BoundsArgs, ConfigFile, FixedPointArgs, MontecarloArgs, ScanArgs, SteeringArgs, TraceArgs,
};
use crate::emit::Emit;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "distill", version, about = "Entanglement distillation recurrences, fixed points and bounds")]
struct Cli {
    /// TOML configuration file with one section per command (JSON when named *.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the random streams; overrides DISTILL_SEED and the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format [default: json for single results, csv for series].
    #[arg(long, global = true, value_enum)]
    emit: Option<Emit>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate a recurrence to its fixed point and report its stability.
    FixedPoint(FixedPointArgs),
    /// Fixed points, Jacobian radii and convergence slopes over a noise grid.
    Scan(ScanArgs),
    /// Evaluate a confidentiality, reduction or robustness bound.
    Bounds(BoundsArgs),
    /// Audit the product-form inequality on sampled four-qubit states.
    SteeringAudit(SteeringArgs),
    /// Seeded Monte Carlo campaign of the full protocol against an honest channel.
    Montecarlo(MontecarloArgs),
    /// Per-round states of a recurrence.
    Trace(TraceArgs),
    /// Regenerate the data behind a standard plot.
    Figure {
        #[arg(value_enum)]
        name: figures::Figure,
    },
}

fn run(cli: Cli) -> Result<Status> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = resolve_seed(cli.seed, file.seed)?;
    let ctx = Context { out: cli.out, emit: cli.emit, seed, file };
    match &cli.command {
        Command::FixedPoint(a) => commands::fixed_point(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a),
        Command::Bounds(a) => commands::bounds(&ctx, a),
        Command::SteeringAudit(a) => commands::steering_audit(&ctx, a),
        Command::Montecarlo(a) => commands::montecarlo(&ctx, a),
        Command::Trace(a) => commands::trace_cmd(&ctx, a),
        Command::Figure { name } => {
            let config = json!({ "figure": name });
            eprintln!("distill figure: seed = {seed}");
            eprintln!("distill figure: config = {config}");
            commands::emit_figure(&ctx, &config, figures::emit(*name)?)
        }
    }
}

/// Exit code of a failed run.
fn exit_code(e: &anyhow::Error) -> u8 {
    let no_convergence = e.chain().any(|c| matches!(c.downcast_ref::<DistillError>(), Some(DistillError::NoConvergence { .. })));
    if no_convergence {
        EXIT_NO_CONVERGENCE
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    // argument errors exit with code 2 through clap
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("distill: iteration did not converge");
            ExitCode::from(EXIT_NO_CONVERGENCE)
        }
        Err(e) => {
            eprintln!("distill: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
