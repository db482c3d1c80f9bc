//! `sheet`: command-line experiments over the Brownian sheet library.
//!
//! Every subcommand prints one JSON result record. Exit status is 0 when the
//! quantitative check passes, 2 when it fails and 1 on any error.

mod commands;
mod config;
mod record;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::*;
use record::ResultRecord;

#[derive(Debug, Parser)]
#[command(name = "sheet", version, about = "Brownian sheet SDE and integration-by-parts experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a Brownian sheet on a grid.
    SampleSheet(SampleSheetArgs),
    /// List the integration-by-parts terms for a permutation.
    ExpandIbp(ExpandIbpArgs),
    /// Compare the direct expectation with the expanded one.
    VerifyIbp(VerifyIbpArgs),
    /// Check an estimate against the Davie-type or Gamma-function bound.
    VerifyBound(VerifyBoundArgs),
    /// Check the shuffle partition and the product identity.
    VerifyShuffle(VerifyShuffleArgs),
    /// Evaluate the singular simplex integral three ways.
    SimplexGamma(SimplexGammaArgs),
    /// Solve the plane SDE on one sampled sheet.
    SolveSde(SolveSdeArgs),
    /// Check the Malliavin derivative field.
    MalliavinCheck(MalliavinCheckArgs),
    /// Compare solver and reweighted expectations.
    GirsanovCheck(GirsanovCheckArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SampleSheet(a) => &a.common,
            Command::ExpandIbp(a) => &a.common,
            Command::VerifyIbp(a) => &a.common,
            Command::VerifyBound(a) => &a.common,
            Command::VerifyShuffle(a) => &a.common,
            Command::SimplexGamma(a) => &a.common,
            Command::SolveSde(a) => &a.common,
            Command::MalliavinCheck(a) => &a.common,
            Command::GirsanovCheck(a) => &a.common,
        }
    }

    fn run(&self) -> Result<ResultRecord> {
        match self {
            Command::SampleSheet(a) => sample_sheet(a),
            Command::ExpandIbp(a) => expand_ibp(a),
            Command::VerifyIbp(a) => verify_ibp(a),
            Command::VerifyBound(a) => verify_bound(a),
            Command::VerifyShuffle(a) => verify_shuffle(a),
            Command::SimplexGamma(a) => simplex_gamma(a),
            Command::SolveSde(a) => solve_sde(a),
            Command::MalliavinCheck(a) => malliavin_check(a),
            Command::GirsanovCheck(a) => girsanov_check(a),
        }
    }
}

fn execute() -> Result<ExitCode> {
    let args = config::expand_config(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            e.print()?;
            return Ok(if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS });
        }
    };
    let start = Instant::now();
    let mut record = cli.command.run()?;
    record.wall_time_s = start.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&record)?;
    if let Some(path) = &cli.command.common().json {
        std::fs::write(path, format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(if record.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    match execute() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
