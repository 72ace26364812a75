//! `ellshape` command-line front end.
//!
//! JSON goes to stdout (or `--out`), a readable table to stderr. Exit codes:
//! 0 success, 2 bad input or arguments, 3 numeric failure, 4 optimizer did
//! not converge, 5 a `verify` oracle failed.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

mod commands;
mod config;

use commands::{DensityArgs, InputArgs, Report, TestArgs, VerifyArgs};
use config::{CommonArgs, RunConfig};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] ellshape::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) => core_code(e),
        }
    }
}

fn core_code(e: &ellshape::Error) -> u8 {
    use ellshape::Error::*;
    match e {
        Parse { .. } => 2,
        NonConvergence(_) => 4,
        Specimen { source, .. } => core_code(source),
        Domain(_) | Dimension(_) | Degenerate(_) | Truncation { .. } | Numeric(_) => 3,
    }
}

#[derive(Parser)]
#[command(
    name = "ellshape",
    version,
    about = "Elliptical shape densities, model fitting and testing for landmark data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// SVD shape coordinates (r, W, u, J(u)) of every specimen
    Shape(InputArgs),
    /// Log shape density of every specimen under the configured model
    Density(DensityArgs),
    /// Maximum-likelihood mean shape with BIC*
    Fit(InputArgs),
    /// Fit the Gaussian and Kotz T=2, T=3 models and grade their BIC* differences
    Compare(InputArgs),
    /// Likelihood-ratio test of equal mean shape for two groups
    Test(TestArgs),
    /// Normalization and simulation checks of the configured model
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Shape(_) => "shape",
            Command::Density(_) => "density",
            Command::Fit(_) => "fit",
            Command::Compare(_) => "compare",
            Command::Test(_) => "test",
            Command::Verify(_) => "verify",
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = RunConfig::resolve(&cli.common)?;
    let mut code = 0;
    let report: Report = match &cli.command {
        Command::Shape(a) => commands::shape(&cfg, a)?,
        Command::Density(a) => commands::density(&cfg, a)?,
        Command::Fit(a) => commands::fit(&cfg, a)?,
        Command::Compare(a) => commands::compare(&cfg, a)?,
        Command::Test(a) => commands::test(&cfg, a)?,
        Command::Verify(a) => {
            let (report, passed) = commands::verify(&cfg, a)?;
            if !passed {
                code = 5;
            }
            report
        }
    };
    if !report.converged {
        code = 4;
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cli.command.name(),
        "config": cfg,
        "results": report.results,
    });
    let text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize") + "\n";
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    eprint!("{}", report.table);
    if code == 4 {
        eprintln!("warning: at least one optimizer run did not converge");
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
