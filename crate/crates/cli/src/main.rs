//! `embspec`: compare two embeddings of the same samples from the shell.
//!
//! Results go to stdout or `--out`; logs go to stderr (`-v` for more,
//! or `RUST_LOG`). Exit status: 0 success, 2 invalid input, 3 numerical
//! failure, 4 divergence, 5 failed certificate.

mod commands;
mod failure;
mod settings;

use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use commands::{AlignCmd, BandwidthCmd, CompareCmd, DiagnoseCmd, DiffCmd};

#[derive(Parser, Debug)]
#[command(name = "embspec", version, about = "Spectral comparison of two embeddings of the same samples")]
struct Cli {
    /// More log output on stderr; repeat for debug detail.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues and sample clusters of the kernel difference; writes a report.
    Compare(CompareCmd),
    /// Prints the spectral radius of the kernel difference.
    Diff(DiffCmd),
    /// Trains a linear map toward a reference embedding by gradient descent.
    AlignDemo(AlignCmd),
    /// Numerical certificates and cluster validation.
    #[command(subcommand)]
    Diagnose(DiagnoseCmd),
    /// Gaussian bandwidth reaching a target top covariance eigenvalue.
    Bandwidth(BandwidthCmd),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .init();

    let outcome = match cli.command {
        Command::Compare(c) => commands::cmd_compare(c),
        Command::Diff(c) => commands::cmd_diff(c),
        Command::AlignDemo(c) => commands::cmd_align_demo(c),
        Command::Diagnose(c) => commands::cmd_diagnose(c),
        Command::Bandwidth(c) => commands::cmd_bandwidth(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("embspec: {f}");
            f.exit_code()
        }
    }
}
