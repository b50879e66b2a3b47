//! Command-line front end: `solve2d`, `reduce`, `verify`, `ermakov` and
//! `bracket`. Exit codes are 0 on success, 1 on contract or configuration
//! errors and 2 when a verification verdict fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

use commands::{Check, ErmakovArgs, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "qbm",
    about = "Quantum Brownian motion master equation laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the master equation and write snapshots.
    Solve2d {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the reduced equation, reconstruct and check the 2D residual.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one verification and write its JSON verdict.
    Verify {
        #[arg(long, value_parser = ["conservation", "symmetry", "roundtrip", "reduction"])]
        what: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the Ermakov-Pinney equation and compare with Pinney's superposition.
    Ermakov {
        #[arg(long)]
        omega2: String,
        #[arg(long = "K", allow_negative_numbers = true)]
        k: f64,
        #[arg(long, allow_negative_numbers = true)]
        rho0: f64,
        #[arg(long, allow_negative_numbers = true)]
        drho0: f64,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, allow_negative_numbers = true)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the commutator table of a generator set.
    Bracket {
        #[arg(long)]
        set: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (program name first), dispatches and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONTRACT,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve2d { config, out } => commands::solve2d(config, out.as_deref()),
        Command::Reduce { config, out } => commands::reduce(config, out.as_deref()),
        Command::Verify { what, config, out } => {
            let check = Check::parse(what).expect("clap restricts the values");
            commands::verify(check, config, out.as_deref())
        }
        Command::Ermakov {
            omega2,
            k,
            rho0,
            drho0,
            t1,
            dt,
            out,
        } => {
            let args = ErmakovArgs {
                omega2: omega2.clone(),
                k: *k,
                rho0: *rho0,
                drho0: *drho0,
                t1: *t1,
                dt: *dt,
            };
            commands::ermakov(&args, out.as_deref())
        }
        Command::Bracket { set, config, out } => commands::bracket(set, config, out.as_deref()),
    };
    match result {
        Ok(Outcome::Passed) => EXIT_OK,
        Ok(Outcome::Failed) => {
            eprintln!("verification failed; see the JSON report in the output directory");
            EXIT_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONTRACT
        }
    }
}
