//! `dmetvqe`: energy tables for the half-filled Hubbard ring and a small
//! circuit toolbox.
//!
//! Exit status: 0 when every cell converged, 1 on configuration, input or
//! I/O errors, 2 on usage errors, 3 when some cell failed to converge.

mod cells;
mod circuit_cmd;
mod config;
mod experiments;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Defaults, FileConfig, Overrides, Settings};
use experiments::Report;

const EXIT_UNCONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "dmetvqe", version, about = "DMET with a UCCSD variational solver on a simulated quantum computer")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (also DMETVQE_THREADS).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory; results go to stdout when absent (also DMETVQE_OUT_DIR).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energies per site of the 4-site ring for every method and U.
    Table1 {
        /// Prepend a U=0 column.
        #[arg(long)]
        noninteracting: bool,
    },
    /// Whole-ring UCCSD over Trotter orders 1-2 and steps 1-4, with the exact line.
    TrotterScan,
    /// DMET with 1-, 2- and 4-site fragments on a long ring.
    Thermo {
        /// Wall-clock budget for the whole table, in seconds.
        #[arg(long, value_name = "SECS")]
        timeout_secs: Option<f64>,
    },
    /// One method (exact, uccsd or dmet) over the configured U values.
    Run,
    /// Circuit compiler utilities.
    #[command(subcommand)]
    Circuit(CircuitCommand),
}

#[derive(Debug, Subcommand)]
enum CircuitCommand {
    /// Program for exp(-i A) of a Pauli sum such as "2.0*X0*X1".
    Exponentiate {
        /// The sum, or `-` to read it from stdin.
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Trotterized program for exp(-i (A + B)).
    Trotterize {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(long, default_value_t = 1)]
        order: u32,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Schedule a program into time slices.
    Parallelize {
        /// Program file, or `-` for stdin.
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Slice count and mean one- and two-qubit gates per slice.
    Stats {
        /// Time-sliced listing or plain program, or `-` for stdin.
        #[arg(default_value = "-")]
        input: PathBuf,
    },
}

fn settings(cli: &Cli, defaults: Defaults, timeout_secs: Option<f64>) -> Result<Settings> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        threads: cli.threads,
        timeout_secs,
    };
    Settings::resolve(file, defaults, &overrides)
}

fn finish(report: Report, out_dir: Option<&Path>, name: &str) -> Result<ExitCode> {
    table::emit(&report.table.to_csv()?, out_dir, &format!("{name}.csv"))?;
    for p in &report.problems {
        eprintln!("warning: {name}: {p}");
    }
    Ok(if report.problems.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_UNCONVERGED)
    })
}

fn circuit(cli: &Cli, cmd: &CircuitCommand) -> Result<ExitCode> {
    // Validate any config even though the circuit tools take nothing from it.
    let s = settings(cli, experiments::run_defaults(), None)?;
    let (text, name) = match cmd {
        CircuitCommand::Exponentiate { expr } => {
            let expr = if expr == "-" { circuit_cmd::read_input(Path::new("-"))? } else { expr.clone() };
            (circuit_cmd::exponentiate(&expr)?, "exponentiate")
        }
        CircuitCommand::Trotterize { a, b, order, steps } => (circuit_cmd::trotterize_text(a, b, *order, *steps)?, "trotterize"),
        CircuitCommand::Parallelize { input } => (circuit_cmd::parallelize_text(&circuit_cmd::read_input(input)?)?, "parallelize"),
        CircuitCommand::Stats { input } => (circuit_cmd::stats_text(&circuit_cmd::read_input(input)?)?, "stats"),
    };
    table::emit(&text, s.out_dir.as_deref(), &format!("circuit_{name}.txt"))?;
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Table1 { noninteracting } => {
            let s = settings(cli, experiments::table1_defaults(), None)?;
            finish(experiments::table1(&s, *noninteracting)?, s.out_dir.as_deref(), "table1")
        }
        Command::TrotterScan => {
            let s = settings(cli, experiments::trotter_defaults(), None)?;
            finish(experiments::trotter_scan(&s)?, s.out_dir.as_deref(), "trotter_scan")
        }
        Command::Thermo { timeout_secs } => {
            let s = settings(cli, experiments::thermo_defaults(), *timeout_secs)?;
            finish(experiments::thermo(&s)?, s.out_dir.as_deref(), "thermo")
        }
        Command::Run => {
            let s = settings(cli, experiments::run_defaults(), None)?;
            finish(experiments::run(&s)?, s.out_dir.as_deref(), "run")
        }
        Command::Circuit(cmd) => circuit(cli, cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
