//! `dmetvqe circuit ...`: the compiler utilities on text input.

use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use dmetvqe_core::circuit::{exponentiate_sum, gate_stats, parallelize, parse_program, trotterize};
use dmetvqe_core::{PauliSum, TimeSlicedProgram};

/// Reads `source` as a path, or stdin for `-`.
pub fn read_input(source: &Path) -> Result<String> {
    if source == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        std::fs::read_to_string(source).with_context(|| format!("reading {}", source.display()))
    }
}

fn pauli_sum(text: &str, what: &str) -> Result<PauliSum> {
    text.trim().parse().with_context(|| format!("parsing {what}"))
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

pub fn exponentiate(expr: &str) -> Result<String> {
    let a = pauli_sum(expr, "the Pauli sum")?;
    Ok(with_newline(exponentiate_sum(&a)?.to_string()))
}

pub fn trotterize_text(a: &str, b: &str, order: u32, steps: usize) -> Result<String> {
    let a = pauli_sum(a, "A")?;
    let b = pauli_sum(b, "B")?;
    Ok(with_newline(trotterize(&a, &b, order, steps)?.to_string()))
}

pub fn parallelize_text(program: &str) -> Result<String> {
    let p = parse_program(program).context("parsing the program")?;
    Ok(with_newline(parallelize(&p).to_string()))
}

/// Accepts either time-sliced text or a plain program, which is scheduled first.
pub fn stats_text(input: &str) -> Result<String> {
    let sliced = input.lines().any(|l| l.trim_start().starts_with("Time Slice #"));
    let tp: TimeSlicedProgram = if sliced {
        input.parse().context("parsing the time-sliced program")?
    } else {
        parallelize(&parse_program(input).context("parsing the program")?)
    };
    Ok(format!("{}\n", gate_stats(&tp)))
}
