//! Gate-level programs: a serial instruction list with a line-oriented text
//! format, Pauli-term exponentiation, Trotter products and greedy time-slice
//! scheduling.
//!
//! Instruction syntax is `NAME[(param)] q [q2]`, e.g. `RZ(4.0) 1` or `CNOT 0 1`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::pauli::{format_real, Pauli, PauliSum, PauliTerm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("line {line}, column {column}: unknown gate `{name}`")]
    UnknownGate { line: usize, column: usize, name: String },
    #[error("line {line}, column {column}: `{name}` takes {expected}, got {found}")]
    Arity {
        line: usize,
        column: usize,
        name: String,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}, column {column}: malformed number `{text}`")]
    MalformedNumber {
        line: usize,
        column: usize,
        text: String,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("cannot exponentiate a term with complex coefficient {0}")]
    NonRealCoefficient(String),
    #[error("Trotter order must be 1 or 2, got {0}")]
    InvalidOrder(u32),
    #[error("Trotter steps must be at least 1")]
    InvalidSteps,
}

/// Native gate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(usize),
    Y(usize),
    Z(usize),
    H(usize),
    Rx(f64, usize),
    Rz(f64, usize),
    Cnot(usize, usize),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::X(_) => "X",
            Gate::Y(_) => "Y",
            Gate::Z(_) => "Z",
            Gate::H(_) => "H",
            Gate::Rx(..) => "RX",
            Gate::Rz(..) => "RZ",
            Gate::Cnot(..) => "CNOT",
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::H(q) | Gate::Rx(_, q) | Gate::Rz(_, q) => vec![q],
            Gate::Cnot(c, t) => vec![c, t],
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            Gate::Rx(a, _) | Gate::Rz(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot(..))
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx(a, q) => Gate::Rx(-a, q),
            Gate::Rz(a, q) => Gate::Rz(-a, q),
            g => g,
        }
    }

    pub fn max_qubit(&self) -> usize {
        self.qubits().into_iter().max().unwrap_or(0)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        if let Some(a) = self.param() {
            write!(f, "({})", format_real(a))?;
        }
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

/// Parses one instruction. `col0` is the 0-based column where `line` starts
/// in its source line; reported columns are 1-based.
fn parse_gate(line_no: usize, col0: usize, line: &str) -> Result<Gate, CircuitError> {
    let base = col0 + line.len() - line.trim_start().len();
    let line = line.trim();
    let col = |sub: &str| base + (sub.as_ptr() as usize - line.as_ptr() as usize) + 1;
    let head_end = line.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(line.len());
    let name = &line[..head_end];
    let mut rest = line[head_end..].trim_start();

    let mut param = None;
    if let Some(stripped) = rest.strip_prefix('(') {
        let close = stripped.find(')').ok_or_else(|| CircuitError::Syntax {
            line: line_no,
            column: col(rest),
            message: "unclosed parameter list".into(),
        })?;
        let text = stripped[..close].trim();
        let column = col(text);
        param = Some(text.parse::<f64>().map_err(|_| CircuitError::MalformedNumber {
            line: line_no,
            column,
            text: text.to_string(),
        })?);
        rest = stripped[close + 1..].trim_start();
    }

    let mut qubits = Vec::new();
    for tok in rest.split_whitespace() {
        let q = tok.parse::<usize>().map_err(|_| CircuitError::Syntax {
            line: line_no,
            column: col(tok),
            message: format!("bad qubit index `{tok}`"),
        })?;
        qubits.push(q);
    }

    let arity = |expected: &'static str| CircuitError::Arity {
        line: line_no,
        column: base + 1,
        name: name.to_string(),
        expected,
        found: format!(
            "{} qubit(s){}",
            qubits.len(),
            if param.is_some() { " and a parameter" } else { "" }
        ),
    };
    let one = |make: fn(usize) -> Gate| match (param, qubits.as_slice()) {
        (None, &[q]) => Ok(make(q)),
        _ => Err(arity("1 qubit and no parameter")),
    };
    let rot = |make: fn(f64, usize) -> Gate| match (param, qubits.as_slice()) {
        (Some(a), &[q]) => Ok(make(a, q)),
        _ => Err(arity("1 qubit and 1 parameter")),
    };
    match name {
        "X" => one(Gate::X),
        "Y" => one(Gate::Y),
        "Z" => one(Gate::Z),
        "H" => one(Gate::H),
        "RX" => rot(Gate::Rx),
        "RZ" => rot(Gate::Rz),
        "CNOT" => match (param, qubits.as_slice()) {
            (None, &[c, t]) if c != t => Ok(Gate::Cnot(c, t)),
            _ => Err(arity("2 distinct qubits and no parameter")),
        },
        other => Err(CircuitError::UnknownGate {
            line: line_no,
            column: base + 1,
            name: other.to_string(),
        }),
    }
}

/// A straight-line list of instructions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    instructions: Vec<Gate>,
}

impl Program {
    pub fn new() -> Self {
        Program::default()
    }

    pub fn from_gates(instructions: Vec<Gate>) -> Self {
        Program { instructions }
    }

    pub fn instructions(&self) -> &[Gate] {
        &self.instructions
    }

    pub fn push(&mut self, g: Gate) {
        self.instructions.push(g);
    }

    pub fn append(&mut self, other: &Program) {
        self.instructions.extend_from_slice(&other.instructions);
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Qubits needed to run the program.
    pub fn n_qubits(&self) -> usize {
        self.instructions
            .iter()
            .map(|g| g.max_qubit() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Program implementing the inverse unitary.
    pub fn inverse(&self) -> Program {
        Program::from_gates(self.instructions.iter().rev().map(Gate::inverse).collect())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, g) in self.instructions.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Program {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Program::new();
        for (k, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            p.push(parse_gate(k + 1, 0, line)?);
        }
        Ok(p)
    }
}

/// Parses a program; equivalent to `text.parse::<Program>()`.
pub fn parse_program(text: &str) -> Result<Program, CircuitError> {
    text.parse()
}

pub fn print_program(p: &Program) -> String {
    p.to_string()
}

/// Circuit for `exp(−i·c·P)` where `c` is the (real) coefficient of `term`,
/// up to global phase. Identity terms produce an empty program.
///
/// X factors are rotated with `H`, Y factors with `RX(π/2)`/`RX(−π/2)`; a CNOT
/// chain collects the parity on the highest qubit, which receives `RZ(2c)`.
pub fn exponentiate_term(term: &PauliTerm) -> Result<Program, CircuitError> {
    let c = term.coefficient();
    if c.im.abs() > 1e-12 {
        return Err(CircuitError::NonRealCoefficient(c.to_string()));
    }
    let mut p = Program::new();
    if term.is_identity() {
        return Ok(p);
    }
    let support: Vec<(usize, Pauli)> = term.factors().iter().map(|(&q, &l)| (q, l)).collect();

    let mut into_basis = Vec::new();
    for &(q, l) in &support {
        match l {
            Pauli::X => into_basis.push(Gate::H(q)),
            Pauli::Y => into_basis.push(Gate::Rx(FRAC_PI_2, q)),
            Pauli::Z => {}
        }
    }
    let ladder: Vec<Gate> = support.windows(2).map(|w| Gate::Cnot(w[0].0, w[1].0)).collect();
    let target = support.last().expect("non-identity term").0;

    for g in &into_basis {
        p.push(*g);
    }
    for g in &ladder {
        p.push(*g);
    }
    p.push(Gate::Rz(2.0 * c.re, target));
    for g in ladder.iter().rev() {
        p.push(*g);
    }
    for g in &into_basis {
        p.push(g.inverse());
    }
    Ok(p)
}

/// Product of [`exponentiate_term`] over the terms of `sum` in canonical order.
/// Zero-coefficient terms are kept so the circuit shape does not depend on values.
pub fn exponentiate_sum(sum: &PauliSum) -> Result<Program, CircuitError> {
    let mut p = Program::new();
    for t in sum.simplify(0.0).terms() {
        p.append(&exponentiate_term(t)?);
    }
    Ok(p)
}

/// Suzuki–Trotter circuit for `exp(−i(a + b))`.
///
/// Order 1 repeats `[e^{−ia/N}; e^{−ib/N}]` N times; order 2 repeats the
/// symmetric split `[e^{−ia/2N}; e^{−ib/N}; e^{−ia/2N}]`.
pub fn trotterize(a: &PauliSum, b: &PauliSum, order: u32, steps: usize) -> Result<Program, CircuitError> {
    trotterize_groups(std::slice::from_ref(a), std::slice::from_ref(b), order, steps)
}

/// [`trotterize`] with `a` and `b` each given as a list of groups. The
/// exponential of a factor is the product of its groups' exponentials in list
/// order, each group in canonical order.
pub fn trotterize_groups(a: &[PauliSum], b: &[PauliSum], order: u32, steps: usize) -> Result<Program, CircuitError> {
    if steps == 0 {
        return Err(CircuitError::InvalidSteps);
    }
    let n = steps as f64;
    let exp = |groups: &[PauliSum], scale: f64| -> Result<Program, CircuitError> {
        let mut p = Program::new();
        for g in groups {
            p.append(&exponentiate_sum(&g.scale(scale.into()))?);
        }
        Ok(p)
    };
    let block = match order {
        1 => {
            let mut blk = exp(a, 1.0 / n)?;
            blk.append(&exp(b, 1.0 / n)?);
            blk
        }
        2 => {
            let half = exp(a, 0.5 / n)?;
            let mut blk = half.clone();
            blk.append(&exp(b, 1.0 / n)?);
            blk.append(&half);
            blk
        }
        other => return Err(CircuitError::InvalidOrder(other)),
    };
    let mut p = Program::new();
    for _ in 0..steps {
        p.append(&block);
    }
    Ok(p)
}

/// Instructions grouped into slices of gates on pairwise-disjoint qubits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSlicedProgram {
    slices: Vec<Vec<Gate>>,
}

impl TimeSlicedProgram {
    pub fn from_slices(slices: Vec<Vec<Gate>>) -> Self {
        TimeSlicedProgram { slices }
    }

    pub fn slices(&self) -> &[Vec<Gate>] {
        &self.slices
    }

    pub fn flatten(&self) -> Program {
        Program::from_gates(self.slices.iter().flatten().copied().collect())
    }
}

/// Greedy earliest-slot schedule: every instruction lands in the slice right
/// after the latest earlier instruction that shares a qubit with it.
pub fn parallelize(p: &Program) -> TimeSlicedProgram {
    let mut ready: Vec<usize> = vec![0; p.n_qubits()];
    let mut slices: Vec<Vec<Gate>> = Vec::new();
    for g in p.instructions() {
        let qs = g.qubits();
        let slot = qs.iter().map(|&q| ready[q]).max().unwrap_or(0);
        if slot == slices.len() {
            slices.push(Vec::new());
        }
        slices[slot].push(*g);
        for q in qs {
            ready[q] = slot + 1;
        }
    }
    TimeSlicedProgram { slices }
}

const SLICE_LABEL_WIDTH: usize = 16;

impl fmt::Display for TimeSlicedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, slice) in self.slices.iter().enumerate() {
            for (j, g) in slice.iter().enumerate() {
                if !first {
                    writeln!(f)?;
                }
                first = false;
                let label = if j == 0 {
                    format!("Time Slice #{}:", k + 1)
                } else {
                    String::new()
                };
                write!(f, "{label:<width$}{g}", width = SLICE_LABEL_WIDTH.max(label.len() + 1))?;
            }
        }
        Ok(())
    }
}

impl FromStr for TimeSlicedProgram {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut slices: Vec<Vec<Gate>> = Vec::new();
        for (k, line) in s.lines().enumerate() {
            let mut body = line.trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix("Time Slice #") {
                let colon = rest.find(':').ok_or_else(|| CircuitError::Syntax {
                    line: k + 1,
                    column: line.len() - line.trim_start().len() + 1,
                    message: "missing `:` after slice number".into(),
                })?;
                slices.push(Vec::new());
                body = rest[colon + 1..].trim();
                if body.is_empty() {
                    continue;
                }
            }
            let slice = slices.last_mut().ok_or_else(|| CircuitError::Syntax {
                line: k + 1,
                column: 1,
                message: "instruction before the first time slice".into(),
            })?;
            let col0 = body.as_ptr() as usize - line.as_ptr() as usize;
            slice.push(parse_gate(k + 1, col0, body)?);
        }
        Ok(TimeSlicedProgram { slices })
    }
}

/// Slice count and mean gate counts per slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateStats {
    pub slices: usize,
    pub one_qubit_per_slice: f64,
    pub two_qubit_per_slice: f64,
}

impl fmt::Display for GateStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slices={} one_qubit_per_slice={:.4} two_qubit_per_slice={:.4}",
            self.slices, self.one_qubit_per_slice, self.two_qubit_per_slice
        )
    }
}

/// Means are reported as 0 for an empty program.
pub fn gate_stats(tp: &TimeSlicedProgram) -> GateStats {
    let n = tp.slices.len();
    let (one, two) = tp
        .slices
        .iter()
        .flatten()
        .fold((0usize, 0usize), |(o, t), g| if g.is_two_qubit() { (o, t + 1) } else { (o + 1, t) });
    let mean = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    GateStats {
        slices: n,
        one_qubit_per_slice: mean(one),
        two_qubit_per_slice: mean(two),
    }
}
