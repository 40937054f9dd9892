//! Pauli-string operators and the Jordan–Wigner fermion-to-qubit map.
//!
//! A [`PauliTerm`] is a complex coefficient times a tensor product of single-qubit
//! Pauli operators, stored sparsely (identity on absent qubits). A [`PauliSum`] is
//! a list of terms; [`PauliSum::simplify`] brings it into canonical form, where
//! terms are ordered by their factor maps and no two share the same factors.
//!
//! The text format follows the `2.0*X0*X1` style: the coefficient first, then
//! `*`-separated factors, and sums joined by ` + `.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::fermion::FermionSum;

/// Coefficients below this magnitude are dropped by [`PauliSum::simplified`].
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Product `self · other`, returned as a phase and the resulting label
    /// (`None` is the identity).
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Pauli) -> (Complex64, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (ONE, None),
            (X, Y) => (I, Some(Z)),
            (Y, X) => (-I, Some(Z)),
            (Y, Z) => (I, Some(X)),
            (Z, Y) => (-I, Some(X)),
            (Z, X) => (I, Some(Y)),
            (X, Z) => (-I, Some(Y)),
        }
    }

    pub fn label(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_label(c: char) -> Option<Pauli> {
        match c {
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A coefficient times a tensor product of Pauli operators.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    coefficient: Complex64,
    factors: BTreeMap<usize, Pauli>,
}

impl PauliTerm {
    /// Builds a term from `(qubit, label)` pairs. Repeated qubits are multiplied
    /// together left to right, so the result is always canonical.
    pub fn new<I>(coefficient: Complex64, factors: I) -> Self
    where
        I: IntoIterator<Item = (usize, Pauli)>,
    {
        factors
            .into_iter()
            .fold(PauliTerm::identity(coefficient), |acc, (q, p)| {
                acc.mul_term(&PauliTerm::single(ONE, q, p))
            })
    }

    pub fn identity(coefficient: Complex64) -> Self {
        PauliTerm {
            coefficient,
            factors: BTreeMap::new(),
        }
    }

    pub fn single(coefficient: Complex64, qubit: usize, pauli: Pauli) -> Self {
        let mut factors = BTreeMap::new();
        factors.insert(qubit, pauli);
        PauliTerm {
            coefficient,
            factors,
        }
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn factors(&self) -> &BTreeMap<usize, Pauli> {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// Qubits with a non-identity factor, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.factors.keys().next_back().copied()
    }

    pub fn with_coefficient(&self, coefficient: Complex64) -> Self {
        PauliTerm {
            coefficient,
            factors: self.factors.clone(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.with_coefficient(self.coefficient * s)
    }

    pub fn adjoint(&self) -> Self {
        self.with_coefficient(self.coefficient.conj())
    }

    /// Operator product `self · other` with the single-qubit phases folded into
    /// the coefficient.
    pub fn mul_term(&self, other: &PauliTerm) -> PauliTerm {
        let mut coefficient = self.coefficient * other.coefficient;
        let mut factors = self.factors.clone();
        for (&q, &p) in &other.factors {
            match factors.get(&q) {
                None => {
                    factors.insert(q, p);
                }
                Some(&lhs) => {
                    let (phase, out) = lhs.mul(p);
                    coefficient *= phase;
                    match out {
                        Some(l) => {
                            factors.insert(q, l);
                        }
                        None => {
                            factors.remove(&q);
                        }
                    }
                }
            }
        }
        PauliTerm {
            coefficient,
            factors,
        }
    }

    /// True when both terms act with the same Paulis on the same qubits.
    pub fn same_factors(&self, other: &PauliTerm) -> bool {
        self.factors == other.factors
    }

    /// Whether the two Pauli strings commute (coefficients ignored).
    pub fn commutes_with(&self, other: &PauliTerm) -> bool {
        let anti = self
            .factors
            .iter()
            .filter(|(q, p)| other.factors.get(q).is_some_and(|o| o != *p))
            .count();
        anti % 2 == 0
    }
}

/// Free-function form of [`PauliTerm::mul_term`].
pub fn term_multiply(a: &PauliTerm, b: &PauliTerm) -> PauliTerm {
    a.mul_term(b)
}

/// A weighted sum of Pauli strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliSum {
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero() -> Self {
        PauliSum { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<PauliTerm>) -> Self {
        PauliSum { terms }
    }

    pub fn identity(coefficient: Complex64) -> Self {
        PauliSum::from_terms(vec![PauliTerm::identity(coefficient)])
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<PauliTerm> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: PauliTerm) {
        self.terms.push(term);
    }

    /// Number of qubits needed to hold every factor.
    pub fn n_qubits(&self) -> usize {
        self.terms
            .iter()
            .filter_map(PauliTerm::max_qubit)
            .max()
            .map_or(0, |q| q + 1)
    }

    /// Merges terms with identical factor maps, drops coefficients with
    /// magnitude below `drop_tol` and sorts terms canonically.
    pub fn simplify(&self, drop_tol: f64) -> PauliSum {
        let mut merged: BTreeMap<&BTreeMap<usize, Pauli>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(&t.factors).or_default() += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= drop_tol)
            .map(|(f, c)| PauliTerm {
                coefficient: c,
                factors: f.clone(),
            })
            .collect();
        PauliSum { terms }
    }

    /// [`simplify`](Self::simplify) with [`DEFAULT_DROP_TOL`].
    pub fn simplified(&self) -> PauliSum {
        self.simplify(DEFAULT_DROP_TOL)
    }

    pub fn scale(&self, s: Complex64) -> PauliSum {
        PauliSum::from_terms(self.terms.iter().map(|t| t.scale(s)).collect())
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum::from_terms(self.terms.iter().map(PauliTerm::adjoint).collect())
    }

    /// Product of two sums, simplified.
    pub fn mul_sum(&self, other: &PauliSum) -> PauliSum {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push(a.mul_term(b));
            }
        }
        PauliSum::from_terms(out).simplified()
    }

    /// `self == other` after simplification, coefficients compared to `tol`.
    pub fn approx_eq(&self, other: &PauliSum, tol: f64) -> bool {
        (self - other).simplify(tol).is_empty()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.approx_eq(&self.adjoint(), tol)
    }

    /// True when every coefficient's imaginary part is below `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| t.coefficient.im.abs() < tol)
    }
}

/// `[a, b] = ab − ba`, simplified.
pub fn commutator(a: &PauliSum, b: &PauliSum) -> PauliSum {
    // Terms that commute contribute nothing; anticommuting ones contribute 2ab.
    let mut out = Vec::new();
    for x in a.terms() {
        for y in b.terms() {
            if !x.commutes_with(y) {
                out.push(x.mul_term(y).scale(Complex64::new(2.0, 0.0)));
            }
        }
    }
    PauliSum::from_terms(out).simplified()
}

impl From<PauliTerm> for PauliSum {
    fn from(t: PauliTerm) -> Self {
        PauliSum::from_terms(vec![t])
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    fn add(self, rhs: &PauliSum) -> PauliSum {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        PauliSum { terms }
    }
}

impl Add for PauliSum {
    type Output = PauliSum;
    fn add(mut self, rhs: PauliSum) -> PauliSum {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;
    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self + &(-rhs)
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;
    fn neg(self) -> PauliSum {
        self.scale(-ONE)
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.mul_sum(rhs)
    }
}

// --- Jordan–Wigner -------------------------------------------------------

fn jw_ladder(p: usize, sign: f64) -> PauliSum {
    let z_string = (0..p).map(|q| (q, Pauli::Z));
    let x = PauliTerm::new(Complex64::new(0.5, 0.0), z_string.clone().chain([(p, Pauli::X)]));
    let y = PauliTerm::new(Complex64::new(0.0, 0.5 * sign), z_string.chain([(p, Pauli::Y)]));
    PauliSum::from_terms(vec![x, y])
}

/// Image of the creation operator `a†_p`: `Z_0 … Z_{p-1} · ½(X_p − iY_p)`.
pub fn jw_raise(p: usize) -> PauliSum {
    jw_ladder(p, -1.0)
}

/// Image of the annihilation operator `a_p`: `Z_0 … Z_{p-1} · ½(X_p + iY_p)`.
pub fn jw_lower(p: usize) -> PauliSum {
    jw_ladder(p, 1.0)
}

/// Jordan–Wigner image of a fermionic sum; qubit index equals spin-orbital index.
pub fn jw_transform(f: &FermionSum) -> PauliSum {
    let mut acc = Vec::new();
    for term in f.terms() {
        let mut prod = PauliSum::identity(term.coefficient());
        for &(p, creation) in term.ops() {
            let image = if creation { jw_raise(p) } else { jw_lower(p) };
            prod = prod.mul_sum(&image);
        }
        acc.extend(prod.into_terms());
    }
    PauliSum::from_terms(acc).simplified()
}

// --- text format ---------------------------------------------------------

/// Shortest round-trip decimal, always carrying a fractional part (`4.0`, `-0.5`).
pub fn format_real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{x}");
    if s.contains(['.', 'e', 'E', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn format_coefficient(c: Complex64, tol: f64) -> String {
    if c.im.abs() < tol {
        format_real(c.re)
    } else {
        let sign = if c.im.is_sign_negative() { '-' } else { '+' };
        format!("({}{}{}j)", format_real(c.re), sign, format_real(c.im.abs()))
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_coefficient(self.coefficient, DEFAULT_DROP_TOL))?;
        for (q, p) in &self.factors {
            write!(f, "*{}{}", p.label(), q)?;
        }
        Ok(())
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0.0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Error from parsing Pauli-sum text; positions are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct PauliParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Complex64),
    Label(Pauli, usize),
    Ident,
    Plus,
    Minus,
    Star,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl<'a> Lexer<'a> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
        (line, column)
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> PauliParseError {
        let (line, column) = self.position(offset);
        PauliParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some((_, c)) = self.chars.next_if(|(_, c)| c.is_ascii_digit()) {
            s.push(c);
        }
        s
    }

    fn real(&mut self, start: usize) -> Result<f64, PauliParseError> {
        let mut s = self.digits();
        if self.chars.next_if(|(_, c)| *c == '.').is_some() {
            s.push('.');
            s.push_str(&self.digits());
        }
        if let Some((_, e)) = self.chars.next_if(|(_, c)| *c == 'e' || *c == 'E') {
            s.push(e);
            if let Some((_, sign)) = self.chars.next_if(|(_, c)| *c == '+' || *c == '-') {
                s.push(sign);
            }
            s.push_str(&self.digits());
        }
        s.parse::<f64>()
            .map_err(|_| self.error(start, format!("malformed number `{s}`")))
    }

    fn complex(&mut self, start: usize) -> Result<Complex64, PauliParseError> {
        self.skip_ws();
        let mut re_sign = 1.0;
        if let Some((_, c)) = self.chars.next_if(|(_, c)| *c == '+' || *c == '-') {
            if c == '-' {
                re_sign = -1.0;
            }
            self.skip_ws();
        }
        let first_at = self.chars.peek().map_or(self.src.len(), |(i, _)| *i);
        let first = re_sign * self.real(first_at)?;
        self.skip_ws();
        let mut value = Complex64::new(first, 0.0);
        if self.chars.next_if(|(_, c)| *c == 'j' || *c == 'i').is_some() {
            value = Complex64::new(0.0, first);
            self.skip_ws();
        } else if let Some((_, c)) = self.chars.next_if(|(_, c)| *c == '+' || *c == '-') {
            let sign = if c == '-' { -1.0 } else { 1.0 };
            self.skip_ws();
            let at = self.chars.peek().map_or(self.src.len(), |(i, _)| *i);
            let im = sign * self.real(at)?;
            self.skip_ws();
            if self.chars.next_if(|(_, c)| *c == 'j' || *c == 'i').is_none() {
                return Err(self.error(at, "expected `j` after imaginary part"));
            }
            value = Complex64::new(first, im);
            self.skip_ws();
        }
        if self.chars.next_if(|(_, c)| *c == ')').is_none() {
            return Err(self.error(start, "unclosed `(` in coefficient"));
        }
        Ok(value)
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok)>, PauliParseError> {
        self.skip_ws();
        let Some(&(at, c)) = self.chars.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '+' => {
                self.chars.next();
                Tok::Plus
            }
            '-' => {
                self.chars.next();
                Tok::Minus
            }
            '*' => {
                self.chars.next();
                Tok::Star
            }
            '(' => {
                self.chars.next();
                Tok::Num(self.complex(at)?)
            }
            c if c.is_ascii_digit() || c == '.' => Tok::Num(Complex64::new(self.real(at)?, 0.0)),
            'I' => {
                self.chars.next();
                self.skip_ws();
                self.digits();
                Tok::Ident
            }
            c => match Pauli::from_label(c) {
                Some(p) => {
                    self.chars.next();
                    self.skip_ws();
                    let d = self.digits();
                    let q = d
                        .parse::<usize>()
                        .map_err(|_| self.error(at, format!("missing qubit index after `{c}`")))?;
                    Tok::Label(p, q)
                }
                None => return Err(self.error(at, format!("unexpected character `{c}`"))),
            },
        };
        Ok(Some((at, tok)))
    }
}

fn tokenize(src: &str) -> Result<(Vec<(usize, Tok)>, Lexer<'_>), PauliParseError> {
    let mut lexer = Lexer {
        chars: src.char_indices().peekable(),
        src,
    };
    let mut toks = Vec::new();
    while let Some(t) = lexer.next_token()? {
        toks.push(t);
    }
    Ok((toks, lexer))
}

impl FromStr for PauliSum {
    type Err = PauliParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (toks, lexer) = tokenize(s)?;
        if toks.is_empty() {
            return Err(lexer.error(s.len(), "empty Pauli sum"));
        }
        let mut terms = Vec::new();
        let mut i = 0;
        let mut sign = 1.0;
        let mut expect_operand = true;
        let mut current: Option<PauliTerm> = None;
        while i < toks.len() {
            let (at, ref tok) = toks[i];
            match tok {
                Tok::Plus | Tok::Minus if expect_operand && current.is_none() => {
                    if *tok == Tok::Minus {
                        sign = -sign;
                    }
                }
                Tok::Plus | Tok::Minus => {
                    if expect_operand {
                        return Err(lexer.error(at, "expected a factor"));
                    }
                    let t = current.take().expect("term in progress");
                    terms.push(t.scale(Complex64::new(sign, 0.0)));
                    sign = if *tok == Tok::Minus { -1.0 } else { 1.0 };
                    expect_operand = true;
                }
                Tok::Star => {
                    if expect_operand {
                        return Err(lexer.error(at, "unexpected `*`"));
                    }
                    expect_operand = true;
                }
                Tok::Num(_) | Tok::Label(..) | Tok::Ident => {
                    if !expect_operand {
                        return Err(lexer.error(at, "expected `*`, `+` or `-`"));
                    }
                    let factor = match tok {
                        Tok::Num(c) => PauliTerm::identity(*c),
                        Tok::Label(p, q) => PauliTerm::single(ONE, *q, *p),
                        _ => PauliTerm::identity(ONE),
                    };
                    current = Some(match current {
                        None => factor,
                        Some(t) => t.mul_term(&factor),
                    });
                    expect_operand = false;
                }
            }
            i += 1;
        }
        match current {
            Some(t) if !expect_operand => terms.push(t.scale(Complex64::new(sign, 0.0))),
            _ => return Err(lexer.error(s.len(), "unexpected end of input")),
        }
        Ok(PauliSum::from_terms(terms))
    }
}

impl FromStr for PauliTerm {
    type Err = PauliParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sum: PauliSum = s.parse()?;
        let mut terms = sum.into_terms();
        if terms.len() != 1 {
            return Err(PauliParseError {
                line: 1,
                column: 1,
                message: format!("expected a single term, found {}", terms.len()),
            });
        }
        Ok(terms.pop().expect("one term"))
    }
}
