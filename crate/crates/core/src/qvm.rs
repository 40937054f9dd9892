//! Statevector simulator. Qubit `q` is bit `q` of the basis-state index.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Gate, Program};
use crate::pauli::{Pauli, PauliSum, PauliTerm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QvmError {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("shot count must be positive")]
    NoShots,
    #[error("register of {0} qubits is too large to simulate")]
    TooManyQubits(usize),
}

const MAX_QUBITS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self, QvmError> {
        if n_qubits > MAX_QUBITS {
            return Err(QvmError::TooManyQubits(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        assert!(amplitudes.len().is_power_of_two(), "amplitude count must be 2^n");
        let n_qubits = amplitudes.len().trailing_zeros() as usize;
        StateVector { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check(&self, q: usize) -> Result<(), QvmError> {
        if q >= self.n_qubits {
            Err(QvmError::QubitOutOfRange {
                qubit: q,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies a 2×2 unitary `[[a, b], [c, d]]` to qubit `q`.
    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let j = i | bit;
                let (x, y) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = m[0][0] * x + m[0][1] * y;
                self.amplitudes[j] = m[1][0] * x + m[1][1] * y;
            }
        }
    }

    pub fn apply(&mut self, g: &Gate) -> Result<(), QvmError> {
        for q in g.qubits() {
            self.check(q)?;
        }
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match *g {
            Gate::X(q) => {
                let bit = 1usize << q;
                for k in 0..self.amplitudes.len() {
                    if k & bit == 0 {
                        self.amplitudes.swap(k, k | bit);
                    }
                }
            }
            Gate::Y(q) => self.apply_1q(q, [[zero, -i], [i, zero]]),
            Gate::Z(q) => {
                let bit = 1usize << q;
                for (k, a) in self.amplitudes.iter_mut().enumerate() {
                    if k & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            Gate::H(q) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            Gate::Rx(theta, q) => {
                let (s, c) = (0.5 * theta).sin_cos();
                let c = Complex64::new(c, 0.0);
                let mis = Complex64::new(0.0, -s);
                self.apply_1q(q, [[c, mis], [mis, c]]);
            }
            Gate::Rz(theta, q) => {
                let bit = 1usize << q;
                let lo = Complex64::from_polar(1.0, -0.5 * theta);
                let hi = lo.conj();
                for (k, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if k & bit == 0 { lo } else { hi };
                }
            }
            Gate::Cnot(c, t) => {
                let (cb, tb) = (1usize << c, 1usize << t);
                for k in 0..self.amplitudes.len() {
                    if k & cb != 0 && k & tb == 0 {
                        self.amplitudes.swap(k, k | tb);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_program(&mut self, p: &Program) -> Result<(), QvmError> {
        for g in p.instructions() {
            self.check(g.max_qubit())?;
        }
        for g in p.instructions() {
            self.apply(g)?;
        }
        Ok(())
    }

    /// `P|ψ⟩` for a single Pauli string (coefficient included).
    pub fn apply_pauli_term(&self, term: &PauliTerm) -> Result<StateVector, QvmError> {
        let (x, z, ny) = masks(term);
        if let Some(q) = term.max_qubit() {
            self.check(q)?;
        }
        let phase = term.coefficient() * i_pow(ny);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (b, a) in self.amplitudes.iter().enumerate() {
            let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[b ^ x] += phase * sign * a;
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amplitudes: out,
        })
    }

    /// Applies `e^{−iθP}` in place, where `P` is the Pauli string of `term`
    /// (its coefficient is ignored). Same result as the gate circuit from
    /// `exponentiate_term` for coefficient `θ`, up to the dropped global phase
    /// of identity strings.
    pub fn apply_pauli_rotation(&mut self, term: &PauliTerm, theta: f64) -> Result<(), QvmError> {
        if let Some(q) = term.max_qubit() {
            self.check(q)?;
        } else {
            return Ok(());
        }
        let (x, z, ny) = masks(term);
        let base = i_pow(ny);
        let (cos, sin) = (theta.cos(), theta.sin());
        let minus_i_sin = Complex64::new(0.0, -sin);
        // ph(b) with P|b⟩ = ph(b)|b ⊕ x⟩.
        let ph = |b: usize| if (b & z).count_ones().is_multiple_of(2) { base } else { -base };
        let amps = &mut self.amplitudes;
        if x == 0 {
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= cos + minus_i_sin * ph(b);
            }
            return Ok(());
        }
        let high = 1usize << (usize::BITS - 1 - x.leading_zeros());
        for b in 0..amps.len() {
            if b & high != 0 {
                continue;
            }
            let c = b ^ x;
            let (ab, ac) = (amps[b], amps[c]);
            amps[b] = ab * cos + minus_i_sin * ph(c) * ac;
            amps[c] = ac * cos + minus_i_sin * ph(b) * ab;
        }
        Ok(())
    }

    /// Probability of each basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Bit masks of X/Y and Z/Y factors, plus the number of Y factors.
fn masks(term: &PauliTerm) -> (usize, usize, u32) {
    let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
    for (&q, &p) in term.factors() {
        match p {
            Pauli::X => x |= 1 << q,
            Pauli::Y => {
                x |= 1 << q;
                z |= 1 << q;
                ny += 1;
            }
            Pauli::Z => z |= 1 << q,
        }
    }
    (x, z, ny)
}

/// Executes `p` on `|0…0⟩`.
pub fn run(p: &Program, n_qubits: usize) -> Result<StateVector, QvmError> {
    let mut s = StateVector::zero_state(n_qubits)?;
    s.apply_program(p)?;
    Ok(s)
}

/// `⟨s|P|s⟩` for one Pauli string, without the coefficient.
fn string_expectation(s: &StateVector, x: usize, z: usize, ny: u32) -> Complex64 {
    let amps = &s.amplitudes;
    let mut acc = Complex64::new(0.0, 0.0);
    if x == 0 {
        for (b, a) in amps.iter().enumerate() {
            let w = a.norm_sqr();
            if (b & z).count_ones().is_multiple_of(2) {
                acc.re += w;
            } else {
                acc.re -= w;
            }
        }
        return acc * i_pow(ny);
    }
    for (b, a) in amps.iter().enumerate() {
        let v = amps[b ^ x].conj() * a;
        if (b & z).count_ones().is_multiple_of(2) {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc * i_pow(ny)
}

/// `⟨s|h|s⟩` for Hermitian `h`.
pub fn expectation(s: &StateVector, h: &PauliSum) -> Result<f64, QvmError> {
    let simplified = h.simplify(0.0);
    let err = (&simplified - &simplified.adjoint())
        .simplify(0.0)
        .terms()
        .iter()
        .map(|t| t.coefficient().norm())
        .fold(0.0, f64::max);
    if err > 1e-10 {
        return Err(QvmError::NotHermitian(err));
    }
    if let Some(q) = simplified.terms().iter().filter_map(|t| t.max_qubit()).max() {
        s.check(q)?;
    }
    Ok(expectation_unchecked(s, &simplified))
}

/// [`expectation`] without the Hermiticity and range checks, for hot loops
/// over an operator validated once by the caller.
pub fn expectation_unchecked(s: &StateVector, h: &PauliSum) -> f64 {
    h.terms()
        .iter()
        .map(|t| {
            let (x, z, ny) = masks(t);
            (t.coefficient() * string_expectation(s, x, z, ny)).re
        })
        .sum()
}

/// Z-basis measurement outcomes. Bitstrings are printed with qubit 0 leftmost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotRecord {
    pub counts: BTreeMap<String, usize>,
    pub seed: u64,
}

impl ShotRecord {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

fn bitstring(index: usize, n: usize) -> String {
    (0..n).map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

/// Draws `shots` samples from the Born distribution with a seeded ChaCha RNG.
pub fn sample_z(s: &StateVector, shots: usize, seed: u64) -> Result<ShotRecord, QvmError> {
    if shots == 0 {
        return Err(QvmError::NoShots);
    }
    let dist = WeightedIndex::new(s.probabilities()).expect("state has positive norm");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0usize; s.amplitudes.len()];
    for _ in 0..shots {
        hist[dist.sample(&mut rng)] += 1;
    }
    let counts = hist
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(k, c)| (bitstring(k, s.n_qubits), c))
        .collect();
    Ok(ShotRecord { counts, seed })
}
