//! Spin-adapted UCCSD ansatz, MP2 starting amplitudes and the variational loop.
//!
//! Spatial orbitals `0..n_occ` are occupied in the reference. Amplitudes are
//! laid out as `[singles; paired doubles; mixed doubles]`, where singles and
//! paired doubles have one entry per `(virtual, occupied)` pair and mixed
//! doubles one per unordered pair of such pairs. Pairs are ordered with the
//! virtual index outermost.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{exponentiate_sum, trotterize_groups, CircuitError, Program};
use crate::fermion::{tensors_to_fermion_sum, FermionSum, FermionTerm, IntegralTensors};
use crate::optimize::{bfgs, BfgsOptions};
use crate::pauli::{jw_lower, jw_raise, jw_transform, PauliSum, PauliTerm};
use crate::qvm::{expectation, expectation_unchecked, run, QvmError, StateVector};
use crate::rdm::{spin_block, RdmPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VqeError {
    #[error("expected {expected} amplitudes, got {found}")]
    AmplitudeCount { expected: usize, found: usize },
    #[error("{electrons} electrons cannot form a closed shell in {orbitals} orbitals")]
    BadOccupation { electrons: usize, orbitals: usize },
    #[error("generator has an imaginary Pauli coefficient of size {0:.3e}")]
    ComplexGenerator(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Qvm(#[from] QvmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UccsdAnsatz {
    pub n_orbitals: usize,
    pub n_occ: usize,
    pub trotter_order: u32,
    pub trotter_steps: usize,
}

impl UccsdAnsatz {
    pub fn new(n_orbitals: usize, n_electrons: usize, trotter_order: u32, trotter_steps: usize) -> Result<Self, VqeError> {
        if !n_electrons.is_multiple_of(2) || n_electrons > 2 * n_orbitals {
            return Err(VqeError::BadOccupation {
                electrons: n_electrons,
                orbitals: n_orbitals,
            });
        }
        if !(1..=2).contains(&trotter_order) {
            return Err(CircuitError::InvalidOrder(trotter_order).into());
        }
        if trotter_steps == 0 {
            return Err(CircuitError::InvalidSteps.into());
        }
        Ok(UccsdAnsatz {
            n_orbitals,
            n_occ: n_electrons / 2,
            trotter_order,
            trotter_steps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        2 * self.n_occ
    }

    /// `(virtual, occupied)` spatial pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (self.n_occ..self.n_orbitals)
            .flat_map(|a| (0..self.n_occ).map(move |i| (a, i)))
            .collect()
    }

    pub fn n_singles(&self) -> usize {
        self.n_occ * (self.n_orbitals - self.n_occ)
    }

    pub fn n_amplitudes(&self) -> usize {
        let ns = self.n_singles();
        2 * ns + ns * ns.saturating_sub(1) / 2
    }

    /// Reference determinant: the lowest `n_occ` orbitals of both spins.
    pub fn reference(&self) -> u64 {
        (1u64 << (2 * self.n_occ)) - 1
    }

    fn check(&self, theta: &[f64]) -> Result<(), VqeError> {
        if theta.len() != self.n_amplitudes() {
            return Err(VqeError::AmplitudeCount {
                expected: self.n_amplitudes(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// Unit-amplitude generators. Entry `k` belongs to amplitude `k` and holds
    /// one anti-Hermitian `τ − τ†` per fermionic excitation it drives.
    fn unit_generators(&self) -> Vec<UnitGenerator> {
        let so = |p: usize, s: usize| 2 * p + s;
        let anti = |ops: Vec<(usize, bool)>| {
            let t = FermionTerm::new(Complex64::new(1.0, 0.0), ops);
            let adj = t.adjoint();
            let neg = FermionTerm::new(-adj.coefficient(), adj.ops().to_vec());
            FermionSum::from_terms(vec![t, neg])
        };
        let pairs = self.pairs();
        let mut out = Vec::with_capacity(self.n_amplitudes());
        for &(a, i) in &pairs {
            let pieces = (0..2).map(|sigma| anti(vec![(so(a, sigma), true), (so(i, sigma), false)]));
            out.push(UnitGenerator {
                double: false,
                pieces: pieces.collect(),
            });
        }
        for &(a, i) in &pairs {
            let pieces = (0..2).map(|this| {
                let other = 1 - this;
                anti(vec![
                    (so(a, this), true),
                    (so(i, this), false),
                    (so(a, other), true),
                    (so(i, other), false),
                ])
            });
            out.push(UnitGenerator {
                double: true,
                pieces: pieces.collect(),
            });
        }
        for x in 0..pairs.len() {
            for y in x + 1..pairs.len() {
                let ((p, q), (r, s)) = (pairs[x], pairs[y]);
                let pieces = (0..2)
                    .flat_map(|sa| (0..2).map(move |sb| (sa, sb)))
                    .map(|(sa, sb)| anti(vec![(so(p, sa), true), (so(q, sa), false), (so(r, sb), true), (so(s, sb), false)]));
                out.push(UnitGenerator {
                    double: true,
                    pieces: pieces.collect(),
                });
            }
        }
        out
    }
}

struct UnitGenerator {
    double: bool,
    pieces: Vec<FermionSum>,
}

impl UnitGenerator {
    fn sum(&self) -> FermionSum {
        let mut s = FermionSum::zero();
        for p in &self.pieces {
            s.extend(p.clone());
        }
        s
    }
}

/// X gates on every occupied qubit.
pub fn reference_program(occupation: u64) -> Program {
    let mut p = Program::new();
    for q in 0..64 {
        if occupation >> q & 1 == 1 {
            p.push(crate::circuit::Gate::X(q));
        }
    }
    p
}

/// Singles and doubles parts of `T(θ) − T(θ)†`.
pub fn cluster_parts(theta: &[f64], ansatz: &UccsdAnsatz) -> Result<(FermionSum, FermionSum), VqeError> {
    ansatz.check(theta)?;
    let mut parts = (FermionSum::zero(), FermionSum::zero());
    for (g, &t) in ansatz.unit_generators().iter().zip(theta) {
        if t != 0.0 {
            let part = if g.double { &mut parts.1 } else { &mut parts.0 };
            part.extend(g.sum().scale(t.into()));
        }
    }
    Ok(parts)
}

/// Full anti-Hermitian cluster generator.
pub fn cluster_generator(theta: &[f64], ansatz: &UccsdAnsatz) -> Result<FermionSum, VqeError> {
    let (mut s, d) = cluster_parts(theta, ansatz)?;
    s.extend(d);
    Ok(s)
}

/// `i·JW(g)` for an anti-Hermitian `g`: a real Pauli combination `A` with `e^{g} = e^{−iA}`.
fn hermitian_exponent(g: &PauliSum) -> Result<PauliSum, VqeError> {
    let a = g.scale(Complex64::new(0.0, 1.0)).simplify(0.0);
    let worst = a.terms().iter().map(|t| t.coefficient().im.abs()).fold(0.0, f64::max);
    if worst > 1e-10 {
        return Err(VqeError::ComplexGenerator(worst));
    }
    Ok(PauliSum::from_terms(
        a.terms().iter().map(|t| t.with_coefficient(t.coefficient().re.into())).collect(),
    ))
}

/// Pauli strings of one excitation, in canonical order, each with its
/// coefficient as a sparse linear form in the amplitudes.
#[derive(Debug, Clone)]
struct RotationGroup {
    strings: Vec<PauliTerm>,
    weights: Vec<Vec<(usize, f64)>>,
}

/// One factor of the Trotter split as a sequence of excitation groups.
///
/// The strings of a single excitation commute and their product is the exact
/// exponential of a particle-conserving operator. Keeping each group
/// contiguous therefore conserves particle number; interleaving strings of
/// different excitations would not. Excitations with the same strings (the two
/// spin orderings of a paired double) share a group.
#[derive(Debug, Clone)]
struct LinearRotations {
    groups: Vec<RotationGroup>,
}

impl LinearRotations {
    /// `pieces` pairs an amplitude index with a unit excitation exponent.
    fn new(pieces: &[(usize, PauliSum)]) -> Self {
        let mut groups: Vec<RotationGroup> = Vec::new();
        for (k, piece) in pieces {
            let same = |g: &&mut RotationGroup| {
                g.strings.len() == piece.len()
                    && g.strings.iter().zip(piece.terms()).all(|(a, b)| a.same_factors(b))
            };
            match groups.iter_mut().find(|g| same(g)) {
                Some(g) => {
                    for (w, t) in g.weights.iter_mut().zip(piece.terms()) {
                        w.push((*k, t.coefficient().re));
                    }
                }
                None => groups.push(RotationGroup {
                    strings: piece.terms().iter().map(|t| t.with_coefficient(Complex64::new(1.0, 0.0))).collect(),
                    weights: piece.terms().iter().map(|t| vec![(*k, t.coefficient().re)]).collect(),
                }),
            }
        }
        LinearRotations { groups }
    }

    fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    fn coefficient(w: &[(usize, f64)], theta: &[f64]) -> f64 {
        w.iter().map(|&(k, x)| x * theta[k]).sum()
    }

    /// Exponents of the groups at amplitudes `theta`.
    fn sums(&self, theta: &[f64]) -> Vec<PauliSum> {
        self.groups
            .iter()
            .map(|g| {
                let terms = g.strings.iter().zip(&g.weights);
                PauliSum::from_terms(terms.map(|(p, w)| p.with_coefficient(Self::coefficient(w, theta).into())).collect())
            })
            .collect()
    }

    fn apply(&self, state: &mut StateVector, theta: &[f64], scale: f64) -> Result<(), QvmError> {
        for g in &self.groups {
            for (p, w) in g.strings.iter().zip(&g.weights) {
                state.apply_pauli_rotation(p, Self::coefficient(w, theta) * scale)?;
            }
        }
        Ok(())
    }
}

/// Excitation exponents grouped for Trotterization, cached so circuits and
/// states can be rebuilt cheaply.
#[derive(Debug, Clone)]
pub struct CompiledAnsatz {
    pub ansatz: UccsdAnsatz,
    singles: LinearRotations,
    doubles: LinearRotations,
}

impl CompiledAnsatz {
    pub fn new(ansatz: &UccsdAnsatz) -> Result<Self, VqeError> {
        let mut singles = Vec::new();
        let mut doubles = Vec::new();
        for (k, g) in ansatz.unit_generators().iter().enumerate() {
            let target = if g.double { &mut doubles } else { &mut singles };
            for piece in &g.pieces {
                target.push((k, hermitian_exponent(&jw_transform(piece))?));
            }
        }
        Ok(CompiledAnsatz {
            ansatz: ansatz.clone(),
            singles: LinearRotations::new(&singles),
            doubles: LinearRotations::new(&doubles),
        })
    }

    /// Reference preparation followed by the Trotterized cluster exponential.
    pub fn program(&self, theta: &[f64]) -> Result<Program, VqeError> {
        self.ansatz.check(theta)?;
        let mut p = reference_program(self.ansatz.reference());
        if self.singles.is_empty() && self.doubles.is_empty() {
            return Ok(p);
        }
        let (a, b) = (self.singles.sums(theta), self.doubles.sums(theta));
        p.append(&trotterize_groups(&a, &b, self.ansatz.trotter_order, self.ansatz.trotter_steps)?);
        Ok(p)
    }

    /// The state [`program`](Self::program) prepares, computed by applying its
    /// Pauli rotations directly.
    pub fn state(&self, theta: &[f64]) -> Result<StateVector, VqeError> {
        self.ansatz.check(theta)?;
        let n = self.ansatz.n_qubits();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[self.ansatz.reference() as usize] = Complex64::new(1.0, 0.0);
        let mut state = StateVector::from_amplitudes(amplitudes);
        if self.singles.is_empty() && self.doubles.is_empty() {
            return Ok(state);
        }
        let steps = self.ansatz.trotter_steps as f64;
        for _ in 0..self.ansatz.trotter_steps {
            match self.ansatz.trotter_order {
                1 => {
                    self.singles.apply(&mut state, theta, 1.0 / steps)?;
                    self.doubles.apply(&mut state, theta, 1.0 / steps)?;
                }
                _ => {
                    self.singles.apply(&mut state, theta, 0.5 / steps)?;
                    self.doubles.apply(&mut state, theta, 1.0 / steps)?;
                    self.singles.apply(&mut state, theta, 0.5 / steps)?;
                }
            }
        }
        Ok(state)
    }
    /// Reference implementation of [`state`](Self::state): runs the gate circuit.
    pub fn state_from_circuit(&self, theta: &[f64]) -> Result<StateVector, VqeError> {
        Ok(run(&self.program(theta)?, self.ansatz.n_qubits())?)
    }
}

/// Circuit preparing the UCCSD state for amplitudes `theta`.
pub fn ansatz_program(theta: &[f64], ansatz: &UccsdAnsatz) -> Result<Program, VqeError> {
    CompiledAnsatz::new(ansatz)?.program(theta)
}

/// Circuit for `e^{T(θ)}` as one exponential of the whole generator, without
/// the singles/doubles split. Used to compare Trotterized circuits.
pub fn untrotterized_program(theta: &[f64], ansatz: &UccsdAnsatz) -> Result<Program, VqeError> {
    let g = hermitian_exponent(&jw_transform(&cluster_generator(theta, ansatz)?))?;
    let mut p = reference_program(ansatz.reference());
    p.append(&exponentiate_sum(&g)?);
    Ok(p)
}

/// MP2 amplitudes in a basis whose reference orbitals have energies `eps`.
/// Singles start at zero; paired doubles take half the MP2 amplitude because
/// both spin orderings of the pair excitation carry the same parameter.
pub fn mp2_guess(ts: &IntegralTensors, eps: &[f64], ansatz: &UccsdAnsatz) -> Vec<f64> {
    let pairs = ansatz.pairs();
    let ns = pairs.len();
    let mut theta = vec![0.0; ansatz.n_amplitudes()];
    let amp = |p: usize, q: usize, r: usize, s: usize| -> f64 {
        let denom = eps[q] + eps[s] - eps[p] - eps[r];
        let v = ts.v2.get([p, r, q, s]);
        if denom.abs() < 1e-8 {
            if v != 0.0 {
                warn!("vanishing MP2 denominator for ({p},{q})({r},{s}); amplitude set to zero");
            }
            0.0
        } else {
            v / denom
        }
    };
    for (k, &(a, i)) in pairs.iter().enumerate() {
        theta[ns + k] = 0.5 * amp(a, i, a, i);
    }
    let mut k = 2 * ns;
    for x in 0..ns {
        for y in x + 1..ns {
            let ((p, q), (r, s)) = (pairs[x], pairs[y]);
            theta[k] = amp(p, q, r, s);
            k += 1;
        }
    }
    theta
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub rdms: RdmPair,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Largest asymmetry removed when symmetrizing the measured RDMs.
    pub rdm_asymmetry: f64,
}

/// Hamiltonian and ansatz bundled as an objective over amplitudes.
#[derive(Debug, Clone)]
pub struct VqeProblem {
    pub compiled: CompiledAnsatz,
    pub hamiltonian: PauliSum,
    pub constant: f64,
}

impl VqeProblem {
    pub fn new(ts: &IntegralTensors, constant: f64, ansatz: &UccsdAnsatz) -> Result<Self, VqeError> {
        let hamiltonian = jw_transform(&tensors_to_fermion_sum(ts));
        // Validates Hermiticity once; evaluations use the unchecked path.
        let probe = StateVector::zero_state(ansatz.n_qubits())?;
        expectation(&probe, &hamiltonian)?;
        Ok(VqeProblem {
            compiled: CompiledAnsatz::new(ansatz)?,
            hamiltonian,
            constant,
        })
    }

    pub fn ansatz(&self) -> &UccsdAnsatz {
        &self.compiled.ansatz
    }

    pub fn energy(&self, theta: &[f64]) -> Result<f64, VqeError> {
        let s = self.compiled.state(theta)?;
        Ok(expectation_unchecked(&s, &self.hamiltonian) + self.constant)
    }

    /// BFGS over the amplitudes from `theta0`.
    pub fn minimize(&self, theta0: &[f64], opts: &BfgsOptions) -> Result<VqeResult, VqeError> {
        self.ansatz().check(theta0)?;
        let f = |th: &[f64]| self.energy(th).expect("amplitude count checked");
        let r = bfgs(&f, theta0, opts);
        let state = self.compiled.state(&r.x)?;
        let energy = expectation_unchecked(&state, &self.hamiltonian) + self.constant;
        let (rdms, rdm_asymmetry) = measure_rdms(&state, self.ansatz().n_electrons())?;
        Ok(VqeResult {
            theta: r.x,
            energy,
            rdms,
            iterations: r.iterations,
            evaluations: r.evaluations,
            converged: r.converged,
            rdm_asymmetry,
        })
    }
}

fn ladder_product(ops: &[(usize, bool)]) -> PauliSum {
    let mut acc = PauliSum::identity(Complex64::new(1.0, 0.0));
    for &(p, dagger) in ops {
        let f = if dagger { jw_raise(p) } else { jw_lower(p) };
        acc = (&acc * &f).simplified();
    }
    acc
}

/// Real part of `⟨ψ|O|ψ⟩` through the Hermitian part of `O`.
fn measure_real(state: &StateVector, op: &PauliSum) -> f64 {
    let herm = (op + &op.adjoint()).scale(Complex64::new(0.5, 0.0)).simplified();
    expectation_unchecked(state, &herm)
}

/// `⟨a†_p a_q⟩` measured term by term.
pub fn measure_one_rdm(state: &StateVector) -> DMatrix<f64> {
    let n = state.n_qubits();
    let mut d = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let v = measure_real(state, &ladder_product(&[(p, true), (q, false)]));
            d[(p, q)] = v;
            d[(q, p)] = v;
        }
    }
    d
}

/// Measures every independent `⟨a†_i a†_j a_l a_k⟩`, fills the rest by
/// antisymmetry and contracts for the 1-RDM. Returns the RDMs and the largest
/// asymmetry removed by symmetrization.
pub fn measure_rdms(state: &StateVector, n_electrons: usize) -> Result<(RdmPair, f64), VqeError> {
    let n = state.n_qubits();
    let mut rdm = RdmPair::zeros(n);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    for &(i, j) in &pairs {
        for &(k, l) in &pairs {
            let op = ladder_product(&[(i, true), (j, true), (l, false), (k, false)]);
            let g = measure_real(state, &op);
            rdm.set_two(i, j, k, l, g);
            rdm.set_two(j, i, k, l, -g);
            rdm.set_two(i, j, l, k, -g);
            rdm.set_two(j, i, l, k, g);
        }
    }
    rdm.one = rdm.contract_two(n_electrons);
    let asym = rdm.symmetrize();
    if asym > 1e-8 {
        warn!("measured RDM asymmetry {asym:.3e}");
    }
    Ok((rdm, asym))
}

/// Expresses `ts` in the orbitals given by the columns of `r`.
pub fn rotate_tensors(ts: &IntegralTensors, r: &DMatrix<f64>) -> IntegralTensors {
    IntegralTensors::new(r.transpose() * &ts.h1 * r, ts.v2.transform(r, 1e-14), ts.basis)
}

/// Brings spin-orbital RDMs measured in the orbitals `r` back to the original basis.
pub fn rotate_rdms_back(rdms: &RdmPair, r: &DMatrix<f64>) -> RdmPair {
    rdms.transform(&spin_block(&r.transpose()))
}
