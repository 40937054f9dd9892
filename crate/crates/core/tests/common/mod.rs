//! Shared oracles, strategies and invariant checks for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use dmetvqe_core::circuit::{exponentiate_term, parallelize, trotterize};
use dmetvqe_core::dmet::{self, DmetConfig, Solver};
use dmetvqe_core::ed;
use dmetvqe_core::embedding::{build_basis, build_embedded_hamiltonian, DEFAULT_TOL};
use dmetvqe_core::fermion::{add_potential, hubbard_tensors, momentum_transform, tensors_to_fermion_sum};
use dmetvqe_core::meanfield;
use dmetvqe_core::optimize::{central_gradient, BfgsOptions};
use dmetvqe_core::pauli::{commutator, jw_lower, jw_raise, jw_transform, term_multiply};
use dmetvqe_core::qvm::expectation;
use dmetvqe_core::vqe::{UccsdAnsatz, VqeProblem};
use dmetvqe_core::{
    Boundary, Complex64, FermionSum, FermionTerm, FragmentSpec, Gate, IntegralTensors, Pauli, PauliSum, PauliTerm,
    Program, RdmPair, StateVector,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// --- dense oracles --------------------------------------------------------

/// Matrix of a Pauli sum on `n` qubits, built column by column.
pub fn dense(h: &PauliSum, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let s = basis_state(n, col);
        for t in h.terms() {
            let out = s.apply_pauli_term(t).expect("term fits the register");
            for (row, a) in out.amplitudes().iter().enumerate() {
                m[(row, col)] += *a;
            }
        }
    }
    m
}

pub fn basis_state(n: usize, index: usize) -> StateVector {
    let mut amps = vec![c(0.0); 1 << n];
    amps[index] = c(1.0);
    StateVector::from_amplitudes(amps)
}

/// Unitary of a program on `n` qubits.
pub fn unitary(p: &Program, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut s = basis_state(n, col);
        s.apply_program(p).expect("program fits the register");
        for (row, a) in s.amplitudes().iter().enumerate() {
            m[(row, col)] = *a;
        }
    }
    m
}

/// `exp(−iH)` from the eigendecomposition of a Hermitian matrix.
pub fn exp_minus_i(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lowest eigenvalues of the qubit Hamiltonian restricted to determinants with
/// `n_electrons` electrons and `2·Sz = two_sz` (even modes spin up).
pub fn qubit_sector_spectrum(h: &DMatrix<Complex64>, n_modes: usize, n_electrons: usize, two_sz: i64) -> Vec<f64> {
    let even = (0..n_modes).step_by(2).fold(0usize, |m, q| m | 1 << q);
    let idx: Vec<usize> = (0..1usize << n_modes)
        .filter(|&b| {
            let up = (b & even).count_ones() as i64;
            let down = (b & !even).count_ones() as i64;
            (up + down) as usize == n_electrons && up - down == two_sz
        })
        .collect();
    let block = DMatrix::from_fn(idx.len(), idx.len(), |r, s| h[(idx[r], idx[s])]);
    let mut ev: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Allowed `2·Sz` values for `n` electrons in `m` spatial orbitals.
pub fn spin_sectors(n: usize, m: usize) -> Vec<i64> {
    (0..=n)
        .filter(|&up| up <= m && n - up <= m)
        .map(|up| up as i64 - (n - up) as i64)
        .collect()
}

// --- strategies -----------------------------------------------------------

pub fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

pub fn complex_coeff() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

pub fn pauli_term(max_qubits: usize) -> impl Strategy<Value = PauliTerm> {
    (complex_coeff(), prop::collection::btree_map(0..max_qubits, pauli(), 0..=max_qubits))
        .prop_map(|(coef, f)| PauliTerm::new(coef, f))
}

pub fn pauli_sum(max_qubits: usize) -> impl Strategy<Value = PauliSum> {
    prop::collection::vec(pauli_term(max_qubits), 1..6).prop_map(PauliSum::from_terms)
}

/// Non-identity term with a real coefficient.
pub fn real_term(max_qubits: usize) -> impl Strategy<Value = PauliTerm> {
    (-2.0..2.0f64, prop::collection::btree_map(0..max_qubits, pauli(), 1..=max_qubits))
        .prop_map(|(coef, f)| PauliTerm::new(c(coef), f))
}

pub fn gate(n: usize) -> BoxedStrategy<Gate> {
    let angle = -2.0 * PI..2.0 * PI;
    let one = prop_oneof![
        (0..n).prop_map(Gate::X),
        (0..n).prop_map(Gate::Y),
        (0..n).prop_map(Gate::Z),
        (0..n).prop_map(Gate::H),
        (angle.clone(), 0..n).prop_map(|(a, q)| Gate::Rx(a, q)),
        (angle, 0..n).prop_map(|(a, q)| Gate::Rz(a, q)),
    ];
    if n < 2 {
        return one.boxed();
    }
    let cnot = (0..n, 1..n).prop_map(move |(ctl, d)| Gate::Cnot(ctl, (ctl + d) % n));
    prop_oneof![3 => one, 1 => cnot].boxed()
}

/// Register size together with a program on it.
pub fn program(max_qubits: usize, max_len: usize) -> impl Strategy<Value = (usize, Program)> {
    (1..=max_qubits).prop_flat_map(move |n| {
        prop::collection::vec(gate(n), 0..=max_len).prop_map(move |g| (n, Program::from_gates(g)))
    })
}

/// Normalized random state on `n` qubits.
pub fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1usize << n).prop_map(|v| {
        let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt().max(1e-12);
        StateVector::from_amplitudes(v.into_iter().map(|(a, b)| Complex64::new(a / norm, b / norm)).collect())
    })
}

pub fn gate_and_state(max_qubits: usize) -> impl Strategy<Value = (Gate, StateVector)> {
    (1..=max_qubits).prop_flat_map(|n| (gate(n), state(n)))
}

/// Two sums whose terms all commute: Z-strings seen through one fixed
/// per-qubit change of frame.
pub fn commuting_pair(max_qubits: usize) -> impl Strategy<Value = (usize, PauliSum, PauliSum)> {
    (1..=max_qubits).prop_flat_map(|n| {
        let frame = prop::collection::vec(pauli(), n);
        let string = || {
            (-1.5..1.5f64, prop::collection::btree_set(0..n, 1..=n))
                .prop_map(|(coef, qs)| (coef, qs.into_iter().collect::<Vec<_>>()))
        };
        let strings = || prop::collection::vec(string(), 1..4);
        (Just(n), frame, strings(), strings()).prop_map(|(n, frame, a, b)| {
            let build = |v: Vec<(f64, Vec<usize>)>| {
                PauliSum::from_terms(
                    v.into_iter()
                        .map(|(coef, qs)| PauliTerm::new(c(coef), qs.into_iter().map(|q| (q, frame[q]))))
                        .collect(),
                )
            };
            (n, build(a), build(b))
        })
    })
}

pub fn fermion_term(modes: usize) -> impl Strategy<Value = FermionTerm> {
    (complex_coeff(), prop::collection::vec((0..modes, any::<bool>()), 1..=4))
        .prop_map(|(coef, ops)| FermionTerm::new(coef, ops))
}

pub fn fermion_sum(modes: usize) -> impl Strategy<Value = FermionSum> {
    prop::collection::vec(fermion_term(modes), 1..5).prop_map(FermionSum::from_terms)
}

pub fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::AntiPeriodic), Just(Boundary::Open)]
}

pub fn ring_boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::AntiPeriodic)]
}

pub fn symmetric(n: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        (&m + m.transpose()) * 0.5
    })
}

/// Hubbard chain with a random one-body potential, `L ≤ max_sites`.
pub fn small_lattice(max_sites: usize) -> impl Strategy<Value = IntegralTensors> {
    (2..=max_sites).prop_flat_map(|l| {
        (0.2..1.5f64, 0.0..8.0f64, boundary(), symmetric(l, 0.5)).prop_map(move |(t, u, b, pot)| {
            let ts = hubbard_tensors(l, t, u, b).expect("valid lattice");
            add_potential(&ts, &pot).expect("matching size")
        })
    })
}

/// Parameters of an embedded problem: a closed-shell ring, U, fragment start
/// and size, and a small lattice potential.
#[derive(Debug, Clone)]
pub struct EmbeddingCase {
    pub sites: usize,
    pub boundary: Boundary,
    pub interaction: f64,
    pub start: usize,
    pub fragment: usize,
    pub potential: DMatrix<f64>,
}

impl EmbeddingCase {
    fn fragment(&self) -> Result<FragmentSpec, String> {
        let sites = (self.start..self.start + self.fragment).map(|s| s % self.sites).collect();
        FragmentSpec::new(sites, self.sites).map_err(|e| e.to_string())
    }
}

pub fn embedding_case() -> impl Strategy<Value = EmbeddingCase> {
    // 4n+2 rings are closed-shell with periodic bonds, 4n rings with twisted ones.
    prop_oneof![Just((6usize, Boundary::Periodic)), Just((8usize, Boundary::AntiPeriodic))].prop_flat_map(|(l, b)| {
        (0.0..8.0f64, 0..l, 1..=3usize, symmetric(l, 0.2)).prop_map(move |(u, start, nf, pot)| EmbeddingCase {
            sites: l,
            boundary: b,
            interaction: u,
            start,
            fragment: nf,
            potential: pot,
        })
    })
}

// --- running properties ---------------------------------------------------

/// Runs `check` on `cases` inputs drawn from `strategy` with a fixed seed.
pub fn for_all<S, F>(cases: u32, strategy: S, check: F) -> Check
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Check,
{
    let config = Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config)
        .run(&strategy, |v| check(v).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

// --- pauli ----------------------------------------------------------------

/// `{a_p, a†_q} = δ_pq` and `{a_p, a_q} = 0` for every pair of modes.
pub fn jw_anticommutation(modes: usize) -> Check {
    let id = PauliSum::identity(c(1.0));
    let zero = PauliSum::zero();
    for p in 0..modes {
        for q in 0..modes {
            let (lp, rq, lq) = (jw_lower(p), jw_raise(q), jw_lower(q));
            let mixed = (&lp * &rq) + (&rq * &lp);
            let want = if p == q { &id } else { &zero };
            ensure!(mixed.approx_eq(want, 1e-12), "{{a_{p}, a+_{q}}} = {mixed}");
            let same = (&lp * &lq) + (&lq * &lp);
            ensure!(same.approx_eq(&zero, 1e-12), "{{a_{p}, a_{q}}} = {same}");
        }
    }
    Ok(())
}

pub fn term_multiply_associative(a: &PauliTerm, b: &PauliTerm, c: &PauliTerm) -> Check {
    let left = term_multiply(&term_multiply(a, b), c);
    let right = term_multiply(a, &term_multiply(b, c));
    ensure!(left.same_factors(&right), "factors differ: {left} vs {right}");
    let d = (left.coefficient() - right.coefficient()).norm();
    ensure!(d < 1e-12, "coefficients differ by {d:e}");
    Ok(())
}

pub fn jw_preserves_hermiticity(f: &FermionSum) -> Check {
    let mut h = f.clone();
    h.extend(f.adjoint());
    let q = jw_transform(&h);
    ensure!(q.is_hermitian(1e-12), "image of a Hermitian sum is not Hermitian: {q}");
    Ok(())
}

pub fn self_commutator_vanishes(a: &PauliSum) -> Check {
    let k = commutator(a, a);
    ensure!(k.approx_eq(&PauliSum::zero(), 1e-12), "[a, a] = {k}");
    Ok(())
}

// --- fermion --------------------------------------------------------------

/// Every `(N, Sz)` spectrum is the same in the site and momentum bases.
pub fn momentum_spectrum(sites: usize, t: f64, u: f64, b: Boundary) -> Check {
    let ts = hubbard_tensors(sites, t, u, b).map_err(|e| e.to_string())?;
    let (mo, _) = momentum_transform(&ts).map_err(|e| e.to_string())?;
    for n in 0..=2 * sites {
        for sz in spin_sectors(n, sites) {
            let a = ed::sector_spectrum(&ts, n, sz).map_err(|e| e.to_string())?;
            let m = ed::sector_spectrum(&mo, n, sz).map_err(|e| e.to_string())?;
            for (x, y) in a.iter().zip(&m) {
                ensure!((x - y).abs() < 1e-9, "N={n} 2Sz={sz}: {x} vs {y}");
            }
        }
    }
    Ok(())
}

/// Bands of the free chain against the closed-form dispersions.
pub fn free_dispersion(sites: usize, b: Boundary) -> Check {
    let ts = hubbard_tensors(sites, 1.0, 0.0, b).map_err(|e| e.to_string())?;
    let mut got: Vec<f64> = ts.h1.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    got.sort_by(f64::total_cmp);
    let l = sites as f64;
    let mut want: Vec<f64> = match b {
        Boundary::Open => (1..=sites).map(|m| -2.0 * (PI * m as f64 / (l + 1.0)).cos()).collect(),
        _ => {
            let twist = if b == Boundary::Periodic { 0.0 } else { PI };
            // Two sites share both bonds; with the twist they cancel.
            let amp = if sites == 2 && b == Boundary::AntiPeriodic { 0.0 } else { 2.0 };
            (0..sites).map(|n| -amp * ((2.0 * PI * n as f64 + twist) / l).cos()).collect()
        }
    };
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        ensure!((g - w).abs() < 1e-12, "L={sites} {b:?}: {g} vs {w}");
    }
    Ok(())
}

// --- circuit and qvm ------------------------------------------------------

pub fn parallelize_preserves_semantics(n: usize, p: &Program) -> Check {
    let flat = parallelize(p).flatten();
    ensure!(flat.len() == p.len(), "gate count changed: {} vs {}", p.len(), flat.len());
    let d = max_abs(&(unitary(p, n) - unitary(&flat, n)));
    ensure!(d < 1e-10, "unitaries differ by {d:e}");
    Ok(())
}

pub fn exponentiation_preserves_norm(term: &PauliTerm, s: &StateVector) -> Check {
    let prog = exponentiate_term(term).map_err(|e| e.to_string())?;
    let mut out = s.clone();
    out.apply_program(&prog).map_err(|e| e.to_string())?;
    let d = (out.norm() - s.norm()).abs();
    ensure!(d < 1e-12, "norm changed by {d:e}");
    Ok(())
}

/// First-order single-step Trotterization of commuting sums is exact.
pub fn commuting_trotter_is_exact(n: usize, a: &PauliSum, b: &PauliSum) -> Check {
    let prog = trotterize(a, b, 1, 1).map_err(|e| e.to_string())?;
    let want = exp_minus_i(&dense(&(a + b), n));
    let d = max_abs(&(unitary(&prog, n) - want));
    ensure!(d < 1e-10, "Trotter circuit differs from exp(-i(A+B)) by {d:e}");
    Ok(())
}

pub fn gate_preserves_norm(g: &Gate, s: &StateVector) -> Check {
    let mut out = s.clone();
    out.apply(g).map_err(|e| e.to_string())?;
    let d = (out.norm() - 1.0).abs();
    ensure!(d < 1e-12, "norm after {g} off by {d:e}");
    Ok(())
}

pub fn gate_inverse_restores(g: &Gate, s: &StateVector) -> Check {
    let mut out = s.clone();
    out.apply(g).map_err(|e| e.to_string())?;
    out.apply(&g.inverse()).map_err(|e| e.to_string())?;
    let d = out
        .amplitudes()
        .iter()
        .zip(s.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure!(d < 1e-12, "{g} then its inverse moved the state by {d:e}");
    Ok(())
}

pub fn identity_expectation(s: &StateVector) -> Check {
    let e = expectation(s, &PauliSum::identity(c(1.0))).map_err(|e| e.to_string())?;
    ensure!((e - 1.0).abs() < 1e-12, "<I> = {e}");
    Ok(())
}

// --- meanfield ------------------------------------------------------------

pub fn meanfield_invariants(h: &DMatrix<f64>, n_electrons: usize) -> Check {
    let sol = match meanfield::solve(h, n_electrons) {
        Ok(s) => s,
        Err(meanfield::MeanFieldError::DegenerateFermiLevel { .. }) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    let g = &sol.one_rdm;
    let comm = (h * g - g * h).amax();
    ensure!(comm < 1e-8, "[h, gamma] = {comm:e}");
    let band = sol.energy();
    let trace = 2.0 * (h * g).trace();
    ensure!((band - trace).abs() < 1e-9, "2 sum eps = {band} but 2 tr(h gamma) = {trace}");
    Ok(())
}

// --- embedding ------------------------------------------------------------

pub fn embedding_invariants(case: &EmbeddingCase) -> Check {
    let l = case.sites;
    let ts = hubbard_tensors(l, 1.0, case.interaction, case.boundary).map_err(|e| e.to_string())?;
    let h = &ts.h1 + &case.potential;
    let sol = match meanfield::solve(&h, l) {
        Ok(s) => s,
        Err(meanfield::MeanFieldError::DegenerateFermiLevel { .. }) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    let frag = case.fragment()?;
    let basis = build_basis(&sol, &frag, DEFAULT_TOL, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let emb = build_embedded_hamiltonian(&ts, &basis, l);

    ensure!(
        2 * basis.n_core() + emb.n_electrons == l,
        "2*{} + {} != {l}",
        basis.n_core(),
        emb.n_electrons
    );
    let herm = emb.tensors.hermiticity_error();
    ensure!(herm < 1e-10, "embedded h1 asymmetric by {herm:e}");
    let sym = emb.tensors.v2.symmetry_error();
    ensure!(sym < 1e-10, "embedded v2 asymmetric by {sym:e}");

    let h_emb = basis.c.transpose() * &h * &basis.c;
    let proj = meanfield::solve(&h_emb, emb.n_electrons).map_err(|e| e.to_string())?;
    let nf = case.fragment;
    let sites = frag.sites();
    for a in 0..nf {
        for b in 0..nf {
            let d = (proj.one_rdm[(a, b)] - sol.one_rdm[(sites[a], sites[b])]).abs();
            ensure!(d < 1e-8, "fragment density ({a},{b}) differs by {d:e}");
        }
    }
    Ok(())
}

/// Embedded Hamiltonian of a case with the electron count it holds.
pub fn embedded_problem(case: &EmbeddingCase) -> Result<(IntegralTensors, usize), String> {
    let l = case.sites;
    let ts = hubbard_tensors(l, 1.0, case.interaction, case.boundary).map_err(|e| e.to_string())?;
    let sol = meanfield::solve(&(&ts.h1 + &case.potential), l).map_err(|e| e.to_string())?;
    let frag = case.fragment()?;
    let basis = build_basis(&sol, &frag, DEFAULT_TOL, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let emb = build_embedded_hamiltonian(&ts, &basis, l);
    Ok((emb.tensors, emb.n_electrons))
}

// --- ed -------------------------------------------------------------------

pub fn ed_rdm_energy(ts: &IntegralTensors, n_electrons: usize) -> Check {
    let two_sz = (n_electrons % 2) as i64;
    let sol = ed::ground_state(ts, n_electrons, two_sz).map_err(|e| e.to_string())?;
    let e = sol.rdms().energy(ts);
    ensure!((e - sol.energy).abs() < 1e-9, "RDM energy {e} vs eigenvalue {}", sol.energy);
    Ok(())
}

/// Sector diagonalization against the dense Jordan–Wigner Hamiltonian: the
/// global minimum and every sector spectrum must agree.
pub fn ed_matches_qubit_space(ts: &IntegralTensors) -> Check {
    let m = ts.n_orbitals();
    let n_modes = 2 * m;
    let h = dense(&jw_transform(&tensors_to_fermion_sum(ts)), n_modes);
    let mut global = f64::INFINITY;
    for n in 0..=n_modes {
        for sz in spin_sectors(n, m) {
            let fermi = ed::sector_spectrum(ts, n, sz).map_err(|e| e.to_string())?;
            let qubit = qubit_sector_spectrum(&h, n_modes, n, sz);
            ensure!(fermi.len() == qubit.len(), "N={n} 2Sz={sz}: sector sizes differ");
            for (x, y) in fermi.iter().zip(&qubit) {
                ensure!((x - y).abs() < 1e-9, "N={n} 2Sz={sz}: {x} vs {y}");
            }
            global = global.min(fermi[0]);
        }
    }
    let full = SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    ensure!((full - global).abs() < 1e-9, "dense minimum {full} vs sector minimum {global}");
    Ok(())
}

/// Trace, contraction and antisymmetry of a pair of RDMs.
pub fn rdm_consistency(rdms: &RdmPair, n_electrons: usize, tol: f64) -> Check {
    let tr = rdms.electron_count();
    ensure!((tr - n_electrons as f64).abs() < tol, "tr 1-RDM = {tr}, want {n_electrons}");
    let d = (rdms.contract_two(n_electrons) - &rdms.one).amax();
    ensure!(d < tol, "contracted 2-RDM differs from the 1-RDM by {d:e}");
    let a = rdms.antisymmetry_error();
    ensure!(a < tol, "2-RDM antisymmetry error {a:e}");
    Ok(())
}

pub fn ed_rdm_consistency(ts: &IntegralTensors, n_electrons: usize) -> Check {
    let two_sz = (n_electrons % 2) as i64;
    let sol = ed::ground_state(ts, n_electrons, two_sz).map_err(|e| e.to_string())?;
    rdm_consistency(&sol.rdms(), n_electrons, 1e-10)
}

// --- vqe ------------------------------------------------------------------

fn vqe_problem(ts: &IntegralTensors, n_electrons: usize) -> Result<(VqeProblem, UccsdAnsatz), String> {
    let ansatz = UccsdAnsatz::new(ts.n_orbitals(), n_electrons, 1, 1).map_err(|e| e.to_string())?;
    let problem = VqeProblem::new(ts, 0.0, &ansatz).map_err(|e| e.to_string())?;
    Ok((problem, ansatz))
}

/// Amplitudes drawn in `[-0.5, 0.5]` for whatever ansatz the problem needs.
pub fn amplitudes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5..0.5f64, 64)
}

pub fn vqe_variational(ts: &IntegralTensors, n_electrons: usize, theta: &[f64]) -> Check {
    let (problem, ansatz) = vqe_problem(ts, n_electrons)?;
    let theta = &theta[..ansatz.n_amplitudes()];
    let e = problem.energy(theta).map_err(|e| e.to_string())?;
    let exact = ed::ground_state(ts, n_electrons, 0).map_err(|e| e.to_string())?.energy;
    ensure!(e >= exact - 1e-9, "VQE energy {e} below the exact {exact}");
    Ok(())
}

/// `E(0) = 2 Σ_i h_ii + Σ_ij (2 V_ijij − V_ijji)` over occupied orbitals.
pub fn vqe_reference_energy(ts: &IntegralTensors, n_electrons: usize) -> Check {
    let (problem, ansatz) = vqe_problem(ts, n_electrons)?;
    let e = problem.energy(&vec![0.0; ansatz.n_amplitudes()]).map_err(|e| e.to_string())?;
    let occ = n_electrons / 2;
    let mut want = 0.0;
    for i in 0..occ {
        want += 2.0 * ts.h1[(i, i)];
        for j in 0..occ {
            want += 2.0 * ts.v2.get([i, j, i, j]) - ts.v2.get([i, j, j, i]);
        }
    }
    ensure!((e - want).abs() < 1e-10, "reference energy {e}, closed form {want}");
    Ok(())
}

pub fn vqe_gradient_steps_agree(ts: &IntegralTensors, n_electrons: usize, theta: &[f64]) -> Check {
    let (problem, ansatz) = vqe_problem(ts, n_electrons)?;
    let theta = &theta[..ansatz.n_amplitudes()];
    let f = |x: &[f64]| problem.energy(x).expect("amplitude count matches");
    let g1 = central_gradient(&f, theta, 1e-4);
    let g2 = central_gradient(&f, theta, 1e-5);
    let norm = g1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff = g1.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    ensure!(diff <= 1e-4 * norm.max(1e-4), "gradients differ by {diff:e} (norm {norm:e})");
    Ok(())
}

pub fn vqe_rdm_consistency(ts: &IntegralTensors, n_electrons: usize) -> Check {
    let (problem, ansatz) = vqe_problem(ts, n_electrons)?;
    let opts = BfgsOptions::default();
    let r = problem
        .minimize(&vec![0.0; ansatz.n_amplitudes()], &opts)
        .map_err(|e| e.to_string())?;
    rdm_consistency(&r.rdms, n_electrons, 1e-8)?;
    let e = r.rdms.energy(ts);
    ensure!((e - r.energy).abs() < 1e-8, "RDM energy {e} vs VQE energy {}", r.energy);
    Ok(())
}

// --- dmet -----------------------------------------------------------------

fn run_dmet(cfg: &DmetConfig) -> Result<dmet::DmetResult, String> {
    let r = dmet::run(cfg).map_err(|e| e.to_string())?;
    ensure!(r.converged, "DMET did not converge");
    Ok(r)
}

/// With a one-site fragment the mean-field and high-level densities match.
pub fn dmet_single_site_density(sites: usize, u: f64) -> Check {
    let cfg = DmetConfig::new(sites, u, 1, Solver::Ed);
    let r = run_dmet(&cfg)?;
    let ts = hubbard_tensors(sites, cfg.hopping, u, cfg.boundary).map_err(|e| e.to_string())?;
    let mf = dmet::mf_fragment_density(&ts.h1, &r.u, &cfg).map_err(|e| e.to_string())?;
    let high = r.rdms.spatial_one()[(0, 0)];
    ensure!((mf[(0, 0)] - high).abs() < 1e-6, "mean field {} vs high level {high}", mf[(0, 0)]);
    Ok(())
}

/// A fragment covering the whole ring reproduces the exact energy.
pub fn dmet_whole_lattice_is_exact(sites: usize, u: f64, b: Boundary) -> Check {
    let mut cfg = DmetConfig::new(sites, u, sites, Solver::Ed);
    cfg.boundary = b;
    let r = run_dmet(&cfg)?;
    let ts = hubbard_tensors(sites, 1.0, u, b).map_err(|e| e.to_string())?;
    let exact = ed::ground_state(&ts, sites, 0).map_err(|e| e.to_string())?.energy / sites as f64;
    ensure!(
        (r.energy_per_site - exact).abs() < 1e-8,
        "DMET {} vs exact {exact}",
        r.energy_per_site
    );
    Ok(())
}

/// The fitted potential is a local minimum of the cost function for the
/// final high-level density.
pub fn dmet_cost_is_local_minimum(sites: usize, fragment: usize, u: f64, seed: u64) -> Check {
    use rand::{Rng, SeedableRng};
    let cfg = DmetConfig::new(sites, u, fragment, Solver::Ed);
    let r = run_dmet(&cfg)?;
    let ts = hubbard_tensors(sites, cfg.hopping, u, cfg.boundary).map_err(|e| e.to_string())?;
    let high = r.rdms.spatial_one().view((0, 0), (fragment, fragment)).into_owned();
    let cost = |pot: &DMatrix<f64>| -> Result<f64, String> {
        let mf = dmet::mf_fragment_density(&ts.h1, pot, &cfg).map_err(|e| e.to_string())?;
        Ok(dmet::cost_function(&high, &mf, cfg.n_fragments()))
    };
    let base = cost(&r.u)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for k in 0..20 {
        let mut delta = DMatrix::from_fn(fragment, fragment, |_, _| rng.random_range(-1.0..1.0));
        delta = &delta + delta.transpose();
        delta *= 1e-3 / delta.amax();
        let moved = cost(&(&r.u + &delta))?;
        ensure!(moved >= base - 1e-14, "perturbation {k} lowers CF from {base:e} to {moved:e}");
    }
    Ok(())
}

/// Shifting which tile is solved leaves the energy unchanged.
pub fn dmet_relabeling_invariant(sites: usize, u: f64, offset: usize) -> Check {
    let base = run_dmet(&DmetConfig::new(sites, u, 1, Solver::Ed))?;
    let mut cfg = DmetConfig::new(sites, u, 1, Solver::Ed);
    cfg.fragment_offset = offset;
    let moved = run_dmet(&cfg)?;
    let d = (base.energy_per_site - moved.energy_per_site).abs();
    ensure!(d < 1e-8, "offset {offset} changes the energy by {d:e}");
    Ok(())
}

/// Every embedded UCCSD energy of a DMET run sits above the exact one.
pub fn dmet_uccsd_variational(sites: usize, fragment: usize, u: f64) -> Check {
    let mut cfg = DmetConfig::new(
        sites,
        u,
        fragment,
        Solver::Uccsd {
            trotter_order: 1,
            trotter_steps: 1,
        },
    );
    cfg.check_variational = true;
    let r = dmet::run(&cfg).map_err(|e| e.to_string())?;
    let gap = r.variational_gap.ok_or("no embedded problems were checked")?;
    ensure!(gap >= -1e-9, "VQE below ED by {:e}", -gap);
    Ok(())
}

// --- suites ---------------------------------------------------------------

pub fn parallelizer_suite() -> Check {
    for_all(200, program(6, 40), |(n, p)| parallelize_preserves_semantics(n, &p))
}

pub fn rdm_suite() -> Check {
    for_all(24, (small_lattice(3), 2..=5usize), |(ts, n)| {
        let n = n.min(2 * ts.n_orbitals() - 1);
        ed_rdm_consistency(&ts, n)
    })?;
    for_all(6, (small_lattice(3), 0.0..8.0f64), |(ts, _)| {
        let even = 2 * (ts.n_orbitals() / 2).max(1);
        vqe_rdm_consistency(&ts, even)
    })?;
    for_all(4, embedding_case(), |case| {
        let (ts, n) = embedded_problem(&case)?;
        if ts.n_orbitals() > 4 {
            return Ok(());
        }
        vqe_rdm_consistency(&ts, n)
    })
}

pub fn variational_suite() -> Check {
    for_all(24, (embedding_case(), amplitudes()), |(case, theta)| {
        let (ts, n) = embedded_problem(&case)?;
        vqe_variational(&ts, n, &theta)
    })?;
    dmet_uccsd_variational(4, 2, 4.0)
}

pub fn qubit_space_suite() -> Check {
    for_all(16, small_lattice(3), |ts| ed_matches_qubit_space(&ts))
}

pub fn anticommutation_suite() -> Check {
    (1..=8).try_for_each(jw_anticommutation)
}
