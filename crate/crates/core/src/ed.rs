//! Exact diagonalization in a fixed (N↑, N↓) determinant sector.
//!
//! Spin orbitals are interleaved (`2i` up, `2i+1` down); a determinant is a
//! bitmask with bit `p` set when spin orbital `p` is occupied, which is also
//! its Jordan–Wigner basis-state index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fermion::{IntegralTensors, SpinOrbitalTerms};
use crate::qvm::StateVector;
use crate::rdm::RdmPair;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdError {
    #[error("sector with {n_up} up and {n_down} down electrons is empty for {n_spatial} spatial orbitals")]
    EmptySector {
        n_up: usize,
        n_down: usize,
        n_spatial: usize,
    },
    #[error("electron count {n_electrons} and 2Sz = {two_sz} are incompatible")]
    BadSpin { n_electrons: usize, two_sz: i64 },
    #[error("{0} spin orbitals exceed the exact-diagonalization limit")]
    TooLarge(usize),
    #[error("Lanczos did not converge (residual {0:.3e})")]
    NotConverged(f64),
}

const MAX_SPIN_ORBITALS: usize = 24;
/// Sector dimension up to which the matrix is diagonalized densely.
pub const DENSE_LIMIT: usize = 400;

/// Applies a product of ladder operators (rightmost first) to a determinant.
#[inline]
fn apply_ops(mut det: u64, ops: &[(usize, bool)]) -> Option<(u64, f64)> {
    let mut sign = 1.0;
    for &(p, dagger) in ops.iter().rev() {
        let bit = 1u64 << p;
        if (det & bit != 0) == dagger {
            return None;
        }
        if (det & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        det ^= bit;
    }
    Some((det, sign))
}

fn sector_dets(n_spatial: usize, n_up: usize, n_down: usize) -> Vec<u64> {
    let nso = 2 * n_spatial;
    let mut dets: Vec<u64> = (0u64..1 << nso)
        .filter(|&d| {
            let up = (0..n_spatial).filter(|i| d >> (2 * i) & 1 == 1).count();
            let dn = (0..n_spatial).filter(|i| d >> (2 * i + 1) & 1 == 1).count();
            up == n_up && dn == n_down
        })
        .collect();
    dets.sort_unstable();
    dets
}

/// Row-major sparse symmetric matrix.
struct SparseH {
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseH {
    fn build(terms: &SpinOrbitalTerms, dets: &[u64], lookup: &[u32]) -> Self {
        let rows = dets
            .par_iter()
            .map(|&d| {
                let mut row: Vec<(u32, f64)> = Vec::new();
                let mut push = |target: u64, v: f64| {
                    let j = lookup[target as usize];
                    debug_assert!(j != u32::MAX, "term leaves the sector");
                    row.push((j, v));
                };
                for &(p, q, h) in &terms.one_body {
                    if let Some((t, s)) = apply_ops(d, &[(p, true), (q, false)]) {
                        push(t, s * h);
                    }
                }
                for &([p, q, r, s], w) in &terms.two_body {
                    if let Some((t, sg)) = apply_ops(d, &[(p, true), (q, true), (r, false), (s, false)]) {
                        push(t, sg * w);
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
                for (j, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => merged.push((j, v)),
                    }
                }
                merged.retain(|e| e.1 != 0.0);
                merged
            })
            .collect();
        SparseH { rows }
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let out: Vec<f64> = self
            .rows
            .par_iter()
            .map(|row| row.iter().map(|&(j, v)| v * x[j as usize]).sum())
            .collect();
        DVector::from_vec(out)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j as usize)] += v;
            }
        }
        m
    }
}

/// Lowest eigenpair of `h` by Lanczos with full reorthogonalization and restarts.
fn lanczos(h: &SparseH, tol: f64) -> Result<(f64, DVector<f64>), EdError> {
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v0 = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    v0.normalize_mut();
    let krylov = n.min(120);
    let mut residual = f64::INFINITY;
    for _restart in 0..50 {
        let mut basis: Vec<DVector<f64>> = vec![v0.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for k in 0..krylov {
            let mut w = h.matvec(&basis[k]);
            let a = basis[k].dot(&w);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let bnorm = w.norm();
            if k + 1 == krylov || bnorm < 1e-12 {
                beta.push(bnorm);
                break;
            }
            beta.push(bnorm);
            basis.push(w / bnorm);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (kmin, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let y = eig.eigenvectors.column(kmin);
        let mut x = DVector::zeros(n);
        for (b, &c) in basis.iter().zip(y.iter()) {
            x.axpy(c, b, 1.0);
        }
        x.normalize_mut();
        let r = h.matvec(&x) - &x * e;
        residual = r.norm();
        if residual < tol {
            return Ok((e, x));
        }
        v0 = x;
    }
    Err(EdError::NotConverged(residual))
}

/// Ground state of a sector together with its determinant basis.
#[derive(Debug, Clone)]
pub struct EdSolution {
    pub energy: f64,
    pub vector: DVector<f64>,
    pub dets: Vec<u64>,
    pub n_spin_orbitals: usize,
    pub n_electrons: usize,
}

fn fix_phase(v: &mut DVector<f64>) {
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[pivot].abs() + 1e-12 {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

fn sector_setup(
    ts: &IntegralTensors,
    n_electrons: usize,
    two_sz: i64,
) -> Result<(SpinOrbitalTerms, Vec<u64>, Vec<u32>), EdError> {
    let nso = ts.n_spin_orbitals();
    if nso > MAX_SPIN_ORBITALS {
        return Err(EdError::TooLarge(nso));
    }
    let diff = n_electrons as i64 - two_sz;
    if diff < 0 || diff % 2 != 0 || two_sz.unsigned_abs() as usize > n_electrons {
        return Err(EdError::BadSpin { n_electrons, two_sz });
    }
    let n_down = (diff / 2) as usize;
    let n_up = n_electrons - n_down;
    let n_spatial = nso / 2;
    let dets = sector_dets(n_spatial, n_up, n_down);
    if dets.is_empty() {
        return Err(EdError::EmptySector { n_up, n_down, n_spatial });
    }
    let mut lookup = vec![u32::MAX; 1 << nso];
    for (k, &d) in dets.iter().enumerate() {
        lookup[d as usize] = k as u32;
    }
    Ok((ts.spin_orbital_terms(), dets, lookup))
}

/// Lowest state with `n_electrons` electrons and `2·Sz = two_sz`.
pub fn ground_state(ts: &IntegralTensors, n_electrons: usize, two_sz: i64) -> Result<EdSolution, EdError> {
    let (terms, dets, lookup) = sector_setup(ts, n_electrons, two_sz)?;
    let h = SparseH::build(&terms, &dets, &lookup);
    let (energy, mut vector) = if h.dim() <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(h.to_dense());
        let k = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|x| x.0)
            .expect("non-empty sector");
        (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
    } else {
        lanczos(&h, 1e-9)?
    };
    fix_phase(&mut vector);
    Ok(EdSolution {
        energy,
        vector,
        dets,
        n_spin_orbitals: ts.n_spin_orbitals(),
        n_electrons,
    })
}

/// All eigenvalues of a sector, ascending. Dense; meant for small checks.
pub fn sector_spectrum(ts: &IntegralTensors, n_electrons: usize, two_sz: i64) -> Result<Vec<f64>, EdError> {
    let (terms, dets, lookup) = sector_setup(ts, n_electrons, two_sz)?;
    let h = SparseH::build(&terms, &dets, &lookup);
    let mut ev: Vec<f64> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Amplitudes of `ops|ψ⟩`, keyed by the resulting determinant.
fn apply_to_state(sol: &EdSolution, ops: &[(usize, bool)], lookup: &[u32], out: &mut [f64]) {
    for (&d, &c) in sol.dets.iter().zip(sol.vector.iter()) {
        if let Some((t, s)) = apply_ops(d, ops) {
            out[lookup[t as usize] as usize] += s * c;
        }
    }
}

fn index_of(dets: &[u64], nso: usize) -> Vec<u32> {
    let mut lookup = vec![u32::MAX; 1 << nso];
    for (k, &d) in dets.iter().enumerate() {
        lookup[d as usize] = k as u32;
    }
    lookup
}

/// Determinants reachable by removing `k` electrons from `dets`.
fn removed(dets: &[u64], k: u32, nso: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut seen = vec![false; 1 << nso];
    for &d in dets {
        // Enumerate subsets of the occupied bits with popcount k.
        let mut sub = d;
        loop {
            if sub.count_ones() == k {
                let t = d & !sub;
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    out.push(t);
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & d;
        }
    }
    out.sort_unstable();
    out
}

impl EdSolution {
    /// `⟨a†_p a_q⟩` over spin orbitals.
    pub fn one_rdm(&self) -> DMatrix<f64> {
        let nso = self.n_spin_orbitals;
        let minus = removed(&self.dets, 1, nso);
        let lookup = index_of(&minus, nso);
        let phis: Vec<Vec<f64>> = (0..nso)
            .map(|p| {
                let mut v = vec![0.0; minus.len()];
                apply_to_state(self, &[(p, false)], &lookup, &mut v);
                v
            })
            .collect();
        DMatrix::from_fn(nso, nso, |p, q| phis[p].iter().zip(&phis[q]).map(|(a, b)| a * b).sum())
    }

    /// Spin-orbital 1- and 2-RDMs.
    pub fn rdms(&self) -> RdmPair {
        let nso = self.n_spin_orbitals;
        let one = self.one_rdm();
        let mut rdm = RdmPair::new(one, vec![0.0; nso.pow(4)]);
        if self.n_electrons < 2 {
            return rdm;
        }
        let minus = removed(&self.dets, 2, nso);
        let lookup = index_of(&minus, nso);
        let pairs: Vec<(usize, usize)> = (0..nso).flat_map(|a| (a + 1..nso).map(move |b| (a, b))).collect();
        // φ_ab = a_b a_a |ψ⟩ for a < b
        let phis: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let mut v = vec![0.0; minus.len()];
                apply_to_state(self, &[(b, false), (a, false)], &lookup, &mut v);
                v
            })
            .collect();
        let grams: Vec<Vec<f64>> = (0..pairs.len())
            .into_par_iter()
            .map(|x| {
                (0..pairs.len())
                    .map(|y| phis[x].iter().zip(&phis[y]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        // ⟨a†_i a†_j a_l a_k⟩ = ⟨φ_ij|φ_kl⟩
        for (x, &(i, j)) in pairs.iter().enumerate() {
            for (y, &(k, l)) in pairs.iter().enumerate() {
                let g = grams[x][y];
                rdm.set_two(i, j, k, l, g);
                rdm.set_two(j, i, k, l, -g);
                rdm.set_two(i, j, l, k, -g);
                rdm.set_two(j, i, l, k, g);
            }
        }
        rdm
    }

    /// Jordan–Wigner statevector of the ground state.
    pub fn to_statevector(&self) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.n_spin_orbitals];
        for (&d, &c) in self.dets.iter().zip(self.vector.iter()) {
            amps[d as usize] = Complex64::new(c, 0.0);
        }
        StateVector::from_amplitudes(amps)
    }
}
