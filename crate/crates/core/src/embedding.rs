//! Fragment + bath orbitals from a Slater determinant and the embedded
//! Hamiltonian over them.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fermion::{BasisKind, IntegralTensors, TwoBody};
use crate::meanfield::{sorted_eigh, MeanFieldSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("fragment is empty")]
    EmptyFragment,
    #[error("fragment site {site} outside a lattice of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("fragment site {0} listed twice")]
    DuplicateSite(usize),
    #[error("occupied orbital lies entirely on the fragment (overlap eigenvalue {0}); bath normalization is singular")]
    PureFragmentOrbital(f64),
    #[error("{found} entangled orbitals exceed the fragment size {n_fragment}")]
    TooManyBathOrbitals { found: usize, n_fragment: usize },
    #[error("threshold {0} must lie in (0, 0.5)")]
    BadThreshold(f64),
}

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSpec {
    sites: Vec<usize>,
}

impl FragmentSpec {
    pub fn new(sites: Vec<usize>, n_sites: usize) -> Result<Self, EmbeddingError> {
        if sites.is_empty() {
            return Err(EmbeddingError::EmptyFragment);
        }
        let mut seen = vec![false; n_sites];
        for &s in &sites {
            if s >= n_sites {
                return Err(EmbeddingError::SiteOutOfRange { site: s, n_sites });
            }
            if seen[s] {
                return Err(EmbeddingError::DuplicateSite(s));
            }
            seen[s] = true;
        }
        Ok(FragmentSpec { sites })
    }

    /// Sites `start..start + size`.
    pub fn contiguous(start: usize, size: usize, n_sites: usize) -> Result<Self, EmbeddingError> {
        FragmentSpec::new((start..start + size).collect(), n_sites)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.contains(&site)
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingBasis {
    /// Fragment unit vectors followed by bath orbitals, one per column.
    pub c: DMatrix<f64>,
    /// Overlap eigenvalues, descending.
    pub delta: Vec<f64>,
    /// Frozen occupied orbitals with no fragment weight, one per column.
    pub core: DMatrix<f64>,
    pub n_fragment: usize,
}

impl EmbeddingBasis {
    pub fn n_orbitals(&self) -> usize {
        self.c.ncols()
    }

    pub fn n_bath(&self) -> usize {
        self.c.ncols() - self.n_fragment
    }

    pub fn n_core(&self) -> usize {
        self.core.ncols()
    }

    /// Per-spin core density in the site basis.
    pub fn core_density(&self) -> DMatrix<f64> {
        &self.core * self.core.transpose()
    }
}

/// `S_pq = Σ_{μ∈F} D_μp D_μq` over occupied orbitals.
pub fn fragment_overlap(sol: &MeanFieldSolution, frag: &FragmentSpec) -> DMatrix<f64> {
    let occ = sol.occupied();
    let m = DMatrix::from_fn(frag.len(), occ.ncols(), |r, p| occ[(frag.sites()[r], p)]);
    m.transpose() * m
}

pub fn build_basis(
    sol: &MeanFieldSolution,
    frag: &FragmentSpec,
    tol_core: f64,
    tol_full: f64,
) -> Result<EmbeddingBasis, EmbeddingError> {
    for tol in [tol_core, tol_full] {
        if !(tol > 0.0 && tol < 0.5) {
            return Err(EmbeddingError::BadThreshold(tol));
        }
    }
    let n_sites = sol.n_sites();
    let nf = frag.len();
    let occ = sol.occupied();
    let s = fragment_overlap(sol, frag);
    let (vals, vecs) = sorted_eigh(&s);
    let order: Vec<usize> = (0..vals.len()).rev().collect();
    let delta: Vec<f64> = order.iter().map(|&k| vals[k]).collect();

    // A fragment covering the whole lattice has no environment to entangle
    // with; its occupied orbitals need no bath partners.
    let whole_lattice = nf == n_sites;
    let mut bath = Vec::new();
    let mut core = Vec::new();
    for (&k, &d) in order.iter().zip(&delta) {
        let orbital = &occ * vecs.column(k);
        if d > 1.0 - tol_full {
            if whole_lattice {
                continue;
            }
            return Err(EmbeddingError::PureFragmentOrbital(d));
        }
        if d < tol_core {
            core.push(orbital);
            continue;
        }
        let mut b = orbital;
        for &f in frag.sites() {
            b[f] = 0.0;
        }
        b /= (1.0 - d).sqrt();
        // Deterministic sign: largest component positive.
        let pivot = b.iamax();
        if b[pivot] < 0.0 {
            b.neg_mut();
        }
        bath.push(b);
    }
    if bath.len() > nf {
        return Err(EmbeddingError::TooManyBathOrbitals {
            found: bath.len(),
            n_fragment: nf,
        });
    }
    let mut c = DMatrix::zeros(n_sites, nf + bath.len());
    for (k, &f) in frag.sites().iter().enumerate() {
        c[(f, k)] = 1.0;
    }
    for (k, b) in bath.iter().enumerate() {
        c.set_column(nf + k, b);
    }
    let mut core_m = DMatrix::zeros(n_sites, core.len());
    for (k, v) in core.iter().enumerate() {
        core_m.set_column(k, v);
    }
    Ok(EmbeddingBasis {
        c,
        delta,
        core: core_m,
        n_fragment: nf,
    })
}

#[derive(Debug, Clone)]
pub struct EmbeddedHamiltonian {
    /// Core-dressed one-body term and transformed two-body term.
    pub tensors: IntegralTensors,
    /// `Cᵀ f C` where `f` is the core mean field in the site basis.
    pub f_core: DMatrix<f64>,
    pub e_core: f64,
    pub n_electrons: usize,
    pub n_fragment: usize,
}

impl EmbeddedHamiltonian {
    pub fn n_orbitals(&self) -> usize {
        self.tensors.n_orbitals()
    }

    /// Copy with `−μ` on the fragment diagonal.
    pub fn with_chemical_potential(&self, mu: f64) -> IntegralTensors {
        let mut ts = self.tensors.clone();
        for f in 0..self.n_fragment {
            ts.h1[(f, f)] -= mu;
        }
        ts
    }
}

/// Coulomb minus exchange of a per-spin density `g` (site basis):
/// `f_ik = Σ_jl (2 V_ij,kl − V_ij,lk) g_lj`.
pub fn core_fock(v2: &TwoBody, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v2.dim();
    let mut f = DMatrix::zeros(n, n);
    for ([i, j, k, l], v) in v2.iter() {
        f[(i, k)] += 2.0 * v * g[(l, j)];
        f[(i, l)] -= v * g[(k, j)];
    }
    f
}

/// Projects the lattice Hamiltonian `ts` into the embedding space. All
/// two-body terms are transformed; the frozen core enters through its mean
/// field and constant energy.
pub fn build_embedded_hamiltonian(
    ts: &IntegralTensors,
    basis: &EmbeddingBasis,
    n_electrons: usize,
) -> EmbeddedHamiltonian {
    let c = &basis.c;
    let g = basis.core_density();
    let f_site = core_fock(&ts.v2, &g);
    let e_core = 2.0 * (&ts.h1 * &g).trace() + (&f_site * &g).trace();
    let f_core = c.transpose() * &f_site * c;
    let h1 = c.transpose() * &ts.h1 * c + &f_core;
    let v2 = ts.v2.transform(c, 1e-14);
    EmbeddedHamiltonian {
        tensors: IntegralTensors::new(h1, v2, BasisKind::Embedded),
        f_core,
        e_core,
        n_electrons: n_electrons - 2 * basis.n_core(),
        n_fragment: basis.n_fragment,
    }
}
