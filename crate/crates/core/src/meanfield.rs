//! Restricted Slater determinant of a quadratic lattice Hamiltonian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("restricted solution needs an even electron count, got {0}")]
    OddElectrons(usize),
    #[error("{electrons} electrons do not fit in {orbitals} spatial orbitals")]
    TooManyElectrons { electrons: usize, orbitals: usize },
    #[error("degenerate Fermi level: HOMO {homo} and LUMO {lumo}")]
    DegenerateFermiLevel { homo: f64, lumo: f64 },
    #[error("one-body matrix is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
}

pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    /// Column `p` holds orbital `p` over sites, ordered by energy.
    pub orbitals: DMatrix<f64>,
    pub energies: DVector<f64>,
    /// Occupied spatial orbitals per spin.
    pub n_occ: usize,
    /// Per-spin density matrix in the site basis.
    pub one_rdm: DMatrix<f64>,
}

impl MeanFieldSolution {
    pub fn n_sites(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn occupied(&self) -> DMatrix<f64> {
        self.orbitals.columns(0, self.n_occ).into_owned()
    }

    /// Both spins: `2 Σ_occ ε`.
    pub fn energy(&self) -> f64 {
        2.0 * self.energies.rows(0, self.n_occ).sum()
    }
}

/// Sorted eigenpairs of a symmetric matrix with each eigenvector's
/// largest-magnitude component made positive (earliest index wins ties).
pub fn sorted_eigh(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Fills the lowest `n_electrons / 2` orbitals of `h_aug` for each spin.
pub fn solve(h_aug: &DMatrix<f64>, n_electrons: usize) -> Result<MeanFieldSolution, MeanFieldError> {
    let asym = (h_aug - h_aug.transpose()).amax();
    if asym > 1e-10 {
        return Err(MeanFieldError::NotSymmetric(asym));
    }
    if !n_electrons.is_multiple_of(2) {
        return Err(MeanFieldError::OddElectrons(n_electrons));
    }
    let n = h_aug.nrows();
    let n_occ = n_electrons / 2;
    if n_occ > n {
        return Err(MeanFieldError::TooManyElectrons {
            electrons: n_electrons,
            orbitals: n,
        });
    }
    let (energies, orbitals) = sorted_eigh(h_aug);
    if n_occ > 0 && n_occ < n {
        let (homo, lumo) = (energies[n_occ - 1], energies[n_occ]);
        if (lumo - homo).abs() < DEGENERACY_TOL {
            return Err(MeanFieldError::DegenerateFermiLevel { homo, lumo });
        }
    }
    let occ = orbitals.columns(0, n_occ);
    let one_rdm = occ * occ.transpose();
    Ok(MeanFieldSolution {
        orbitals,
        energies,
        n_occ,
        one_rdm,
    })
}

/// Per-spin `C_occ C_occᵀ`.
pub fn one_rdm(sol: &MeanFieldSolution) -> DMatrix<f64> {
    sol.one_rdm.clone()
}
