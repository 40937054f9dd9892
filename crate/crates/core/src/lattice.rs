//! Whole-lattice reference calculations for half-filled Hubbard rings.

use thiserror::Error;

use crate::ed::{self, EdError};
use crate::fermion::{hubbard_tensors, momentum_transform, Boundary, FermionError};
use crate::optimize::BfgsOptions;
use crate::vqe::{mp2_guess, UccsdAnsatz, VqeError, VqeProblem, VqeResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Ed(#[from] EdError),
    #[error(transparent)]
    Vqe(#[from] VqeError),
}

/// Ring parameters; electrons default to half filling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub sites: usize,
    pub hopping: f64,
    pub interaction: f64,
    pub boundary: Boundary,
}

impl Ring {
    pub fn half_filled(sites: usize, interaction: f64) -> Self {
        Ring {
            sites,
            hopping: 1.0,
            interaction,
            boundary: Boundary::AntiPeriodic,
        }
    }
}

/// Exact ground-state energy per site in the singlet sector.
pub fn exact_energy_per_site(ring: &Ring) -> Result<f64, LatticeError> {
    let ts = hubbard_tensors(ring.sites, ring.hopping, ring.interaction, ring.boundary)?;
    let sol = ed::ground_state(&ts, ring.sites, 0)?;
    Ok(sol.energy / ring.sites as f64)
}

/// Mean-field (plane-wave determinant) energy per site.
pub fn reference_energy_per_site(ring: &Ring) -> Result<f64, LatticeError> {
    let ts = hubbard_tensors(ring.sites, ring.hopping, ring.interaction, ring.boundary)?;
    let (mo, _) = momentum_transform(&ts)?;
    let ansatz = UccsdAnsatz::new(ring.sites, ring.sites, 1, 1)?;
    let problem = VqeProblem::new(&mo, 0.0, &ansatz)?;
    Ok(problem.energy(&vec![0.0; ansatz.n_amplitudes()])? / ring.sites as f64)
}

/// The UCCSD problem in the momentum basis, with its MP2 starting point.
pub fn uccsd_problem(ring: &Ring, order: u32, steps: usize) -> Result<(VqeProblem, Vec<f64>), LatticeError> {
    let ts = hubbard_tensors(ring.sites, ring.hopping, ring.interaction, ring.boundary)?;
    let (mo, _) = momentum_transform(&ts)?;
    let ansatz = UccsdAnsatz::new(ring.sites, ring.sites, order, steps)?;
    let eps: Vec<f64> = (0..ring.sites).map(|k| mo.h1[(k, k)]).collect();
    let guess = mp2_guess(&mo, &eps, &ansatz);
    Ok((VqeProblem::new(&mo, 0.0, &ansatz)?, guess))
}

/// UCCSD-VQE on the whole ring from the MP2 guess.
pub fn uccsd(ring: &Ring, order: u32, steps: usize, opts: &BfgsOptions) -> Result<VqeResult, LatticeError> {
    let (problem, guess) = uccsd_problem(ring, order, steps)?;
    Ok(problem.minimize(&guess, opts)?)
}
