//! Density matrix embedding theory (DMET) for lattice models with a unitary
//! coupled-cluster variational eigensolver as the fragment solver.
//!
//! The crate is organised bottom-up:
//!
//! * [`pauli`] – Pauli-string algebra and the Jordan–Wigner map.
//! * [`fermion`] – fermionic operator sums, integral tensors, Hubbard builders.
//! * [`circuit`] – gate-level programs, Pauli exponentiation, Trotterization,
//!   time-slice scheduling.
//! * [`qvm`] – statevector machine executing [`circuit::Program`]s.
//! * [`meanfield`] – restricted quadratic-Hamiltonian solver.
//! * [`embedding`] – fragment/bath basis and embedded Hamiltonians.
//! * [`ed`] – exact diagonalization in a fixed particle sector.
//! * [`vqe`] – UCCSD ansatz, MP2 seeding, BFGS driver, RDM measurement.
//! * [`dmet`] – the self-consistent embedding loop.
//! * [`lattice`] – whole-ring exact and UCCSD reference energies.

pub mod circuit;
pub mod dmet;
pub mod ed;
pub mod embedding;
pub mod fermion;
pub mod lattice;
pub mod meanfield;
pub mod optimize;
pub mod pauli;
pub mod qvm;
pub mod rdm;
pub mod vqe;

pub use circuit::{Gate, Program, TimeSlicedProgram};
pub use dmet::{DmetConfig, DmetResult, Solver};
pub use embedding::{EmbeddedHamiltonian, EmbeddingBasis, FragmentSpec};
pub use fermion::{Boundary, FermionSum, FermionTerm, IntegralTensors};
pub use meanfield::MeanFieldSolution;
pub use pauli::{Pauli, PauliSum, PauliTerm};
pub use qvm::StateVector;
pub use rdm::RdmPair;
pub use vqe::{UccsdAnsatz, VqeResult};

pub use num_complex::Complex64;
