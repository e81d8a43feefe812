//! Desk-scale numerics for separable-witness Hamiltonian problems.
//!
//! The crate compiles verification circuits into clock Hamiltonians,
//! checks history-state and spectral-gap properties, simulates the
//! phase-estimation energy test, searches for low-energy product states
//! and decides consistency of local density matrices. Everything is dense
//! or row-sparse complex linear algebra over at most a dozen qubits.
//!
//! Qubit ordering is fixed crate-wide: qubit 0 is the most significant bit
//! of a basis index, and Kitaev objects lay subsystems out as
//! clock, ancilla, first proof, second proof.

pub mod acceptance;
pub mod circuit;
pub mod cldm;
pub mod error;
pub mod io;
pub mod kitaev;
pub mod linalg;
pub mod operator;
pub mod optimize;
pub mod qstate;
pub mod sparse_sim;
pub mod spectral;

pub use error::{HamlabError, Result};
pub use linalg::{CMatrix, CVector, C64};

/// Default cap on the total number of qubits of any dense object.
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Tolerance for equality assertions between computed quantities.
pub const EQ_TOL: f64 = 1e-10;
