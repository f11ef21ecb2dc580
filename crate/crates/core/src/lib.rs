//! Classical-assisted ground-state preparation at desk scale.
//!
//! The pipeline runs in five stages:
//!
//! 1. simple-update imaginary-time evolution of a PEPS ([`peps`]),
//! 2. Metropolis sampling of its major components into a sparse trial
//!    state ([`sampler`]),
//! 3. a binomially weighted sum of time evolutions approximating
//!    `cos^{2n}` of the shifted Hamiltonian ([`filter`]),
//! 4. amplitude amplification of the post-selected branch, and
//! 5. scoring against exact diagonalization ([`exactdiag`]).
//!
//! [`costmodel`] holds the scaling analysis used to pick the number of
//! components and to compare trial-state preparations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmodel;
pub mod error;
pub mod exactdiag;
pub mod filter;
pub mod hamiltonian;
pub mod lattice;
pub mod peps;
pub mod sampler;
pub mod statevector;

pub use error::{Error, Result};
pub use exactdiag::{lanczos_extremes, spectral_gap, EdResult};
pub use hamiltonian::{
    build_hamiltonian, shift_spectrum, HeisenbergSpec, ShiftedHamiltonian, SparseHamiltonian,
};
pub use lattice::{build_lattice, LatticeGeometry};
pub use num_complex::Complex64;
pub use statevector::{structure_factor, Statevector};
