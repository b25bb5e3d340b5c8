//! Tensor-network toolkit for locally accurate MPS approximations of 1D
//! ground states.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense complex linear algebra (SVD, Hermitian eigen,
//!   polar decomposition, partial trace) used by everything else.
//! - [`mps`]: open-boundary matrix product states — canonical forms,
//!   Schmidt data, truncation, superposition, reduced density matrices.
//! - [`hamiltonian`]: nearest-neighbor 1D Hamiltonians with exact
//!   diagonalization and DMRG ground-state solvers.
//! - [`metrics`]: fidelity, purified/trace distance, windowed local
//!   distances, and two-region correlation estimates.
//! - [`absorb`]: entropy absorption — joint states with prescribed
//!   marginals and rank bounded by the larger marginal rank.
//! - [`local_approx`]: two superposition-of-blocks constructions giving
//!   local approximations with chain-length-independent bond dimension.
//! - [`circuit_approx`]: disentangle-project-reentangle construction with
//!   a two-layer local-circuit certificate.
//! - [`reduction`]: energy-density estimation by binary search over
//!   combined Hamiltonians queried through a single-site oracle.
//! - [`io`]: JSON formats for states, Hamiltonians, circuits, and reports.

pub mod error;
pub mod numerics;
pub mod mps;
pub mod hamiltonian;
pub mod metrics;
pub mod absorb;
pub mod local_approx;
pub mod circuit_approx;
pub mod reduction;
pub mod io;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = ndarray::Array2<C64>;

/// Dense complex vector.
pub type CVec = ndarray::Array1<C64>;
