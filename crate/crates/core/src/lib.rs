//! Simulation toolkit for quench dynamics of the two-dimensional
//! transverse-field Ising model with a longitudinal bias field.
//!
//! The Hamiltonian acts on spins-1/2 placed on an open `rows x cols`
//! rectangular lattice,
//!
//! ```text
//! H = -J sum_<ij> Z_i Z_j  -  g sum_i X_i  -  h sum_i Z_i
//! ```
//!
//! where `X` and `Z` are Pauli matrices with eigenvalues +-1 and `<ij>`
//! runs over nearest-neighbour pairs. For ferromagnetic coupling (`J > 0`)
//! and a bias `h` opposing the prepared magnetisation, the polarised state
//! is metastable: it decays by nucleating and growing bubbles of the true
//! vacuum. The crate provides everything needed to study that decay
//! numerically:
//!
//! * [`lattice`] — open rectangular geometry and its snake (boustrophedon)
//!   mapping onto a 1D chain,
//! * [`model`] — coupling lists, Hamiltonian MPOs and classical bubble
//!   energetics,
//! * [`mps`] — matrix-product states: canonical forms, truncation,
//!   expectation values, entropy and perfect Born-rule sampling,
//! * [`groundstate`] — two-site DMRG for ground and low excited states,
//! * [`evolve`] — two-site TDVP real-time evolution through a quench,
//! * [`exact`] — dense state vectors on small lattices, used as the
//!   reference implementation everything else is validated against,
//! * [`observables`] — magnetisation, collective-spin fluctuations and
//!   first-passage analysis of return-probability traces,
//! * [`clusters`] — connected-cluster statistics of sampled spin
//!   configurations,
//! * [`runner`] — configuration files, experiment orchestration and the
//!   canned figure reproductions behind the `fvsim` binary.
//!
//! # Conventions
//!
//! These are fixed once, here, and relied on everywhere:
//!
//! * Physical basis: index `0` is spin-down (`Z = -1`), index `1` is
//!   spin-up (`Z = +1`).
//! * Chain order: 2D sites are numbered by [`lattice::LatticeGeometry::snake_index`];
//!   every per-site array in the crate is in chain order.
//! * Dense basis: bit `k` of a computational-basis index is the spin at
//!   chain site `k` (`0` down, `1` up), so basis index `0` is the all-down
//!   product state.
//! * Snapshots are recorded as `'0'`/`'1'` characters in row-major 2D
//!   order (row 0 left to right, then row 1, ...), independent of the
//!   snake internally used by the tensor network.

pub mod clusters;
pub mod error;
pub mod evolve;
pub mod exact;
pub mod groundstate;
pub(crate) mod linalg;
pub mod lattice;
pub mod model;
pub mod mpo;
pub mod mps;
pub mod observables;
pub mod rng;
pub mod runner;

pub mod io;

pub use error::{Error, Result};

/// Complex double-precision scalar used by all tensor data.
pub type C64 = num_complex::Complex64;
