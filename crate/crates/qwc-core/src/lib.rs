//! Numerical core for quantum random walk convergence experiments.
//!
//! The crate is organised bottom-up:
//!
//! - [`mat`]: dense complex matrices, exponentials, Hermitian eigendecomposition,
//!   phi-functions and spectral norms.
//! - [`block`]: the block structure on `h ⊗ k̂ ≅ h ⊕ (h ⊗ k)`, compressions,
//!   the scaling map, bipartite ampliations and noise-space embeddings.
//! - [`ito`]: the series product on cocycle generators, generator assembly from
//!   `(Z, L, W)` parameters, and structure classification.
//! - [`holevo`]: the Holevo transform `Q ↦ F[Q]`, its exponential oracle, the
//!   scalar calibration functions, and limit checks for scaled powers.
//! - [`walk`]: step functions, walk step matrices, discretised matrix elements
//!   and toy Fock space walk operators.
//! - [`cocycle`]: semigroup decomposition of cocycle matrix elements, Euler
//!   comparisons and noise-embedding consistency checks.
//! - [`models`]: concrete generator families (unitary realisations, repeated
//!   quantum interactions, bipartite compositions, preservation operators).
//! - [`harness`]: scenario configuration, convergence reports, CSV round trips
//!   and the experiment driver used by the CLI.
//! - [`sample`]: seeded random matrices and parameters for tests and self tests.

pub mod block;
pub mod cocycle;
pub mod harness;
pub mod holevo;
pub mod ito;
pub mod mat;
pub mod models;
pub mod sample;
pub mod walk;

pub use mat::{c64, ComplexMatrix};
