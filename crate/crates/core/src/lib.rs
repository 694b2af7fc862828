//! Covariant (multisymplectic) Hamiltonian field theory on trivial bundles.
//!
//! A first-order Lagrangian `L(x, y, ∂y)` is turned into its de Donder–Weyl
//! Hamiltonian form; the crate checks the Lagrangian/Hamiltonian equivalence
//! and Noether conservation laws numerically, integrates 1+1 dimensional
//! models with a box scheme, and computes the index of periodic patterns.

pub mod bundle;
pub mod cli;
pub mod dual;
pub mod error;
pub mod lagrangian;
pub mod multihamiltonian;
pub mod noether;
pub mod integrate;
pub mod patterns;

pub use error::{Error, Result};
