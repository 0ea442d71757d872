//! Desk-scale computation with Ramsey algebras on the natural numbers.
//!
//! The crate is organised bottom-up:
//!
//! - [`algebra`]: operation signatures and orderly terms.
//! - [`reduction`]: reductions between sequences, finite-reduction sets and
//!   diagonalization of reduction chains.
//! - [`search`]: backtracking searches for monochromatic finite-reduction sets.
//! - [`sets`]: the finite/cofinite family over `ω^n`, symbolic set terms over
//!   membership oracles, bounded closures and sampled admissibility checks.
//! - [`ultrafilter`]: exact ultrafilter calculus on the finite/cofinite family.
//! - [`galvin`]: FR-chain fields, their ultrafilter and homogeneous-sequence
//!   construction.

pub mod algebra;
pub mod error;
pub mod galvin;
pub mod reduction;
pub mod search;
pub mod sets;
pub mod ultrafilter;
pub mod verify;

pub use error::{Error, Result};
