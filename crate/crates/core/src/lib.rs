//! Normal-form engine for the cubic NLS on a truncated Fourier lattice.
//!
//! Hamiltonians are sparse sums of monomials `I(0)^a q^k qbar^k'` with up
//! to two action deviations `J_n = |q_n|^2 - I_n(0)`. On top of that sit the
//! weighted norms, Poisson brackets, Lie series, the homological solver and
//! a driver that runs the iteration on small truncations.

pub mod csv;
pub mod dioph;
pub mod error;
pub mod ham;
pub mod homological;
pub mod kam;
pub mod lattice;
pub mod modes;
pub mod nls;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use ham::{Hamiltonian, NormKind, Repr, StatePoint, Term};
pub use lattice::{LatticeParams, ModeIndex, MultiIndex, SignedIndex, SortedSystem};
pub use modes::Lattice;
pub use num_complex::Complex64;
