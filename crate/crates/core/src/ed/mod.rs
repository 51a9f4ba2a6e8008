//! Exact diagonalization of the periodic J1-J2 transverse-field Ising chain
//! with an optional dipolar tail.
//!
//! Basis states are `n`-bit integers; bit `j` set means spin `j` points up
//! (`sz_j = +1`).

mod classical;
mod dense;
mod lanczos;
mod model;
mod observables;
mod operator;
pub mod sweep;

use thiserror::Error;

pub use classical::{classical_ground_count, classical_ground_states};
pub use dense::{dense_ground, dense_spectrum, DENSE_MAX_SPINS};
pub use lanczos::{lanczos_ground, lanczos_ground_with, lanczos_lowest, EigenResult, LanczosOptions, MAX_EIGENPAIRS};
pub use model::{build_spin_model, geometry_model, ModelSource, SpinModel, Tail, MAX_SPINS};
pub use observables::{
    fluorescence_spectrum, local_observables, momentum_grid, structure_factor, LocalObservables,
    StructureFactor, ZDistribution,
};
pub use operator::IsingOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdError {
    #[error("spin count must be even, got {0}")]
    BadArity(usize),
    #[error("spin count {0} outside the supported range")]
    SizeOutOfRange(usize),
    #[error("coupling range {r_max} invalid for {n} spins")]
    RangeTooLong { r_max: usize, n: usize },
    #[error("couplings at distance {distance} vary by {spread:.3} (relative) across the bulk")]
    Inhomogeneous { distance: usize, spread: f64 },
    #[error("Lanczos did not converge: {0}")]
    NoConvergence(String),
    #[error("{0} spins is too many for dense diagonalization")]
    TooLarge(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o failure: {0}")]
    Io(String),
}
