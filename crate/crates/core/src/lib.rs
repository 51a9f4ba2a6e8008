//! Trapped-ion zig-zag ladders as quantum simulators of frustrated Ising chains.
//!
//! The crate follows the pipeline from trap parameters to phase-diagram data:
//!
//! * [`crystal`]: equilibrium positions of a Coulomb crystal in a linear trap.
//! * [`phonons`]: harmonic expansion and the transverse / planar normal modes.
//! * [`lightforce`]: laser-engineered spin-spin couplings, both the exact
//!   phonon-mode sum and the dipolar closed form, plus validity and
//!   frustration checks.
//! * [`spinphonon`]: spin-phonon dynamics in a truncated phonon space compared
//!   against the effective Ising dynamics.
//! * [`ed`]: matrix-free Lanczos exact diagonalization of the periodic
//!   J1-J2 (plus dipolar tail) transverse-field Ising chain, structure
//!   factors and phase-diagram sweeps.
//!
//! Everything is dimensionless: lengths in units of
//! `l_z = (e^2 / m w_z^2)^(1/3)`, frequencies in units of the axial trap
//! frequency `w_z`, energies in `m w_z^2 l_z^2`, and `hbar = m = 1`.

pub mod crystal;
pub mod ed;
pub mod error;
pub mod lightforce;
pub mod linalg;
pub mod phonons;
pub mod spinphonon;

pub use crystal::{find_equilibrium, IonCrystal, Structure, TrapConfig};
pub use error::Error;
pub use lightforce::{CouplingMatrix, LaserConfig, Provenance};
pub use phonons::{normal_modes, Branch, PhononSpectrum};

/// Shorthand for a 3-vector of `f64` coordinates.
pub type Vec3 = nalgebra::Vector3<f64>;
