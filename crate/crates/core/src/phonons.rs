//! Harmonic normal modes of a Coulomb crystal.
//!
//! With unit masses the dynamical matrix is the Hessian of the potential at
//! equilibrium, so mode frequencies are square roots of its eigenvalues (in
//! units of `w_z`). Modes are split into a transverse branch (motion along y,
//! perpendicular to the crystal plane) and a planar branch (x-z motion).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crystal::{potential_hessian, CrystalError, IonCrystal};
use crate::linalg::sorted_symmetric_eigen;

/// Residual gradient above which a crystal is not treated as an equilibrium.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;
/// Eigenvalues below `-UNSTABLE_TOLERANCE` mean imaginary frequencies.
pub const UNSTABLE_TOLERANCE: f64 = 1e-10;
/// Fraction of eigenvector weight on y needed to call a mode transverse.
pub const TRANSVERSE_WEIGHT: f64 = 0.999;
/// Hessian y-(x,z) couplings below this let the blocks be diagonalized apart.
pub const DECOUPLING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhononError {
    #[error("crystal is not at equilibrium (|grad| = {0:e})")]
    NotEquilibrium(f64),
    #[error("crystal is unstable: Hessian eigenvalue {0:e} < 0")]
    UnstableCrystal(f64),
    #[error("mode {mode} has y-weight {y_weight}, neither transverse nor planar")]
    AmbiguousBranch { mode: usize, y_weight: f64 },
    #[error(transparent)]
    Crystal(#[from] CrystalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Transverse,
    Planar,
}

/// Normal modes of a crystal. Transverse modes come first, then planar
/// ones; each branch is sorted by ascending frequency.
#[derive(Debug, Clone)]
pub struct PhononSpectrum {
    pub crystal: IonCrystal,
    pub frequencies: Vec<f64>,
    /// Column `n` is the normalized eigenvector of mode `n`, row `3 j + axis`.
    pub amplitudes: DMatrix<f64>,
    pub branches: Vec<Branch>,
}

impl PhononSpectrum {
    pub fn n_ions(&self) -> usize {
        self.crystal.n_ions()
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn modes_of(&self, branch: Branch) -> impl Iterator<Item = usize> + '_ {
        self.branches.iter().enumerate().filter(move |(_, b)| **b == branch).map(|(n, _)| n)
    }

    pub fn frequencies_of(&self, branch: Branch) -> Vec<f64> {
        self.modes_of(branch).map(|n| self.frequencies[n]).collect()
    }

    /// Amplitude of ion `ion` along `axis` (0 = x, 1 = y, 2 = z) in mode `mode`.
    pub fn amplitude(&self, ion: usize, axis: usize, mode: usize) -> f64 {
        self.amplitudes[(3 * ion + axis, mode)]
    }

    /// `A diag(w^2) A^T`, which should reproduce the Hessian.
    pub fn reconstruct_hessian(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let squares = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.frequencies.iter().map(|w| w * w),
        ));
        &self.amplitudes * squares * self.amplitudes.transpose()
    }
}

/// Hessian of the trap-plus-Coulomb potential at the crystal's positions.
pub fn hessian(crystal: &IonCrystal) -> Result<DMatrix<f64>, PhononError> {
    if crystal.residual_gradient_norm() > EQUILIBRIUM_TOLERANCE {
        return Err(PhononError::NotEquilibrium(crystal.residual_gradient_norm()));
    }
    Ok(potential_hessian(crystal.positions(), crystal.trap())?)
}

fn frequency(eigenvalue: f64) -> Result<f64, PhononError> {
    if eigenvalue < -UNSTABLE_TOLERANCE {
        return Err(PhononError::UnstableCrystal(eigenvalue));
    }
    Ok(eigenvalue.max(0.0).sqrt())
}

/// Diagonalizes the Hessian into transverse and planar branches.
///
/// For planar crystals the y block is diagonalized on its own, which keeps
/// transverse and planar eigenvectors exactly separated even when the two
/// branches have degenerate frequencies. Otherwise the full matrix is
/// diagonalized and modes are labelled by their y-weight.
pub fn normal_modes(crystal: &IonCrystal) -> Result<PhononSpectrum, PhononError> {
    let h = hessian(crystal)?;
    let n = crystal.n_ions();
    let dim = 3 * n;

    let coupled = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .any(|(j, k)| {
            h[(3 * j + 1, 3 * k)].abs() > DECOUPLING_TOLERANCE
                || h[(3 * j + 1, 3 * k + 2)].abs() > DECOUPLING_TOLERANCE
        });

    let mut frequencies = Vec::with_capacity(dim);
    let mut branches = Vec::with_capacity(dim);
    let mut amplitudes = DMatrix::zeros(dim, dim);

    if !coupled {
        let y_rows: Vec<usize> = (0..n).map(|j| 3 * j + 1).collect();
        let xz_rows: Vec<usize> = (0..n).flat_map(|j| [3 * j, 3 * j + 2]).collect();
        let mut column = 0;
        for (rows, branch) in [(&y_rows, Branch::Transverse), (&xz_rows, Branch::Planar)] {
            let block = DMatrix::from_fn(rows.len(), rows.len(), |a, b| h[(rows[a], rows[b])]);
            let (values, vectors) = sorted_symmetric_eigen(block);
            for (m, &value) in values.iter().enumerate() {
                frequencies.push(frequency(value)?);
                branches.push(branch);
                for (a, &row) in rows.iter().enumerate() {
                    amplitudes[(row, column)] = vectors[(a, m)];
                }
                column += 1;
            }
        }
    } else {
        let (values, vectors) = sorted_symmetric_eigen(h);
        let mut labelled = Vec::with_capacity(dim);
        for (m, &value) in values.iter().enumerate() {
            let y_weight: f64 = (0..n).map(|j| vectors[(3 * j + 1, m)].powi(2)).sum();
            let branch = if y_weight >= TRANSVERSE_WEIGHT {
                Branch::Transverse
            } else if y_weight <= 1.0 - TRANSVERSE_WEIGHT {
                Branch::Planar
            } else {
                return Err(PhononError::AmbiguousBranch { mode: m, y_weight });
            };
            labelled.push((branch, frequency(value)?, m));
        }
        labelled.sort_by(|a, b| {
            let rank = |b: &Branch| if *b == Branch::Transverse { 0 } else { 1 };
            rank(&a.0).cmp(&rank(&b.0)).then(a.1.total_cmp(&b.1))
        });
        for (column, (branch, w, m)) in labelled.into_iter().enumerate() {
            frequencies.push(w);
            branches.push(branch);
            amplitudes.set_column(column, &vectors.column(m));
        }
    }

    Ok(PhononSpectrum { crystal: crystal.clone(), frequencies, amplitudes, branches })
}

/// Detunings of a laser beat note from both phonon branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub beat: f64,
    pub min_transverse_detuning: f64,
    pub min_planar_detuning: f64,
    pub transverse_band: (f64, f64),
    pub planar_band: (f64, f64),
}

impl BranchReport {
    pub fn transverse_bandwidth(&self) -> f64 {
        self.transverse_band.1 - self.transverse_band.0
    }

    pub fn planar_bandwidth(&self) -> f64 {
        self.planar_band.1 - self.planar_band.0
    }
}

pub fn branch_report(spectrum: &PhononSpectrum, beat: f64) -> BranchReport {
    let summarize = |branch| {
        let freqs = spectrum.frequencies_of(branch);
        let detuning = freqs.iter().map(|w| (w - beat).abs()).fold(f64::INFINITY, f64::min);
        let lo = freqs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (detuning, (lo, hi))
    };
    let (min_transverse_detuning, transverse_band) = summarize(Branch::Transverse);
    let (min_planar_detuning, planar_band) = summarize(Branch::Planar);
    BranchReport { beat, min_transverse_detuning, min_planar_detuning, transverse_band, planar_band }
}
