//! Spin-spin couplings mediated by a spin-dependent optical dipole force.
//!
//! All coupling matrices use the pair convention
//!
//! ```text
//! H = sum_{j<k} J_jk sz_j sz_k - h sum_j sx_j
//! ```
//!
//! so `J_jk` is the full coefficient of each unordered pair. `J > 0` is
//! antiferromagnetic. Summing the second-order phonon exchange over ordered
//! pairs `j != k` instead would halve every entry.
//!
//! The laser wavevector lies in the x-y plane. Its y projection pushes the
//! transverse modes, with per-mode Lamb-Dicke factor
//! `eta_n = ldy * sqrt(alpha_y / w_n)`; the x projection only enters through
//! the geometric phase `cos(kx (x_j - x_k))`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crystal::{IonCrystal, Structure};
use crate::phonons::{branch_report, Branch, PhononSpectrum};

/// Minimum transverse detuning for the mode sum to be evaluated.
pub const RESONANCE_TOLERANCE: f64 = 1e-6;
/// Margin ratios at or below this pass the validity checks.
pub const VALIDITY_THRESHOLD: f64 = 0.1;
/// Bonds weaker than this make the frustration criterion inapplicable.
pub const BOND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("invalid laser configuration: {0}")]
    InvalidLaser(String),
    #[error("laser beat note is resonant with a transverse mode (detuning {0:e})")]
    ResonantLaser(f64),
    #[error("crystal is not planar")]
    NotPlanar,
    #[error("crystal is not a zig-zag ladder")]
    NotZigZag,
    #[error("ions {0} and {1} have the same x coordinate")]
    DegeneratePair(usize, usize),
    #[error("ion index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("frustration criterion not applicable: {0}")]
    NotApplicable(String),
}

/// Raman beat-note laser parameters, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig {
    /// `k_x l_z`
    pub kx: f64,
    /// `k_y l_z`
    pub ky: f64,
    /// Two-photon Rabi frequency in units of `w_z`.
    pub rabi: f64,
    /// Beat frequency `w_1 - w_2` in units of `w_z`.
    pub beat: f64,
    /// Lamb-Dicke parameter of the y projection at frequency `w_y`.
    pub ldy: f64,
    /// Quantum length ratio `sqrt(hbar / (m w_z l_z^2))`, required when
    /// `ky = 0` since it cannot then be inferred from `ldy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_ratio: Option<f64>,
}

impl LaserConfig {
    pub fn validate(&self) -> Result<(), CouplingError> {
        let bad = |msg: String| Err(CouplingError::InvalidLaser(msg));
        if !(self.kx.is_finite() && self.ky.is_finite()) {
            return bad("wavevector components must be finite".into());
        }
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return bad(format!("rabi must be non-negative, got {}", self.rabi));
        }
        if !(self.beat.is_finite() && self.beat > 0.0) {
            return bad(format!("beat must be positive, got {}", self.beat));
        }
        if !(self.ldy > 0.0 && self.ldy <= 0.3) {
            return bad(format!("ldy must lie in (0, 0.3], got {}", self.ldy));
        }
        if let Some(rho) = self.length_ratio {
            if !(rho.is_finite() && rho > 0.0) {
                return bad(format!("length_ratio must be positive, got {rho}"));
            }
        }
        if self.ky == 0.0 && self.length_ratio.is_none() {
            return bad("length_ratio is required when ky = 0".into());
        }
        Ok(())
    }

    /// `rho = sqrt(hbar / (m w_z l_z^2))`, from `ldy = ky rho / sqrt(2 alpha_y)`.
    pub fn length_ratio(&self, alpha_y: f64) -> f64 {
        if self.ky != 0.0 {
            (self.ldy * (2.0 * alpha_y).sqrt() / self.ky).abs()
        } else {
            self.length_ratio.unwrap_or(0.0)
        }
    }

    /// Lamb-Dicke factor of the x projection at frequency `w_x`.
    pub fn ldx(&self, alpha_x: f64, alpha_y: f64) -> f64 {
        (self.kx * self.length_ratio(alpha_y) / (2.0 * alpha_x).sqrt()).abs()
    }

    /// Lamb-Dicke factor of the y projection for a transverse mode at `omega`.
    pub fn transverse_lamb_dicke(&self, alpha_y: f64, omega: f64) -> f64 {
        self.ldy * (alpha_y / omega).sqrt()
    }

    /// Lamb-Dicke factor of the in-plane projection for a planar mode at `omega`.
    pub fn planar_lamb_dicke(&self, alpha_y: f64, omega: f64) -> f64 {
        (self.kx * self.length_ratio(alpha_y) / (2.0 * omega).sqrt()).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ExactModeSum,
    DipolarLimit,
}

/// Symmetric pair-coupling matrix with zero diagonal, in units of `w_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

impl CouplingMatrix {
    pub fn n_spins(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.matrix[(j, k)]
    }

    /// Largest absolute coupling.
    pub fn max_abs(&self) -> f64 {
        self.matrix.amax()
    }
}

fn require_planar(crystal: &IonCrystal) -> Result<(), CouplingError> {
    if crystal.is_planar() {
        Ok(())
    } else {
        Err(CouplingError::NotPlanar)
    }
}

fn geometric_phase(crystal: &IonCrystal, laser: &LaserConfig, j: usize, k: usize) -> f64 {
    let (a, b) = (crystal.positions()[j], crystal.positions()[k]);
    laser.kx * (a.x - b.x) + laser.ky * (a.y - b.y)
}

/// Couplings from the second-order exchange of virtual transverse phonons:
///
/// ```text
/// J_jk = -sum_n rabi^2 eta_n^2 M_jn M_kn cos(k.(r_j - r_k)) / (2 delta_n)
/// ```
///
/// with `delta_n = w_n - beat` and `M` the y components of the transverse
/// eigenvectors.
pub fn exact_couplings(
    crystal: &IonCrystal,
    spectrum: &PhononSpectrum,
    laser: &LaserConfig,
) -> Result<CouplingMatrix, CouplingError> {
    laser.validate()?;
    require_planar(crystal)?;
    let n = crystal.n_ions();
    let alpha_y = crystal.trap().alpha_y;
    let mut matrix = DMatrix::zeros(n, n);
    if n > 1 {
        let report = branch_report(spectrum, laser.beat);
        if report.min_transverse_detuning <= RESONANCE_TOLERANCE {
            return Err(CouplingError::ResonantLaser(report.min_transverse_detuning));
        }
    }
    for mode in spectrum.modes_of(Branch::Transverse) {
        let omega = spectrum.frequencies[mode];
        let eta = laser.transverse_lamb_dicke(alpha_y, omega);
        let detuning = omega - laser.beat;
        let weight = -laser.rabi * laser.rabi * eta * eta / (2.0 * detuning);
        for j in 0..n {
            let mj = spectrum.amplitude(j, 1, mode);
            for k in (j + 1)..n {
                matrix[(j, k)] += weight * mj * spectrum.amplitude(k, 1, mode);
            }
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let value = matrix[(j, k)] * geometric_phase(crystal, laser, j, k).cos();
            matrix[(j, k)] = value;
            matrix[(k, j)] = value;
        }
    }
    Ok(CouplingMatrix { matrix, provenance: Provenance::ExactModeSum })
}

/// `J_eff = rabi^2 ldy^2 / (8 delta_y^2 alpha_y)` with `delta_y = alpha_y - beat`.
pub fn dipolar_strength(laser: &LaserConfig, alpha_y: f64) -> Result<f64, CouplingError> {
    let detuning = alpha_y - laser.beat;
    if detuning == 0.0 {
        return Err(CouplingError::ResonantLaser(0.0));
    }
    Ok(laser.rabi * laser.rabi * laser.ldy * laser.ldy / (8.0 * detuning * detuning * alpha_y))
}

/// Tight-confinement closed form `J_jk = 2 J_eff cos(kx (x_j - x_k)) / |r_j - r_k|^3`.
/// The factor two converts the ordered-pair strength `J_eff` to the pair
/// convention used throughout.
pub fn dipolar_couplings(crystal: &IonCrystal, laser: &LaserConfig) -> Result<CouplingMatrix, CouplingError> {
    laser.validate()?;
    require_planar(crystal)?;
    let strength = dipolar_strength(laser, crystal.trap().alpha_y)?;
    let n = crystal.n_ions();
    let positions = crystal.positions();
    let matrix = DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            return 0.0;
        }
        let d = positions[j] - positions[k];
        let phase = laser.kx * d.x;
        2.0 * strength * phase.cos() / d.norm().powi(3)
    });
    Ok(CouplingMatrix { matrix, provenance: Provenance::DipolarLimit })
}

/// `n pi / (x_j - x_{j+1})`: the x wavevector that makes the pair `(j, j+1)`
/// pick up a phase `n pi`. Only the cosine of the phase matters downstream,
/// so the sign (which depends on the zig-zag mirror image) is irrelevant.
pub fn commensurate_kx(crystal: &IonCrystal, j: usize, n: i32) -> Result<f64, CouplingError> {
    if crystal.structure() != Structure::ZigZag {
        return Err(CouplingError::NotZigZag);
    }
    if j + 1 >= crystal.n_ions() {
        return Err(CouplingError::IndexOutOfRange(j + 1));
    }
    let dx = crystal.positions()[j].x - crystal.positions()[j + 1].x;
    if dx.abs() < 1e-6 {
        return Err(CouplingError::DegeneratePair(j, j + 1));
    }
    Ok(n as f64 * PI / dx)
}

/// One validity condition: passes when `ratio <= VALIDITY_THRESHOLD`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub ratio: f64,
    pub passed: bool,
}

impl Margin {
    fn new(ratio: f64) -> Self {
        Margin { ratio, passed: ratio <= VALIDITY_THRESHOLD }
    }
}

/// Conditions under which only the transverse sideband force survives and
/// the displacement transformation can be truncated at second order.
///
/// Ratios compare the drive amplitude `rabi / 2` of the Stark-shift
/// Hamiltonian with the relevant detuning:
/// * `carrier`: `(rabi / 2) / beat`,
/// * `planar`: `max_n (rabi / 2) eta_n / |w_n - beat|` over planar modes,
/// * `perturbative`: `max_n (rabi / 2) eta_n / |delta_n|` over transverse modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub carrier: Margin,
    pub planar: Margin,
    pub perturbative: Margin,
}

impl ValidityReport {
    pub fn all_passed(&self) -> bool {
        self.carrier.passed && self.planar.passed && self.perturbative.passed
    }
}

fn sideband_ratio(drive: f64, eta: f64, detuning: f64) -> f64 {
    if detuning.abs() < 1e-12 {
        f64::INFINITY
    } else {
        drive * eta / detuning.abs()
    }
}

pub fn validity_check(spectrum: &PhononSpectrum, laser: &LaserConfig) -> ValidityReport {
    let alpha_y = spectrum.crystal.trap().alpha_y;
    let drive = 0.5 * laser.rabi;
    let worst = |branch: Branch| {
        spectrum
            .modes_of(branch)
            .map(|n| {
                let omega = spectrum.frequencies[n];
                let eta = match branch {
                    Branch::Transverse => laser.transverse_lamb_dicke(alpha_y, omega),
                    Branch::Planar => laser.planar_lamb_dicke(alpha_y, omega),
                };
                sideband_ratio(drive, eta, omega - laser.beat)
            })
            .fold(0.0, f64::max)
    };
    ValidityReport {
        carrier: Margin::new(drive / laser.beat),
        planar: Margin::new(worst(Branch::Planar)),
        perturbative: Margin::new(worst(Branch::Transverse)),
    }
}

/// Toulouse-Villain test on a closed cycle of ions: frustrated iff the
/// number of antiferromagnetic (positive) bonds around it is odd.
pub fn frustration_check(couplings: &CouplingMatrix, cycle: &[usize]) -> Result<bool, CouplingError> {
    if cycle.len() < 3 {
        return Err(CouplingError::NotApplicable(format!("cycle of length {}", cycle.len())));
    }
    let n = couplings.n_spins();
    if let Some(&bad) = cycle.iter().find(|&&j| j >= n) {
        return Err(CouplingError::IndexOutOfRange(bad));
    }
    let mut antiferro = 0;
    for (i, &j) in cycle.iter().enumerate() {
        let k = cycle[(i + 1) % cycle.len()];
        let bond = couplings.get(j, k);
        if bond.abs() <= BOND_TOLERANCE {
            return Err(CouplingError::NotApplicable(format!("bond ({j}, {k}) vanishes")));
        }
        if bond > 0.0 {
            antiferro += 1;
        }
    }
    Ok(antiferro % 2 == 1)
}
