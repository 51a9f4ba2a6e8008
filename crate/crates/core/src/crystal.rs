//! Equilibrium configurations of ions in a linear Paul trap.
//!
//! The dimensionless potential is
//!
//! ```text
//! V = sum_j 1/2 (ax^2 x_j^2 + ay^2 y_j^2 + z_j^2) + sum_{j<k} 1 / |r_j - r_k|
//! ```
//!
//! with `ax = w_x / w_z` and `ay = w_y / w_z`. Minima are found with a
//! Newton trust-region iteration whose subproblem is solved exactly through
//! an eigen-decomposition of the Hessian, so negative curvature at the
//! linear-chain saddle is followed instead of converged onto.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::sorted_symmetric_eigen;
use crate::Vec3;

/// Pairwise distances below this are treated as coincident ions.
pub const COINCIDENCE_DISTANCE: f64 = 1e-12;
/// Coordinates below this are considered zero when classifying structures.
pub const CLASSIFICATION_THRESHOLD: f64 = 1e-6;
/// Transverse coordinates whose whole column stays below this after
/// convergence are snapped to exactly zero.
const SNAP_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("invalid trap configuration: {0}")]
    InvalidTrap(String),
    #[error("ions {0} and {1} coincide")]
    CoincidentIons(usize, usize),
    #[error("minimizer did not converge after {iterations} iterations (|grad| = {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },
    #[error("stationary point is a saddle (lowest Hessian eigenvalue {min_eigenvalue:e})")]
    SaddlePoint { min_eigenvalue: f64 },
}

/// Trap frequencies relative to the axial one, plus the ion count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// `w_x / w_z`
    pub alpha_x: f64,
    /// `w_y / w_z`
    pub alpha_y: f64,
}

impl TrapConfig {
    pub fn new(n_ions: usize, alpha_x: f64, alpha_y: f64) -> Result<Self, CrystalError> {
        let trap = TrapConfig { n_ions, alpha_x, alpha_y };
        trap.validate()?;
        Ok(trap)
    }

    pub fn validate(&self) -> Result<(), CrystalError> {
        if self.n_ions < 2 {
            return Err(CrystalError::InvalidTrap(format!(
                "need at least 2 ions, got {}",
                self.n_ions
            )));
        }
        for (name, value) in [("alpha_x", self.alpha_x), ("alpha_y", self.alpha_y)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(CrystalError::InvalidTrap(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Whether `1 < alpha_x < alpha_y`, the ordering that favours a zig-zag in
    /// the x-z plane once the ion number is large enough.
    pub fn zigzag_ordering(&self) -> bool {
        1.0 < self.alpha_x && self.alpha_x < self.alpha_y
    }

    /// Squared confinement weights `(ax^2, ay^2, 1)`.
    pub fn curvatures(&self) -> Vec3 {
        Vec3::new(self.alpha_x * self.alpha_x, self.alpha_y * self.alpha_y, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    Linear,
    ZigZag,
    Other,
}

/// A minimized ion configuration, sorted by ascending z.
#[derive(Debug, Clone, PartialEq)]
pub struct IonCrystal {
    trap: TrapConfig,
    positions: Vec<Vec3>,
    structure: Structure,
    residual_gradient_norm: f64,
}

impl IonCrystal {
    /// Wraps externally supplied positions. The residual gradient and the
    /// structure are recomputed; no minimization is performed.
    pub fn from_positions(trap: TrapConfig, mut positions: Vec<Vec3>) -> Result<Self, CrystalError> {
        positions.sort_by(|a, b| a.z.total_cmp(&b.z));
        let gradient = potential_gradient(&positions, &trap)?;
        let residual_gradient_norm = flat_norm(&gradient);
        let structure = classify_positions(&positions);
        Ok(IonCrystal { trap, positions, structure, residual_gradient_norm })
    }

    pub fn trap(&self) -> &TrapConfig {
        &self.trap
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn residual_gradient_norm(&self) -> f64 {
        self.residual_gradient_norm
    }

    /// True when every y coordinate vanishes, i.e. the crystal lies in the
    /// x-z plane and the y motion decouples.
    pub fn is_planar(&self) -> bool {
        self.positions.iter().all(|r| r.y.abs() < CLASSIFICATION_THRESHOLD)
    }

    pub fn energy(&self) -> f64 {
        potential_energy(&self.positions, &self.trap).expect("crystal positions are distinct")
    }

    /// Same crystal with a different trap. Useful for planar crystals, whose
    /// positions do not depend on `alpha_y`.
    pub fn with_trap(&self, trap: TrapConfig) -> Result<Self, CrystalError> {
        IonCrystal::from_positions(trap, self.positions.clone())
    }
}

fn flat_norm(vectors: &[Vec3]) -> f64 {
    vectors.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn check_distinct(positions: &[Vec3]) -> Result<(), CrystalError> {
    for j in 0..positions.len() {
        for k in (j + 1)..positions.len() {
            if (positions[j] - positions[k]).norm() < COINCIDENCE_DISTANCE {
                return Err(CrystalError::CoincidentIons(j, k));
            }
        }
    }
    Ok(())
}

/// Trap plus Coulomb energy in units of `m w_z^2 l_z^2`.
pub fn potential_energy(positions: &[Vec3], trap: &TrapConfig) -> Result<f64, CrystalError> {
    check_distinct(positions)?;
    let w = trap.curvatures();
    let mut energy = 0.0;
    for (j, r) in positions.iter().enumerate() {
        energy += 0.5 * (w.x * r.x * r.x + w.y * r.y * r.y + w.z * r.z * r.z);
        for s in &positions[j + 1..] {
            energy += 1.0 / (r - s).norm();
        }
    }
    Ok(energy)
}

pub fn potential_gradient(positions: &[Vec3], trap: &TrapConfig) -> Result<Vec<Vec3>, CrystalError> {
    check_distinct(positions)?;
    let w = trap.curvatures();
    let mut grad: Vec<Vec3> = positions.iter().map(|r| w.component_mul(r)).collect();
    for j in 0..positions.len() {
        for k in (j + 1)..positions.len() {
            let d = positions[j] - positions[k];
            let r = d.norm();
            let f = d / (r * r * r);
            grad[j] -= f;
            grad[k] += f;
        }
    }
    Ok(grad)
}

/// Second derivatives of the potential, indexed `3 * ion + axis`.
pub fn potential_hessian(positions: &[Vec3], trap: &TrapConfig) -> Result<DMatrix<f64>, CrystalError> {
    check_distinct(positions)?;
    let n = positions.len();
    let w = trap.curvatures();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for j in 0..n {
        for a in 0..3 {
            h[(3 * j + a, 3 * j + a)] = w[a];
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let d = positions[j] - positions[k];
            let r2 = d.norm_squared();
            let r = r2.sqrt();
            let inv_r3 = 1.0 / (r2 * r);
            let inv_r5 = inv_r3 / r2;
            for a in 0..3 {
                // b >= a only, mirrored, so the matrix is exactly symmetric
                for b in a..3 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    // d^2 (1/r) / dd_a dd_b
                    let c = 3.0 * d[a] * d[b] * inv_r5 - delta * inv_r3;
                    for (p, q) in [(a, b), (b, a)].into_iter().take(if a == b { 1 } else { 2 }) {
                        h[(3 * j + p, 3 * j + q)] += c;
                        h[(3 * k + p, 3 * k + q)] += c;
                        h[(3 * j + p, 3 * k + q)] -= c;
                        h[(3 * k + p, 3 * j + q)] -= c;
                    }
                }
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Amplitude of the symmetry-breaking transverse kick, in `l_z`.
    pub perturbation: f64,
    /// Most negative Hessian eigenvalue still accepted as a minimum.
    pub saddle_tolerance: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            gradient_tolerance: 1e-10,
            max_iterations: 500,
            perturbation: 1e-2,
            saddle_tolerance: 1e-8,
        }
    }
}

/// Minimizes the trap-plus-Coulomb potential starting from a perturbed,
/// equispaced linear chain. Deterministic for a fixed seed.
pub fn find_equilibrium(trap: &TrapConfig, seed: u64) -> Result<IonCrystal, CrystalError> {
    find_equilibrium_with(trap, seed, &MinimizerOptions::default())
}

pub fn find_equilibrium_with(
    trap: &TrapConfig,
    seed: u64,
    options: &MinimizerOptions,
) -> Result<IonCrystal, CrystalError> {
    trap.validate()?;
    let start = initial_chain(trap.n_ions, seed, options.perturbation);
    let mut positions = minimize(start, trap, options)?;

    // Exactly planar or linear crystals get exactly zero transverse
    // coordinates, which makes the y motion decouple to machine precision.
    for axis in 0..2 {
        if positions.iter().all(|r| r[axis].abs() < SNAP_THRESHOLD) {
            for r in positions.iter_mut() {
                r[axis] = 0.0;
            }
        }
    }

    let hessian = potential_hessian(&positions, trap)?;
    let (values, _) = sorted_symmetric_eigen(hessian);
    if values[0] < -options.saddle_tolerance {
        return Err(CrystalError::SaddlePoint { min_eigenvalue: values[0] });
    }

    positions.sort_by(|a, b| a.z.total_cmp(&b.z));
    // Canonical mirror image: first bulk ion on the +x side.
    if positions.len() >= 3 && positions[1].x < 0.0 {
        for r in positions.iter_mut() {
            r.x = -r.x;
        }
    }
    let crystal = IonCrystal::from_positions(*trap, positions)?;
    if crystal.residual_gradient_norm > options.gradient_tolerance {
        return Err(CrystalError::NoConvergence {
            iterations: options.max_iterations,
            gradient_norm: crystal.residual_gradient_norm,
        });
    }
    Ok(crystal)
}

/// Equispaced chain using the minimum-spacing scaling `2.018 / N^0.559`,
/// kicked along x with alternating signs (the zig-zag soft mode) and
/// randomly along y.
fn initial_chain(n: usize, seed: u64, amplitude: f64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 2.018 / (n as f64).powf(0.559);
    let center = 0.5 * (n as f64 - 1.0);
    (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let x = amplitude * sign * rng.random_range(0.5..1.5);
            let y = amplitude * rng.random_range(-1.0..1.0);
            Vec3::new(x, y, spacing * (j as f64 - center))
        })
        .collect()
}

fn to_flat(positions: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(3 * positions.len(), positions.iter().flat_map(|r| r.iter().copied()))
}

fn from_flat(x: &DVector<f64>) -> Vec<Vec3> {
    x.as_slice().chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn minimize(start: Vec<Vec3>, trap: &TrapConfig, options: &MinimizerOptions) -> Result<Vec<Vec3>, CrystalError> {
    const MAX_RADIUS: f64 = 1.0;
    let mut x = to_flat(&start);
    let mut positions = start;
    let mut energy = potential_energy(&positions, trap)?;
    let mut grad = to_flat(&potential_gradient(&positions, trap)?);
    let mut radius = 0.1;

    for _ in 0..options.max_iterations {
        let gnorm = grad.norm();
        if gnorm <= options.gradient_tolerance {
            return Ok(positions);
        }
        let hessian = potential_hessian(&positions, trap)?;
        let (values, vectors) = sorted_symmetric_eigen(hessian.clone());
        let step = trust_region_step(&grad, &values, &vectors, radius);
        let predicted = grad.dot(&step) + 0.5 * step.dot(&(&hessian * &step));
        let step_norm = step.norm();

        let trial_x = &x + &step;
        let trial = from_flat(&trial_x);
        let (accepted, ratio, trial_energy, trial_grad) = match potential_energy(&trial, trap) {
            Err(CrystalError::CoincidentIons(..)) => (false, 0.0, energy, grad.clone()),
            Err(e) => return Err(e),
            Ok(e_new) => {
                let g_new = to_flat(&potential_gradient(&trial, trap)?);
                if predicted.abs() < 1e-13 * energy.abs().max(1.0) {
                    // Energy differences are lost in rounding; judge by the gradient.
                    let better = g_new.norm() < gnorm;
                    (better, if better { 1.0 } else { 0.0 }, e_new, g_new)
                } else {
                    let ratio = (e_new - energy) / predicted;
                    (ratio > 1e-4, ratio, e_new, g_new)
                }
            }
        };

        if ratio < 0.25 {
            radius *= 0.25;
        } else if ratio > 0.75 && step_norm > 0.99 * radius {
            radius = (2.0 * radius).min(MAX_RADIUS);
        }
        if accepted {
            x = trial_x;
            positions = trial;
            energy = trial_energy;
            grad = trial_grad;
        }
        if radius < 1e-300 {
            break;
        }
    }
    let gradient_norm = grad.norm();
    if gradient_norm <= options.gradient_tolerance {
        return Ok(positions);
    }
    Err(CrystalError::NoConvergence { iterations: options.max_iterations, gradient_norm })
}

/// Exact minimizer of `g.p + p.H.p / 2` subject to `|p| <= radius`, using the
/// eigen-decomposition `H = V diag(values) V^T`.
fn trust_region_step(grad: &DVector<f64>, values: &[f64], vectors: &DMatrix<f64>, radius: f64) -> DVector<f64> {
    let g = vectors.transpose() * grad;
    let step_for = |shift: f64| -> DVector<f64> {
        let coeffs = DVector::from_iterator(
            values.len(),
            values.iter().zip(g.iter()).map(|(&l, &gi)| {
                let denom = l + shift;
                if denom.abs() < 1e-300 {
                    0.0
                } else {
                    -gi / denom
                }
            }),
        );
        vectors * coeffs
    };

    let lowest = values[0];
    if lowest > 0.0 {
        let newton = step_for(0.0);
        if newton.norm() <= radius {
            return newton;
        }
    }

    let floor = (-lowest).max(0.0);
    let scale = floor.max(1.0);
    let probe = step_for(floor + 1e-12 * scale);
    if probe.norm() < radius {
        // Hard case: the gradient has no weight on the lowest eigenvector.
        let base = step_for(floor + 1e-12 * scale);
        let direction = vectors.column(0).into_owned();
        let b = base.dot(&direction);
        let c = base.norm_squared() - radius * radius;
        let tau = -b + (b * b - c).max(0.0).sqrt();
        return base + direction * tau;
    }

    let mut lo = floor;
    let mut hi = floor + grad.norm() / radius;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if step_for(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    step_for(hi)
}

/// Structure of a minimized crystal.
pub fn classify_structure(crystal: &IonCrystal) -> Structure {
    classify_positions(crystal.positions())
}

/// Linear: no transverse displacement at all. ZigZag: planar in x-z with x
/// alternating in sign along the z-sorted bulk (the two outermost ions are
/// exempt unless the crystal has no more than three ions).
pub fn classify_positions(positions: &[Vec3]) -> Structure {
    let t = CLASSIFICATION_THRESHOLD;
    let max_x = positions.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
    let max_y = positions.iter().map(|r| r.y.abs()).fold(0.0, f64::max);
    if max_x < t && max_y < t {
        return Structure::Linear;
    }
    if max_y >= t {
        return Structure::Other;
    }
    let mut sorted: Vec<f64> = Vec::with_capacity(positions.len());
    let mut order: Vec<&Vec3> = positions.iter().collect();
    order.sort_by(|a, b| a.z.total_cmp(&b.z));
    sorted.extend(order.iter().map(|r| r.x));
    let n = sorted.len();
    let bulk = if n <= 3 { &sorted[..] } else { &sorted[1..n - 1] };
    let alternates = bulk.iter().all(|x| x.abs() >= t) && bulk.windows(2).all(|w| w[0] * w[1] < 0.0);
    if alternates && bulk.len() >= 2 {
        Structure::ZigZag
    } else {
        Structure::Other
    }
}
