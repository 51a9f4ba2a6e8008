//! Spin-phonon dynamics in a truncated phonon space, compared with the
//! effective Ising dynamics it reduces to.
//!
//! In the frame rotating with every phonon mode the laser produces
//!
//! ```text
//! H(t) = sum_n A_n a_n^+ exp(i delta_n t) + h.c.,
//! A_n  = (rabi / 2) sum_j i exp(i k.r_j) g_jn sz_j,
//! ```
//!
//! with `delta_n = w_n - beat` and `g_jn = (kx M^x_jn + ky M^y_jn) rho / sqrt(2 w_n)`
//! over all `3N` modes. Moving to the frame rotating at the beat frequency
//! turns this into the time-independent `H' = sum_n delta_n a_n^+ a_n + A_n a_n^+ + h.c.`.
//! The two frames differ by a phonon-only unitary, so every spin observable
//! agrees, and `H'` is propagated exactly through its eigen-decomposition.
//! Since `A_n` is diagonal in the sz basis, `H'` is block diagonal with one
//! phonon block per spin configuration. The explicit time-dependent form is
//! also available through a Dormand-Prince integrator as a cross-check.
//!
//! State layout: amplitude index `occupation_index * 2^N + spin_bits`, where
//! bit `j` set means `sz_j = +1`.

mod krylov;
mod ode;

use std::collections::HashMap;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use krylov::KrylovPropagator;
pub use ode::{DormandPrince, Tolerances};

use crate::ed::IsingOperator;
use crate::lightforce::{CouplingError, CouplingMatrix, LaserConfig};
use crate::phonons::{Branch, PhononSpectrum};

type C64 = Complex<f64>;

/// Largest spin count for the full spin-phonon evolution.
pub const MAX_FULL_SPINS: usize = 4;
/// Largest spin count for the effective Ising evolution.
pub const MAX_EFFECTIVE_SPINS: usize = 14;
/// Leaked-population estimate above which the truncation is reported as too
/// small.
pub const LEAKAGE_LIMIT: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("{0} spins exceed the limit for this evolution")]
    TooLarge(usize),
    #[error("estimated population {leakage:e} leaks out of the truncated phonon space")]
    TruncationOverflow { leakage: f64 },
    #[error("bad initial state: {0}")]
    BadInitialState(String),
    #[error("invalid time grid: {0}")]
    InvalidTime(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// Eigenstate of `sx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Plus,
    Minus,
}

impl Polarization {
    pub fn sx(self) -> f64 {
        match self {
            Polarization::Plus => 1.0,
            Polarization::Minus => -1.0,
        }
    }

    /// Amplitude on `|up>` or `|down>`.
    fn amplitude(self, up: bool) -> f64 {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        if up || self == Polarization::Plus {
            a
        } else {
            -a
        }
    }
}

/// Product of `sx` eigenstates, written as a string of `+` and `-`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpinConfig(pub Vec<Polarization>);

impl FromStr for SpinConfig {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spins = s
            .chars()
            .map(|c| match c {
                '+' => Ok(Polarization::Plus),
                '-' => Ok(Polarization::Minus),
                other => Err(DynamicsError::BadInitialState(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if spins.is_empty() {
            return Err(DynamicsError::BadInitialState("empty spin configuration".into()));
        }
        Ok(SpinConfig(spins))
    }
}

impl TryFrom<String> for SpinConfig {
    type Error = DynamicsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SpinConfig> for String {
    fn from(c: SpinConfig) -> String {
        c.0.iter().map(|p| if *p == Polarization::Plus { '+' } else { '-' }).collect()
    }
}

fn product_state(initial: &[Polarization]) -> Vec<C64> {
    let n = initial.len();
    (0..1usize << n)
        .map(|s| {
            let a: f64 = initial.iter().enumerate().map(|(j, p)| p.amplitude(s >> j & 1 == 1)).product();
            C64::new(a, 0.0)
        })
        .collect()
}

/// `<sx_j>` for every site of a state laid out as `[block][spin bits]`.
fn sx_expectations(psi: &[C64], n_spins: usize) -> Vec<f64> {
    let width = 1usize << n_spins;
    (0..n_spins)
        .map(|j| {
            let flip = 1usize << j;
            psi.chunks_exact(width)
                .map(|block| block.iter().enumerate().map(|(s, a)| (block[s ^ flip].conj() * a).re).sum::<f64>())
                .sum()
        })
        .collect()
}

fn state_norm(psi: &[C64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Where `a_n^+` sends an occupation tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Raise {
    Inside(usize),
    Outside(usize),
}

/// One phonon mode with its per-ion coupling amplitudes `g_jn`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhononMode {
    pub frequency: f64,
    pub branch: Branch,
    pub couplings: Vec<f64>,
}

/// Spins times phonon occupation tuples with at most `max_total_phonons`
/// quanta in total.
#[derive(Debug, Clone)]
pub struct TruncatedHilbertSpace {
    n_spins: usize,
    modes: Vec<PhononMode>,
    max_total_phonons: usize,
    laser: LaserConfig,
    phases: Vec<f64>,
    occupations: Vec<Vec<u8>>,
    raise: Vec<Vec<Raise>>,
    n_outside: usize,
}

fn tuples_with_total(n_modes: usize, total: usize) -> Vec<Vec<u8>> {
    if n_modes == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in tuples_with_total(n_modes - 1, total - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

impl TruncatedHilbertSpace {
    pub fn new(spectrum: &PhononSpectrum, laser: &LaserConfig, max_total_phonons: usize) -> Result<Self, DynamicsError> {
        laser.validate()?;
        if max_total_phonons == 0 || max_total_phonons > 4 {
            return Err(DynamicsError::InvalidParameter(format!(
                "max_total_phonons must lie in 1..=4, got {max_total_phonons}"
            )));
        }
        let n = spectrum.n_ions();
        if n > MAX_FULL_SPINS {
            return Err(DynamicsError::TooLarge(n));
        }
        let rho = laser.length_ratio(spectrum.crystal.trap().alpha_y);
        let modes: Vec<PhononMode> = (0..spectrum.n_modes())
            .map(|m| {
                let frequency = spectrum.frequencies[m];
                let scale = rho / (2.0 * frequency).sqrt();
                let couplings = (0..n)
                    .map(|j| (laser.kx * spectrum.amplitude(j, 0, m) + laser.ky * spectrum.amplitude(j, 1, m)) * scale)
                    .collect();
                PhononMode { frequency, branch: spectrum.branches[m], couplings }
            })
            .collect();
        let phases = spectrum.crystal.positions().iter().map(|r| laser.kx * r.x + laser.ky * r.y).collect();

        let occupations: Vec<Vec<u8>> =
            (0..=max_total_phonons).flat_map(|t| tuples_with_total(modes.len(), t)).collect();
        let outside: Vec<Vec<u8>> = tuples_with_total(modes.len(), max_total_phonons + 1);
        let inside_index: HashMap<&[u8], usize> =
            occupations.iter().enumerate().map(|(i, o)| (o.as_slice(), i)).collect();
        let outside_index: HashMap<&[u8], usize> =
            outside.iter().enumerate().map(|(i, o)| (o.as_slice(), i)).collect();
        let raise = occupations
            .iter()
            .map(|occ| {
                (0..modes.len())
                    .map(|m| {
                        let mut up = occ.clone();
                        up[m] += 1;
                        match inside_index.get(up.as_slice()) {
                            Some(&i) => Raise::Inside(i),
                            None => Raise::Outside(outside_index[up.as_slice()]),
                        }
                    })
                    .collect()
            })
            .collect();

        Ok(TruncatedHilbertSpace {
            n_spins: n,
            modes,
            max_total_phonons,
            laser: *laser,
            phases,
            occupations,
            raise,
            n_outside: outside.len(),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn modes(&self) -> &[PhononMode] {
        &self.modes
    }

    pub fn max_total_phonons(&self) -> usize {
        self.max_total_phonons
    }

    pub fn n_phonon_states(&self) -> usize {
        self.occupations.len()
    }

    pub fn dimension(&self) -> usize {
        self.n_phonon_states() << self.n_spins
    }

    pub fn laser(&self) -> &LaserConfig {
        &self.laser
    }

    /// `delta_n = w_n - beat`.
    pub fn detunings(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.frequency - self.laser.beat).collect()
    }

    /// `A_n` evaluated on the sz configuration `spins`.
    fn drive(&self, mode: usize, spins: usize) -> C64 {
        let g = &self.modes[mode].couplings;
        let sum: C64 = (0..self.n_spins)
            .map(|j| {
                let sz = if spins >> j & 1 == 1 { 1.0 } else { -1.0 };
                C64::from_polar(g[j] * sz, self.phases[j])
            })
            .sum();
        C64::new(0.0, 0.5 * self.laser.rabi) * sum
    }

    fn drives(&self) -> Vec<Vec<C64>> {
        (0..1usize << self.n_spins).map(|s| (0..self.modes.len()).map(|m| self.drive(m, s)).collect()).collect()
    }

    /// Phonon block of `H'` for one spin configuration.
    fn block_hamiltonian(&self, drives: &[C64]) -> DMatrix<C64> {
        let dim = self.n_phonon_states();
        let detunings = self.detunings();
        let mut h = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for (i, occ) in self.occupations.iter().enumerate() {
            h[(i, i)] = C64::new(occ.iter().zip(&detunings).map(|(&k, d)| k as f64 * d).sum(), 0.0);
            for (m, raise) in self.raise[i].iter().enumerate() {
                if let Raise::Inside(r) = *raise {
                    let amp = drives[m] * (occ[m] as f64 + 1.0).sqrt();
                    h[(r, i)] += amp;
                    h[(i, r)] += amp.conj();
                }
            }
        }
        h
    }

    /// Smallest detuning among modes that the laser actually couples to.
    fn min_coupled_detuning(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| self.laser.rabi > 0.0 && m.couplings.iter().any(|g| *g != 0.0))
            .map(|m| (m.frequency - self.laser.beat).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `(||P_out H psi|| / min |delta|)^2`: first-order estimate of the
    /// population the coupling pushes out of the truncated space, from the
    /// amplitude it generates over the energy cost of getting there.
    fn leakage(&self, psi: &[C64], drives: &[Vec<C64>]) -> f64 {
        let min_detuning = self.min_coupled_detuning();
        if min_detuning.is_infinite() {
            return 0.0;
        }
        let width = 1usize << self.n_spins;
        let mut total = 0.0;
        let mut out = vec![C64::new(0.0, 0.0); self.n_outside];
        for (s, drive) in drives.iter().enumerate() {
            out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for (i, occ) in self.occupations.iter().enumerate() {
                for (m, raise) in self.raise[i].iter().enumerate() {
                    if let Raise::Outside(o) = *raise {
                        out[o] += drive[m] * (occ[m] as f64 + 1.0).sqrt() * psi[i * width + s];
                    }
                }
            }
            total += out.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        total / (min_detuning * min_detuning)
    }
}

/// Per-site `<sx_j(t)>` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `sx[t][j]`
    pub sx: Vec<Vec<f64>>,
    /// State norm at each time (full evolution only).
    pub norms: Option<Vec<f64>>,
    /// Largest truncation-leakage estimate along the run (full evolution only).
    pub leakage: Option<f64>,
}

impl Trajectory {
    pub fn n_sites(&self) -> usize {
        self.sx.first().map_or(0, |v| v.len())
    }

    pub fn site(&self, j: usize) -> Vec<f64> {
        self.sx.iter().map(|v| v[j]).collect()
    }

    /// Largest `|<sx_j>|` difference over sites and shared times.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.sx
            .iter()
            .zip(&other.sx)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `|norm - 1|` along the run.
    pub fn norm_drift(&self) -> Option<f64> {
        self.norms.as_ref().map(|n| n.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max))
    }

    /// `t,sx_1,...,sx_N` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.n_sites() {
            out.push_str(&format!(",sx_{j}"));
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.sx) {
            out.push_str(&format!("{t:.16e}"));
            for v in row {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `0, dt, 2 dt, ...` up to and including `t_max`.
pub fn time_grid(t_max: f64, dt_out: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(DynamicsError::InvalidTime(format!("t_max must be finite and non-negative, got {t_max}")));
    }
    if !(dt_out.is_finite() && dt_out > 0.0) {
        return Err(DynamicsError::InvalidTime(format!("dt_out must be positive, got {dt_out}")));
    }
    let steps = (t_max / dt_out - 1e-9).ceil().max(0.0) as usize;
    if steps > 10_000_000 {
        return Err(DynamicsError::InvalidTime(format!("{steps} output times requested")));
    }
    Ok((0..=steps).map(|i| (i as f64 * dt_out).min(t_max)).collect())
}

fn check_initial(initial: &[Polarization], n: usize) -> Result<(), DynamicsError> {
    if initial.len() != n {
        return Err(DynamicsError::BadInitialState(format!("{} spins given for {} sites", initial.len(), n)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagator {
    /// Exact propagation of the time-independent frame Hamiltonian.
    Spectral,
    /// Adaptive Dormand-Prince integration of the explicit `H(t)`.
    RungeKutta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullOptions {
    pub propagator: Propagator,
    pub tolerances: Tolerances,
    pub leakage_limit: f64,
}

impl Default for FullOptions {
    fn default() -> Self {
        FullOptions { propagator: Propagator::Spectral, tolerances: Tolerances::default(), leakage_limit: LEAKAGE_LIMIT }
    }
}

/// Spin-phonon evolution from the phonon vacuum and a product of `sx`
/// eigenstates.
pub fn evolve_full(
    space: &TruncatedHilbertSpace,
    initial: &[Polarization],
    t_max: f64,
    dt_out: f64,
) -> Result<Trajectory, DynamicsError> {
    evolve_full_with(space, initial, t_max, dt_out, &FullOptions::default())
}

pub fn evolve_full_with(
    space: &TruncatedHilbertSpace,
    initial: &[Polarization],
    t_max: f64,
    dt_out: f64,
    options: &FullOptions,
) -> Result<Trajectory, DynamicsError> {
    let n = space.n_spins();
    check_initial(initial, n)?;
    let times = time_grid(t_max, dt_out)?;
    let spins = product_state(initial);
    let width = 1usize << n;
    let drives = space.drives();

    let mut sx = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    let mut leakage: f64 = 0.0;
    let mut observe = |psi: &[C64]| {
        sx.push(sx_expectations(psi, n));
        norms.push(state_norm(psi));
        leakage = leakage.max(space.leakage(psi, &drives));
    };

    match options.propagator {
        Propagator::Spectral => {
            // the initial state has phonon-vacuum (index 0) components only
            let blocks: Vec<(Vec<f64>, DMatrix<C64>, Vec<C64>)> = drives
                .iter()
                .enumerate()
                .map(|(s, d)| {
                    let eig = SymmetricEigen::new(space.block_hamiltonian(d));
                    let vectors = eig.eigenvectors;
                    let coeffs = (0..vectors.ncols()).map(|k| vectors[(0, k)].conj() * spins[s]).collect();
                    (eig.eigenvalues.iter().copied().collect(), vectors, coeffs)
                })
                .collect();
            let mut psi = vec![C64::new(0.0, 0.0); space.dimension()];
            for &t in &times {
                for (s, (values, vectors, coeffs)) in blocks.iter().enumerate() {
                    let evolved: Vec<C64> =
                        coeffs.iter().zip(values).map(|(c, l)| c * C64::from_polar(1.0, -l * t)).collect();
                    for i in 0..vectors.nrows() {
                        psi[i * width + s] = (0..vectors.ncols()).map(|k| vectors[(i, k)] * evolved[k]).sum();
                    }
                }
                observe(&psi);
            }
        }
        Propagator::RungeKutta => {
            let detunings = space.detunings();
            let mut phases = vec![C64::new(0.0, 0.0); detunings.len()];
            let rhs = |t: f64, x: &[C64], dx: &mut [C64]| {
                for (p, d) in phases.iter_mut().zip(&detunings) {
                    *p = C64::from_polar(1.0, d * t);
                }
                dx.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                for (i, occ) in space.occupations.iter().enumerate() {
                    for (m, raise) in space.raise[i].iter().enumerate() {
                        if let Raise::Inside(r) = *raise {
                            let root = (occ[m] as f64 + 1.0).sqrt();
                            for (s, drive) in drives.iter().enumerate() {
                                let up = drive[m] * phases[m] * root;
                                dx[r * width + s] += up * x[i * width + s];
                                dx[i * width + s] += up.conj() * x[r * width + s];
                            }
                        }
                    }
                }
                // -i H psi
                dx.iter_mut().for_each(|v| *v = C64::new(v.im, -v.re));
            };
            let min_detuning = detunings.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min).max(1e-3);
            let mut solver = DormandPrince::new(rhs, space.dimension(), options.tolerances, 0.01 / min_detuning);
            let mut psi = vec![C64::new(0.0, 0.0); space.dimension()];
            psi[..width].copy_from_slice(&spins);
            let mut t = 0.0;
            for &stop in &times {
                solver.integrate(&mut t, &mut psi, stop);
                observe(&psi);
            }
        }
    }

    if leakage > options.leakage_limit {
        return Err(DynamicsError::TruncationOverflow { leakage });
    }
    Ok(Trajectory { times, sx, norms: Some(norms), leakage: Some(leakage) })
}

/// Exact evolution under `H = sum_{j<k} J_jk sz_j sz_k - h sum_j sx_j`.
pub fn evolve_effective(
    couplings: &CouplingMatrix,
    h: f64,
    initial: &[Polarization],
    t_max: f64,
    dt_out: f64,
) -> Result<Trajectory, DynamicsError> {
    let n = couplings.n_spins();
    if n > MAX_EFFECTIVE_SPINS {
        return Err(DynamicsError::TooLarge(n));
    }
    check_initial(initial, n)?;
    if !h.is_finite() {
        return Err(DynamicsError::InvalidParameter(format!("field must be finite, got {h}")));
    }
    let times = time_grid(t_max, dt_out)?;
    let op = IsingOperator::from_pair_couplings(&couplings.matrix, h);
    let mut propagator = KrylovPropagator::new(&op, 1e-13);
    let mut psi = product_state(initial);
    let mut sx = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &stop in &times {
        propagator.advance(&mut psi, stop - t);
        t = stop;
        sx.push(sx_expectations(&psi, n));
    }
    Ok(Trajectory { times, sx, norms: None, leakage: None })
}

/// Finite-temperature correction `eps` in `<sx_j> = <sx_j>_eff (1 - eps)`:
///
/// ```text
/// eps_j = sum_n nbar_n rabi^2 eta_n^2 (M_jn)^2 / delta_n^2
/// ```
///
/// over transverse modes, with the proportionality constant set to one.
/// `occupations` lists `nbar_n` in transverse-mode order.
pub fn thermal_error(
    spectrum: &PhononSpectrum,
    laser: &LaserConfig,
    occupations: &[f64],
    site: usize,
) -> Result<f64, DynamicsError> {
    let modes: Vec<usize> = spectrum.modes_of(Branch::Transverse).collect();
    if occupations.len() != modes.len() {
        return Err(DynamicsError::InvalidParameter(format!(
            "{} occupations for {} transverse modes",
            occupations.len(),
            modes.len()
        )));
    }
    if occupations.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(DynamicsError::InvalidParameter("occupations must be non-negative".into()));
    }
    if site >= spectrum.n_ions() {
        return Err(DynamicsError::InvalidParameter(format!("site {site} out of range")));
    }
    let alpha_y = spectrum.crystal.trap().alpha_y;
    Ok(modes
        .iter()
        .zip(occupations)
        .map(|(&m, nbar)| {
            let omega = spectrum.frequencies[m];
            let eta = laser.transverse_lamb_dicke(alpha_y, omega);
            let delta = omega - laser.beat;
            let mj = spectrum.amplitude(site, 1, m);
            nbar * (laser.rabi * eta * mj / delta).powi(2)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{find_equilibrium, TrapConfig};
    use crate::lightforce::{exact_couplings, Provenance};
    use crate::phonons::normal_modes;

    fn spins(s: &str) -> Vec<Polarization> {
        s.parse::<SpinConfig>().unwrap().0
    }

    fn three_ions() -> PhononSpectrum {
        let crystal = find_equilibrium(&TrapConfig::new(3, 1.43, 20.0).unwrap(), 0).unwrap();
        normal_modes(&crystal).unwrap()
    }

    fn laser(kx: f64) -> LaserConfig {
        LaserConfig { kx, ky: 177.0, rabi: 4.0, beat: 24.0, ldy: 0.1, length_ratio: None }
    }

    #[test]
    fn spin_config_parsing() {
        assert_eq!(spins("+-"), vec![Polarization::Plus, Polarization::Minus]);
        assert!("+x-".parse::<SpinConfig>().is_err());
        assert!("".parse::<SpinConfig>().is_err());
        assert_eq!(String::from(SpinConfig(spins("-+-"))), "-+-");
    }

    #[test]
    fn space_dimensions() {
        let spectrum = three_ions();
        let one = TruncatedHilbertSpace::new(&spectrum, &laser(0.0), 1).unwrap();
        assert_eq!(one.n_phonon_states(), 10);
        assert_eq!(one.dimension(), 80);
        let two = TruncatedHilbertSpace::new(&spectrum, &laser(0.0), 2).unwrap();
        assert_eq!(two.n_phonon_states(), 55);
        // with kx = 0 only transverse modes couple
        for mode in one.modes() {
            let coupled = mode.couplings.iter().any(|g| *g != 0.0);
            assert_eq!(coupled, mode.branch == Branch::Transverse);
        }
    }

    #[test]
    fn zero_rabi_is_frozen() {
        let spectrum = three_ions();
        let space = TruncatedHilbertSpace::new(&spectrum, &LaserConfig { rabi: 0.0, ..laser(1.0) }, 1).unwrap();
        let traj = evolve_full(&space, &spins("+--"), 100.0, 10.0).unwrap();
        for row in &traj.sx {
            assert!((row[0] - 1.0).abs() < 1e-14 && (row[1] + 1.0).abs() < 1e-14 && (row[2] + 1.0).abs() < 1e-14);
        }
        assert_eq!(traj.leakage, Some(0.0));
    }

    #[test]
    fn integrator_agrees_with_spectral_propagation() {
        let spectrum = three_ions();
        let space = TruncatedHilbertSpace::new(&spectrum, &laser(2.0), 1).unwrap();
        let exact = evolve_full(&space, &spins("+--"), 60.0, 3.0).unwrap();
        let options = FullOptions { propagator: Propagator::RungeKutta, ..FullOptions::default() };
        let integrated = evolve_full_with(&space, &spins("+--"), 60.0, 3.0, &options).unwrap();
        assert!(exact.max_deviation(&integrated) < 1e-7);
        assert!(integrated.norm_drift().unwrap() < 1e-7);
        assert!(exact.norm_drift().unwrap() < 1e-12);
    }

    #[test]
    fn effective_two_spin_closed_form() {
        let j = 0.3;
        let c = CouplingMatrix {
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, j, j, 0.0]),
            provenance: Provenance::ExactModeSum,
        };
        let traj = evolve_effective(&c, 0.0, &spins("+-"), 20.0, 0.5).unwrap();
        for (t, row) in traj.times.iter().zip(&traj.sx) {
            assert!((row[0] - (2.0 * j * t).cos()).abs() < 1e-10);
            assert!((row[1] + (2.0 * j * t).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn free_field_keeps_x_states() {
        let c = CouplingMatrix { matrix: DMatrix::zeros(3, 3), provenance: Provenance::ExactModeSum };
        let traj = evolve_effective(&c, 0.8, &spins("+-+"), 10.0, 1.0).unwrap();
        for row in &traj.sx {
            assert!((row[0] - 1.0).abs() < 1e-10 && (row[1] + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn effective_size_limit() {
        let c = CouplingMatrix { matrix: DMatrix::zeros(15, 15), provenance: Provenance::ExactModeSum };
        let init = vec![Polarization::Plus; 15];
        assert_eq!(evolve_effective(&c, 0.0, &init, 1.0, 1.0), Err(DynamicsError::TooLarge(15)));
    }

    #[test]
    fn thermal_error_is_linear() {
        let spectrum = three_ions();
        let l = laser(0.0);
        assert_eq!(thermal_error(&spectrum, &l, &[0.0; 3], 0).unwrap(), 0.0);
        let e1 = thermal_error(&spectrum, &l, &[1.0; 3], 1).unwrap();
        let e2 = thermal_error(&spectrum, &l, &[2.0; 3], 1).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-15);
        assert!(thermal_error(&spectrum, &l, &[1.0; 2], 0).is_err());
        assert!(thermal_error(&spectrum, &l, &[-1.0; 3], 0).is_err());
    }

    #[test]
    fn weak_coupling_follows_effective_model() {
        let spectrum = three_ions();
        let l = laser(0.0);
        let space = TruncatedHilbertSpace::new(&spectrum, &l, 1).unwrap();
        let j = exact_couplings(&spectrum.crystal, &spectrum, &l).unwrap();
        let full = evolve_full(&space, &spins("+--"), 4000.0, 100.0).unwrap();
        let eff = evolve_effective(&j, 0.0, &spins("+--"), 4000.0, 100.0).unwrap();
        assert!(full.max_deviation(&eff) < 0.05);
    }
}
