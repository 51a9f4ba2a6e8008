use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::EdError;
use crate::lightforce::CouplingMatrix;

/// Largest ring handled by the exact-diagonalization routines.
pub const MAX_SPINS: usize = 24;
/// Bulk couplings at a fixed distance may vary by this much (relative)
/// before the circulant reduction is refused.
pub const HOMOGENEITY_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    None,
    Dipolar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSource {
    Parametric,
    GeometryDerived,
}

/// Translation-invariant Ising ring
///
/// ```text
/// H = sum_j sum_{d=1}^{r_max} J(d) sz_j sz_{j+d} - h sum_j sx_j
/// ```
///
/// with periodic indices. Every pair at distance `d < n/2` appears once; an
/// antipodal pair (`d = n/2`) is reached along both directions of the ring
/// and appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    n_spins: usize,
    coupling_table: Vec<f64>,
    field: f64,
    source: ModelSource,
}

impl SpinModel {
    /// `coupling_table[d - 1] = J(d)`.
    pub fn new(n_spins: usize, coupling_table: Vec<f64>, field: f64, source: ModelSource) -> Result<Self, EdError> {
        if !(2..=MAX_SPINS).contains(&n_spins) {
            return Err(EdError::SizeOutOfRange(n_spins));
        }
        if coupling_table.is_empty() || coupling_table.len() > n_spins / 2 {
            return Err(EdError::RangeTooLong { r_max: coupling_table.len(), n: n_spins });
        }
        if !field.is_finite() || coupling_table.iter().any(|j| !j.is_finite()) {
            return Err(EdError::InvalidParameter("couplings and field must be finite".into()));
        }
        Ok(SpinModel { n_spins, coupling_table, field, source })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn coupling_table(&self) -> &[f64] {
        &self.coupling_table
    }

    pub fn r_max(&self) -> usize {
        self.coupling_table.len()
    }

    /// `J(d)`, zero beyond the range.
    pub fn coupling(&self, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            self.coupling_table.get(d - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn source(&self) -> ModelSource {
        self.source
    }

    pub fn with_field(&self, field: f64) -> Self {
        SpinModel { field, ..self.clone() }
    }

    /// Periodic chain distance.
    pub fn distance(&self, j: usize, k: usize) -> usize {
        let d = j.abs_diff(k) % self.n_spins;
        d.min(self.n_spins - d)
    }

    /// Circulant matrix of pair coefficients, i.e. the same Hamiltonian
    /// written as `sum_{j<k} C_jk sz_j sz_k`.
    pub fn pair_couplings(&self) -> DMatrix<f64> {
        let n = self.n_spins;
        DMatrix::from_fn(n, n, |j, k| {
            if j == k {
                return 0.0;
            }
            let forward = (k + n - j) % n;
            self.coupling(forward) + self.coupling(n - forward)
        })
    }

    /// Sum of `|J(d)|` over all bonds plus the field term; bounds `||H||`.
    pub fn norm_bound(&self) -> f64 {
        let n = self.n_spins as f64;
        n * (self.coupling_table.iter().map(|j| j.abs()).sum::<f64>() + self.field.abs())
    }
}

/// Parametric J1-J2 ring. With a dipolar tail, odd distances (cross-rung,
/// ferromagnetic for `j1 < 0`) continue as `j1 / d^3` and even distances
/// (same rung) as `j2 (2/d)^3`.
pub fn build_spin_model(j1: f64, j2: f64, h: f64, n: usize, r_max: usize, tail: Tail) -> Result<SpinModel, EdError> {
    if n % 2 == 1 {
        return Err(EdError::BadArity(n));
    }
    if !(4..=MAX_SPINS).contains(&n) {
        return Err(EdError::SizeOutOfRange(n));
    }
    if !(2..=n / 2).contains(&r_max) {
        return Err(EdError::RangeTooLong { r_max, n });
    }
    let table = (1..=r_max)
        .map(|d| match (d, tail) {
            (1, _) => j1,
            (2, _) => j2,
            (_, Tail::None) => 0.0,
            (d, Tail::Dipolar) if d % 2 == 1 => j1 / (d as f64).powi(3),
            (d, Tail::Dipolar) => j2 * (2.0 / d as f64).powi(3),
        })
        .collect();
    SpinModel::new(n, table, h, ModelSource::Parametric)
}

/// Reduces an open-chain coupling matrix to a ring model by averaging the
/// couplings `J_{j, j+d}` over the bulk: pairs whose two ions both lie in the
/// central half of the chain (the whole chain when it has at most 8 ions).
/// The spread at each distance is the largest deviation from that mean,
/// relative to the mean.
pub fn geometry_model(couplings: &CouplingMatrix, h: f64, n_ring: usize, r_max: usize) -> Result<SpinModel, EdError> {
    if n_ring % 2 == 1 {
        return Err(EdError::BadArity(n_ring));
    }
    let n = couplings.n_spins();
    let (lo, hi) = if n <= 8 { (0, n) } else { (n / 4, n - n / 4) };
    let mut table = Vec::with_capacity(r_max);
    for d in 1..=r_max {
        let values: Vec<f64> = (lo..hi).filter(|j| j + d < hi).map(|j| couplings.get(j, j + d)).collect();
        if values.is_empty() {
            return Err(EdError::RangeTooLong { r_max, n });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let deviation = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let spread = if deviation == 0.0 { 0.0 } else { deviation / mean.abs() };
        if spread > HOMOGENEITY_TOLERANCE {
            return Err(EdError::Inhomogeneous { distance: d, spread });
        }
        table.push(mean);
    }
    if !(4..=MAX_SPINS).contains(&n_ring) {
        return Err(EdError::SizeOutOfRange(n_ring));
    }
    if r_max > n_ring / 2 {
        return Err(EdError::RangeTooLong { r_max, n: n_ring });
    }
    SpinModel::new(n_ring, table, h, ModelSource::GeometryDerived)
}
