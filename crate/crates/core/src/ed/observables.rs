//! sz-diagonal observables: magnetization, correlators, structure factor and
//! the fluorescence signal.
//!
//! All of them depend only on basis-state probabilities, so a degenerate
//! cluster is summarized by the uniform average of its `|v|^2`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lanczos::EigenResult;
use super::operator::spin;
use super::EdError;
use crate::crystal::IonCrystal;
use crate::Vec3;

/// Probability distribution over sz basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDistribution {
    n_spins: usize,
    states: Vec<u32>,
    weights: Vec<f64>,
}

impl ZDistribution {
    /// Uniform mixture of the given basis states.
    pub fn uniform(n_spins: usize, states: &[u32]) -> Self {
        let w = 1.0 / states.len() as f64;
        ZDistribution { n_spins, states: states.to_vec(), weights: vec![w; states.len()] }
    }

    /// Uniform mixture of the pure states `vectors` (each normalized).
    pub fn from_vectors(n_spins: usize, vectors: &[&[f64]]) -> Self {
        let dim = 1usize << n_spins;
        let mut probability = vec![0.0; dim];
        for v in vectors {
            for (p, a) in probability.iter_mut().zip(v.iter()) {
                *p += a * a / vectors.len() as f64;
            }
        }
        let (states, weights) = probability
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(b, p)| (b as u32, p))
            .unzip();
        ZDistribution { n_spins, states, weights }
    }

    /// The ground cluster of an eigen-solution.
    pub fn ground(result: &EigenResult) -> Self {
        let vectors: Vec<&[f64]> = result.vectors[result.ground_cluster()].iter().map(|v| v.as_slice()).collect();
        Self::from_vectors(result.n_spins, &vectors)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn magnetization(&self) -> Vec<f64> {
        (0..self.n_spins)
            .map(|j| self.states.iter().zip(&self.weights).map(|(&b, w)| w * spin(b, j)).sum())
            .collect()
    }

    /// `C_jk = <sz_j sz_k>`, with ones on the diagonal.
    pub fn correlations(&self) -> DMatrix<f64> {
        let n = self.n_spins;
        let mut c = DMatrix::zeros(n, n);
        let mut s = vec![0.0; n];
        for (&b, &w) in self.states.iter().zip(&self.weights) {
            for (j, sj) in s.iter_mut().enumerate() {
                *sj = spin(b, j);
            }
            for j in 0..n {
                let wj = w * s[j];
                for k in j..n {
                    c[(j, k)] += wj * s[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                c[(j, k)] = c[(k, j)];
            }
        }
        c
    }
}

impl From<&EigenResult> for ZDistribution {
    fn from(result: &EigenResult) -> Self {
        ZDistribution::ground(result)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservables {
    /// `m_j = <sz_j>`
    pub magnetization: Vec<f64>,
    pub correlations: DMatrix<f64>,
    /// Fluorescence excitation probability `P_j = (1 + m_j) / 2`.
    pub excitation_probability: Vec<f64>,
}

pub fn local_observables(dist: &ZDistribution) -> LocalObservables {
    let magnetization = dist.magnetization();
    let excitation_probability = magnetization.iter().map(|m| 0.5 * (1.0 + m)).collect();
    LocalObservables { magnetization, correlations: dist.correlations(), excitation_probability }
}

/// Commensurate momenta `2 pi m / n`, `m = 0..n`.
pub fn momentum_grid(n: usize) -> Vec<f64> {
    (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFactor {
    pub momenta: Vec<f64>,
    pub raw: Vec<f64>,
    /// `raw` divided by its maximum over `momenta`.
    pub normalized: Vec<f64>,
}

impl StructureFactor {
    /// Raw value at the grid momentum closest to `q`.
    pub fn raw_at(&self, q: f64) -> f64 {
        let i = self
            .momenta
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - q).abs().total_cmp(&(b.1 - q).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.raw[i]
    }
}

/// `S(q) = sum_{j,k} <sz_j sz_k> exp(i q (j - k))`, real because the
/// correlation matrix is symmetric.
pub fn structure_factor(dist: &ZDistribution, momenta: &[f64]) -> StructureFactor {
    let c = dist.correlations();
    let n = dist.n_spins();
    let raw: Vec<f64> = momenta
        .iter()
        .map(|&q| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += c[(j, k)] * (q * (j as f64 - k as f64)).cos();
                }
            }
            s
        })
        .collect();
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized = raw.iter().map(|s| if max > 0.0 { s / max } else { 0.0 }).collect();
    StructureFactor { momenta: momenta.to_vec(), raw, normalized }
}

/// `sum_{ij} exp(i k d.(r_i - r_j)) <(1 + sz_i)(1 + sz_j)>` for detection
/// along the unit vector `direction`.
pub fn fluorescence_spectrum(dist: &ZDistribution, crystal: &IonCrystal, direction: Vec3, k: f64) -> Result<f64, EdError> {
    let n = dist.n_spins();
    if crystal.n_ions() != n {
        return Err(EdError::DimensionMismatch(format!("{} spins but {} ions", n, crystal.n_ions())));
    }
    let m = dist.magnetization();
    let c = dist.correlations();
    let r = crystal.positions();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let phase = k * direction.dot(&(r[i] - r[j]));
            total += phase.cos() * (1.0 + m[i] + m[j] + c[(i, j)]);
        }
    }
    Ok(total)
}
