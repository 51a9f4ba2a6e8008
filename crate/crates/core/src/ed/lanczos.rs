//! Lanczos eigensolver with full reorthogonalization and deflation.
//!
//! A single Krylov space holds one vector per distinct eigenvalue, so
//! degenerate multiplets are resolved by repeated rounds, each started from a
//! fresh random vector orthogonal to every eigenvector already locked. The
//! solver stops once a deflated round finds nothing below the k-th locked
//! value, which also completes the multiplet straddling position k.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{SpinModel, MAX_SPINS};
use super::operator::IsingOperator;
use super::EdError;
use crate::linalg::{axpy, dot, norm, sorted_symmetric_eigen, SymmetricOperator};

/// Upper limit on `k` for the ground-state drivers.
pub const MAX_EIGENPAIRS: usize = 12;
/// Memory budget for the Krylov basis, in bytes.
const BASIS_MEMORY: usize = 1_500_000_000;
/// A certification round may stop once its lowest Ritz pair has a residual
/// below this (relative) and lies clearly above the k-th locked value.
const CERTIFY_RESIDUAL: f64 = 1e-4;
/// Ritz residuals are re-examined every this many iterations.
const CHECK_INTERVAL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub seed: u64,
    /// Ritz residual target, relative to the operator norm bound.
    pub tolerance: f64,
    /// Eigenvalues closer than this (relative to the norm bound) form one
    /// degenerate cluster.
    pub cluster_threshold: f64,
    pub max_basis: usize,
    pub max_rounds: usize,
    /// Refuse to lock more eigenvectors than this.
    pub max_states: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            seed: 0,
            tolerance: 1e-9,
            cluster_threshold: 1e-8,
            max_basis: 400,
            max_rounds: 400,
            max_states: 64,
        }
    }
}

/// Lowest eigenpairs in ascending order.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub n_spins: usize,
    pub values: Vec<f64>,
    /// Normalized eigenvectors in the `2^n` computational basis.
    pub vectors: Vec<Vec<f64>>,
    /// `||H v - lambda v||` for each pair.
    pub residuals: Vec<f64>,
    /// Absolute gap below which eigenvalues are grouped as degenerate.
    pub cluster_threshold: f64,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    /// Index ranges of degenerate clusters, measured from each cluster's
    /// lowest member.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.values.len() {
            if i == self.values.len() || self.values[i] - self.values[start] > self.cluster_threshold {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    pub fn ground_cluster(&self) -> Range<usize> {
        self.clusters().into_iter().next().unwrap_or(0..0)
    }

    pub fn ground_degeneracy(&self) -> usize {
        self.ground_cluster().len()
    }

    /// Keeps only the first `k` pairs, extended to close a cluster cut at `k`.
    pub fn truncated(mut self, k: usize) -> Self {
        let keep = self.clusters().into_iter().map(|r| r.end).find(|&end| end >= k).unwrap_or(self.len());
        self.values.truncate(keep);
        self.vectors.truncate(keep);
        self.residuals.truncate(keep);
        self
    }
}

/// Lowest `k` eigenpairs of a ring model with default options.
pub fn lanczos_ground(model: &SpinModel, k: usize) -> Result<EigenResult, EdError> {
    lanczos_ground_with(model, k, &LanczosOptions::default())
}

pub fn lanczos_ground_with(model: &SpinModel, k: usize, options: &LanczosOptions) -> Result<EigenResult, EdError> {
    if !(1..=MAX_EIGENPAIRS).contains(&k) {
        return Err(EdError::InvalidParameter(format!("k = {k} outside 1..={MAX_EIGENPAIRS}")));
    }
    if model.n_spins() > MAX_SPINS {
        return Err(EdError::SizeOutOfRange(model.n_spins()));
    }
    let op = IsingOperator::from_model(model);
    let mut result = lanczos_lowest(&op, k, options)?;
    result.n_spins = model.n_spins();
    Ok(result)
}

struct Round {
    converged: Vec<(f64, Vec<f64>)>,
    restart: Option<Vec<f64>>,
}

/// Lowest `k` eigenpairs of any symmetric operator (more when the k-th
/// eigenvalue is degenerate). `n_spins` of the result is set to
/// `log2(dim)`.
pub fn lanczos_lowest<O: SymmetricOperator + ?Sized>(
    op: &O,
    k: usize,
    options: &LanczosOptions,
) -> Result<EigenResult, EdError> {
    let dim = op.dim();
    let scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let cluster = options.cluster_threshold * scale;
    let tolerance = options.tolerance * scale;
    let max_basis = options.max_basis.min(BASIS_MEMORY / (8 * dim.max(1))).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut values: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut start: Option<Vec<f64>> = None;

    for _ in 0..options.max_rounds {
        if locked.len() == dim {
            return Ok(collect(op, values, locked, k, cluster));
        }
        let kth = kth_value(&values, k);
        let want = k.saturating_sub(locked.len()).max(1);
        let v0 = start.take().unwrap_or_else(|| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        let floor = kth.map(|v| v + cluster);
        let round = run_round(op, &locked, v0, want, floor, max_basis, tolerance, scale);

        let mut found_below = false;
        for (value, vector) in round.converged {
            if let Some(kth) = kth {
                if value > kth + cluster {
                    continue;
                }
            }
            found_below = true;
            values.push(value);
            locked.push(vector);
        }
        if locked.len() > options.max_states {
            return Err(EdError::NoConvergence(format!(
                "more than {} states below the requested level (degenerate cluster too large)",
                options.max_states
            )));
        }
        start = round.restart;
        // a deflated round that converged without finding anything new
        // certifies that no eigenvalue below the k-th one is missing
        if kth.is_some() && !found_below && start.is_none() {
            return Ok(collect(op, values, locked, k, cluster));
        }
    }
    Err(EdError::NoConvergence(format!("no certified result after {} rounds", options.max_rounds)))
}

fn kth_value(values: &[f64], k: usize) -> Option<f64> {
    if values.len() < k {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[k - 1])
}

fn collect<O: SymmetricOperator + ?Sized>(
    op: &O,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    k: usize,
    cluster: f64,
) -> EigenResult {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut w = vec![0.0; op.dim()];
    let mut result = EigenResult {
        n_spins: op.dim().trailing_zeros() as usize,
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
        cluster_threshold: cluster,
    };
    for i in order {
        op.apply(&vectors[i], &mut w);
        axpy(-values[i], &vectors[i], &mut w);
        result.residuals.push(norm(&w));
        result.values.push(values[i]);
        result.vectors.push(vectors[i].clone());
    }
    result.truncated(k)
}

/// Gram-Schmidt against both sets, with a second pass only when the first
/// removed most of the vector.
fn orthogonalize(w: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) -> f64 {
    let mut before = norm(w);
    for _ in 0..2 {
        for v in locked.iter().chain(basis) {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
        let after = norm(w);
        if after > 0.7 * before {
            return after;
        }
        before = after;
    }
    before
}

#[allow(clippy::too_many_arguments)]
fn run_round<O: SymmetricOperator + ?Sized>(
    op: &O,
    locked: &[Vec<f64>],
    mut v: Vec<f64>,
    want: usize,
    floor: Option<f64>,
    max_basis: usize,
    tolerance: f64,
    scale: f64,
) -> Round {
    let dim = op.dim();
    let available = dim - locked.len();
    let limit = max_basis.min(available);
    let n0 = orthogonalize(&mut v, locked, &[]);
    if n0 <= 1e-12 {
        return Round { converged: Vec::new(), restart: None };
    }
    v.iter_mut().for_each(|x| *x /= n0);

    let mut basis = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    loop {
        let mut w = vec![0.0; dim];
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        // three-term recurrence first, so the reorthogonalization only has
        // rounding-level components left to remove
        axpy(-alpha, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        let beta = orthogonalize(&mut w, locked, &basis);
        let m = alphas.len();
        let breakdown = beta <= 1e-11 * scale || m == available;
        let full = m >= limit;
        if breakdown || full || m.is_multiple_of(CHECK_INTERVAL) {
            let t = DMatrix::from_fn(m, m, |a, b| {
                if a == b {
                    alphas[a]
                } else if a.abs_diff(b) == 1 {
                    betas[a.min(b)]
                } else {
                    0.0
                }
            });
            let (ritz, s) = sorted_symmetric_eigen(t);
            let residual = |i: usize| if breakdown { 0.0 } else { beta * s[(m - 1, i)].abs() };
            let converged = (0..m).take_while(|&i| residual(i) <= tolerance).count();
            if let Some(floor) = floor {
                // the lowest Ritz pair has settled on an eigenvalue above the floor
                if residual(0) <= CERTIFY_RESIDUAL * scale && ritz[0] - residual(0) > floor {
                    return Round { converged: Vec::new(), restart: None };
                }
            }
            if converged >= want || breakdown || full {
                let ritz_vector = |i: usize| {
                    let mut x = vec![0.0; dim];
                    for (a, b) in basis.iter().enumerate() {
                        axpy(s[(a, i)], b, &mut x);
                    }
                    let n = orthogonalize(&mut x, locked, &[]);
                    x.iter_mut().for_each(|e| *e /= n);
                    x
                };
                let take = converged.min(want);
                let found = (0..take).map(|i| (ritz[i], ritz_vector(i))).collect();
                let restart = (take < want && !breakdown && take < m).then(|| ritz_vector(take));
                return Round { converged: found, restart };
            }
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::model::{build_spin_model, Tail};

    #[test]
    fn ferromagnetic_ring() {
        let model = build_spin_model(-1.0, 0.0, 0.0, 8, 2, Tail::None).unwrap();
        let r = lanczos_ground(&model, 1).unwrap();
        assert!((r.ground_energy() + 8.0).abs() < 1e-10);
        assert_eq!(r.ground_degeneracy(), 2);
    }

    #[test]
    fn dimerized_antiferromagnet() {
        let model = build_spin_model(0.0, 1.0, 0.0, 8, 2, Tail::None).unwrap();
        let r = lanczos_ground(&model, 1).unwrap();
        assert!((r.ground_energy() + 8.0).abs() < 1e-10);
        assert_eq!(r.ground_degeneracy(), 4);
    }

    #[test]
    fn eigenpairs_are_orthonormal_with_small_residuals() {
        let model = build_spin_model(-1.0, 0.6, 0.8, 10, 4, Tail::Dipolar).unwrap();
        let r = lanczos_ground(&model, 6).unwrap();
        assert!(r.len() >= 6);
        let scale = model.norm_bound();
        for (i, v) in r.vectors.iter().enumerate() {
            assert!(r.residuals[i] <= 1e-8 * scale);
            for (j, u) in r.vectors.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - expected).abs() < 1e-8);
            }
        }
        assert!(r.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let model = build_spin_model(-1.0, 0.45, 0.3, 8, 4, Tail::Dipolar).unwrap();
        let a = lanczos_ground(&model, 3).unwrap();
        let b = lanczos_ground(&model, 3).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn k_is_bounded() {
        let model = build_spin_model(-1.0, 0.5, 0.5, 8, 2, Tail::None).unwrap();
        assert!(lanczos_ground(&model, 0).is_err());
        assert!(lanczos_ground(&model, 13).is_err());
    }
}
