//! Dense diagonalization for small rings, used as an oracle for Lanczos.

use nalgebra::DMatrix;

use super::lanczos::EigenResult;
use super::model::SpinModel;
use super::EdError;
use crate::linalg::sorted_symmetric_eigen;

pub const DENSE_MAX_SPINS: usize = 12;

/// Builds the Hamiltonian entry by entry from the circulant pair couplings,
/// independently of the bit-rotation shortcut used by the sparse operator.
fn dense_hamiltonian(model: &SpinModel) -> Result<DMatrix<f64>, EdError> {
    let n = model.n_spins();
    if n > DENSE_MAX_SPINS {
        return Err(EdError::TooLarge(n));
    }
    let c = model.pair_couplings();
    let dim = 1usize << n;
    let sz = |b: usize, j: usize| if b & (1 << j) != 0 { 1.0 } else { -1.0 };
    let mut h = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let mut e = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                e += c[(j, k)] * sz(b, j) * sz(b, k);
            }
            h[(b ^ (1 << j), b)] = -model.field();
        }
        h[(b, b)] = e;
    }
    Ok(h)
}

/// Every eigenvalue, ascending.
pub fn dense_spectrum(model: &SpinModel) -> Result<Vec<f64>, EdError> {
    let h = dense_hamiltonian(model)?;
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Lowest `k` eigenpairs (extended to close a degenerate cluster).
pub fn dense_ground(model: &SpinModel, k: usize) -> Result<EigenResult, EdError> {
    let h = dense_hamiltonian(model)?;
    let dim = h.nrows();
    let (values, vectors) = sorted_symmetric_eigen(h.clone());
    let keep = k.min(dim);
    let result = EigenResult {
        n_spins: model.n_spins(),
        values: values.clone(),
        vectors: (0..dim).map(|i| vectors.column(i).iter().copied().collect()).collect(),
        residuals: (0..dim).map(|i| (&h * vectors.column(i) - vectors.column(i) * values[i]).norm()).collect(),
        cluster_threshold: 1e-8 * model.norm_bound(),
    };
    Ok(result.truncated(keep))
}
