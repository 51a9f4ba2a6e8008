use nalgebra::DMatrix;

use super::model::SpinModel;
use crate::linalg::SymmetricOperator;

/// `H = diag(E_zz) - h sum_j sx_j` acting on `2^n` amplitudes. The Ising
/// part is precomputed per basis state; the field flips single bits.
#[derive(Debug, Clone)]
pub struct IsingOperator {
    n_spins: usize,
    diagonal: Vec<f64>,
    field: f64,
    norm_bound: f64,
}

#[inline]
pub(crate) fn spin(bits: u32, j: usize) -> f64 {
    if bits >> j & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl IsingOperator {
    /// `H = sum_{j<k} J_jk sz_j sz_k - h sum_j sx_j` for an arbitrary
    /// symmetric pair-coupling matrix.
    pub fn from_pair_couplings(couplings: &DMatrix<f64>, field: f64) -> Self {
        let n = couplings.nrows();
        let diagonal = (0..1u32 << n)
            .map(|b| {
                let mut e = 0.0;
                for j in 0..n {
                    let zj = spin(b, j);
                    for k in (j + 1)..n {
                        e += couplings[(j, k)] * zj * spin(b, k);
                    }
                }
                e
            })
            .collect();
        Self::with_diagonal(n, diagonal, field)
    }

    /// Ring Hamiltonian of a [`SpinModel`], using
    /// `sum_j sz_j sz_{j+d} = n - 2 popcount(b ^ rot_d(b))`.
    pub fn from_model(model: &SpinModel) -> Self {
        let n = model.n_spins();
        let table = model.coupling_table();
        let mask: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let diagonal = (0..1u32 << n)
            .map(|b| {
                let mut e = 0.0;
                for (i, &jd) in table.iter().enumerate() {
                    if jd == 0.0 {
                        continue;
                    }
                    let d = i + 1;
                    let rotated = ((b << d) | (b >> (n - d))) & mask;
                    let broken = (b ^ rotated).count_ones() as f64;
                    e += jd * (n as f64 - 2.0 * broken);
                }
                e
            })
            .collect();
        Self::with_diagonal(n, diagonal, model.field())
    }

    fn with_diagonal(n_spins: usize, diagonal: Vec<f64>, field: f64) -> Self {
        let max_diag = diagonal.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        let norm_bound = max_diag + n_spins as f64 * field.abs();
        IsingOperator { n_spins, diagonal, field, norm_bound }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    /// Dense matrix, for small systems only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.diagonal.len();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        for b in 0..dim {
            for j in 0..self.n_spins {
                m[(b ^ (1 << j), b)] -= self.field;
            }
        }
        m
    }
}

impl SymmetricOperator for IsingOperator {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diagonal).zip(x) {
            *yi = d * xi;
        }
        if self.field == 0.0 {
            return;
        }
        let h = self.field;
        for j in 0..self.n_spins {
            let half = 1usize << j;
            for (ys, xs) in y.chunks_exact_mut(2 * half).zip(x.chunks_exact(2 * half)) {
                let (ylo, yhi) = ys.split_at_mut(half);
                let (xlo, xhi) = xs.split_at(half);
                for i in 0..half {
                    ylo[i] -= h * xhi[i];
                    yhi[i] -= h * xlo[i];
                }
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}
