//! Krylov-subspace propagation `exp(-i H t) psi` for real symmetric,
//! matrix-free Hamiltonians acting on complex states.

use nalgebra::{Complex, DMatrix};

use crate::linalg::{sorted_symmetric_eigen, SymmetricOperator};

type C64 = Complex<f64>;

fn apply_complex<O: SymmetricOperator + ?Sized>(op: &O, x: &[C64], y: &mut [C64], buf: &mut [Vec<f64>; 3]) {
    let [re, im, out] = buf;
    for (i, v) in x.iter().enumerate() {
        re[i] = v.re;
        im[i] = v.im;
    }
    op.apply(re, out);
    for (yi, o) in y.iter_mut().zip(out.iter()) {
        yi.re = *o;
    }
    op.apply(im, out);
    for (yi, o) in y.iter_mut().zip(out.iter()) {
        yi.im = *o;
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub struct KrylovPropagator<'a, O: SymmetricOperator + ?Sized> {
    op: &'a O,
    subspace: usize,
    tolerance: f64,
    step: f64,
    buf: [Vec<f64>; 3],
}

impl<'a, O: SymmetricOperator + ?Sized> KrylovPropagator<'a, O> {
    pub fn new(op: &'a O, tolerance: f64) -> Self {
        let dim = op.dim();
        let subspace = 30.min(dim);
        let step = 1.0 / op.norm_bound().max(1e-300);
        KrylovPropagator { op, subspace, tolerance, step, buf: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]] }
    }

    /// Advances `psi` by `duration` in place, splitting into sub-steps whose
    /// Krylov error estimate stays below the tolerance.
    pub fn advance(&mut self, psi: &mut [C64], duration: f64) {
        let mut remaining = duration;
        while remaining > 0.0 {
            let tau = self.step.min(remaining);
            match self.try_step(psi, tau) {
                Some(next) => {
                    psi.copy_from_slice(&next);
                    remaining -= tau;
                    if tau >= self.step {
                        self.step *= 1.5;
                    }
                }
                None => self.step = 0.5 * tau,
            }
        }
    }

    fn try_step(&mut self, psi: &[C64], tau: f64) -> Option<Vec<C64>> {
        let dim = psi.len();
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Some(psi.to_vec());
        }
        let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|x| x / beta0).collect()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut tail = 0.0;
        for j in 0..self.subspace {
            apply_complex(self.op, &basis[j], &mut w, &mut self.buf);
            let alpha = dot(&basis[j], &w).re;
            alphas.push(alpha);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let beta = norm(&w);
            if beta <= 1e-14 * self.op.norm_bound().max(1.0) || j + 1 == self.subspace {
                tail = if j + 1 == self.subspace { beta } else { 0.0 };
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                alphas[a]
            } else if a + 1 == b {
                betas[a]
            } else if b + 1 == a {
                betas[b]
            } else {
                0.0
            }
        });
        let (values, vectors) = sorted_symmetric_eigen(t);
        // c = Q exp(-i L tau) Q^T e_1
        let coeffs: Vec<C64> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|k| C64::from_polar(vectors[(0, k)] * vectors[(a, k)], -values[k] * tau))
                    .sum()
            })
            .collect();
        let error = tail * coeffs[m - 1].norm();
        if error > self.tolerance {
            return None;
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (c, v) in coeffs.iter().zip(&basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi * beta0;
            }
        }
        Some(out)
    }
}
