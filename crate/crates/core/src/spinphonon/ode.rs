//! Adaptive Dormand-Prince 5(4) integration of complex state vectors.

use nalgebra::Complex;

type C64 = Complex<f64>;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

/// Integrates `dy/dt = f(t, y)` on complex vectors.
pub struct DormandPrince<F> {
    rhs: F,
    tol: Tolerances,
    step: f64,
    k: [Vec<C64>; 7],
    scratch: Vec<C64>,
    next: Vec<C64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<F> DormandPrince<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(rhs: F, dim: usize, tol: Tolerances, initial_step: f64) -> Self {
        let zero = || vec![C64::new(0.0, 0.0); dim];
        DormandPrince {
            rhs,
            tol,
            step: initial_step,
            k: [zero(), zero(), zero(), zero(), zero(), zero(), zero()],
            scratch: zero(),
            next: zero(),
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    fn stage(&mut self, y: &[C64], h: f64, weights: &[(usize, f64)]) {
        for (i, s) in self.scratch.iter_mut().enumerate() {
            let mut acc = y[i];
            for &(stage, w) in weights {
                acc += self.k[stage][i] * (h * w);
            }
            *s = acc;
        }
    }

    /// Advances `y` from `t` to `t_end` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn integrate(&mut self, t: &mut f64, y: &mut [C64], t_end: f64) {
        if self.accepted_steps == 0 {
            (self.rhs)(*t, y, &mut self.k[0]);
        }
        while *t < t_end {
            let h = self.step.min(t_end - *t);
            let t0 = *t;

            self.stage(y, h, &[(0, A21)]);
            (self.rhs)(t0 + C2 * h, &self.scratch, &mut self.k[1]);
            self.stage(y, h, &[(0, A31), (1, A32)]);
            (self.rhs)(t0 + C3 * h, &self.scratch, &mut self.k[2]);
            self.stage(y, h, &[(0, A41), (1, A42), (2, A43)]);
            (self.rhs)(t0 + C4 * h, &self.scratch, &mut self.k[3]);
            self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            (self.rhs)(t0 + C5 * h, &self.scratch, &mut self.k[4]);
            self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            (self.rhs)(t0 + h, &self.scratch, &mut self.k[5]);
            for (i, out) in self.next.iter_mut().enumerate() {
                *out = y[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * h;
            }
            (self.rhs)(t0 + h, &self.next, &mut self.k[6]);

            let mut err2 = 0.0;
            for i in 0..y.len() {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let scale = self.tol.atol + self.tol.rtol * y[i].norm().max(self.next[i].norm());
                err2 += (e.norm() / scale).powi(2);
            }
            let err = (err2 / y.len() as f64).sqrt();

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                *t = t0 + h;
                y.copy_from_slice(&self.next);
                self.k.swap(0, 6);
                self.accepted_steps += 1;
                // a step clipped to hit t_end says nothing about the natural size
                if h >= self.step {
                    self.step = h * factor;
                } else {
                    self.step = self.step.max(h * factor);
                }
            } else {
                self.rejected_steps += 1;
                self.step = h * factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_phase_is_integrated_accurately() {
        // dy/dt = -i w y  ->  y(t) = exp(-i w t)
        let w = 3.0;
        let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = C64::new(0.0, -w) * y[0];
        let mut solver = DormandPrince::new(rhs, 1, Tolerances::default(), 0.01);
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut t = 0.0;
        solver.integrate(&mut t, &mut y, 10.0);
        let exact = C64::from_polar(1.0, -w * 10.0);
        assert!((y[0] - exact).norm() < 1e-8);
        assert_eq!(t, 10.0);
    }

    #[test]
    fn explicit_time_dependence() {
        // dy/dt = i cos(t) y  ->  y(t) = exp(i sin t)
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| dy[0] = C64::new(0.0, t.cos()) * y[0];
        let mut solver = DormandPrince::new(rhs, 1, Tolerances::default(), 0.1);
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut t = 0.0;
        for stop in [1.0, 2.5, 7.0] {
            solver.integrate(&mut t, &mut y, stop);
            assert!((y[0] - C64::from_polar(1.0, stop.sin())).norm() < 1e-8);
        }
    }
}
