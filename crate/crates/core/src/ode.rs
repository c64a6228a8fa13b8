//! Explicit integrators: Dormand-Prince 5(4) with dense output, and classical RK4.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerances {
    pub const fn uniform(tol: f64) -> Self {
        Tolerances { atol: tol, rtol: tol }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::uniform(1e-10)
    }
}

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Adaptive Dormand-Prince stepper driven one accepted step at a time.
///
/// The right-hand side is `f(t, y, dy)`. After each accepted step the dense
/// interpolant over `[t_prev, t]` is available through [`Dopri5::dense`].
pub struct Dopri5<F> {
    f: F,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    rcont: [Vec<f64>; 5],
    t_prev: f64,
    h_prev: f64,
    fsal_valid: bool,
    pub accepted: usize,
    pub rejected: usize,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Dopri5<F> {
    pub fn new(f: F, t0: f64, y0: &[f64], tol: Tolerances) -> Self {
        let n = y0.len();
        let z = || vec![0.0; n];
        Dopri5 {
            f,
            tol,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            rcont: [z(), z(), z(), z(), z()],
            t_prev: t0,
            h_prev: 0.0,
            fsal_valid: false,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    /// Suggested size of the next step.
    pub fn next_h(&self) -> f64 {
        self.h
    }

    /// Replaces the current state (e.g. after a projection), keeping `t`.
    pub fn set_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.fsal_valid = false;
    }

    /// Derivative at the current state.
    pub fn derivative(&mut self) -> &[f64] {
        self.ensure_k1();
        &self.k[0]
    }

    fn ensure_k1(&mut self) {
        if !self.fsal_valid {
            (self.f)(self.t, &self.y, &mut self.k[0]);
            self.fsal_valid = true;
        }
    }

    fn err_norm(&self, a: &[f64], b: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            let sk = self.tol.atol + self.tol.rtol * a[i].abs().max(b[i].abs());
            let r = v[i] / sk;
            acc += r * r;
        }
        (acc / a.len().max(1) as f64).sqrt()
    }

    fn initial_h(&mut self, span: f64) -> f64 {
        self.ensure_k1();
        let n = self.y.len();
        let zeros = vec![0.0; n];
        let d0 = self.err_norm(&self.y, &zeros, &self.y);
        let d1 = self.err_norm(&self.y, &zeros, &self.k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        for i in 0..n {
            self.ytmp[i] = self.y[i] + h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; n];
        (self.f)(self.t + h0, &self.ytmp, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.err_norm(&self.y, &zeros, &diff) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
        (100.0 * h0).min(h1).min(span.abs())
    }

    /// Takes one accepted step of size at most `min(h_cap, t_limit - t)`.
    ///
    /// Returns the accepted step size.
    pub fn step(&mut self, t_limit: f64, h_cap: f64) -> Result<f64> {
        let span = t_limit - self.t;
        if span <= 0.0 {
            return Err(Error::EmptyInterval { a: self.t, b: t_limit });
        }
        if self.h <= 0.0 {
            self.h = self.initial_h(span);
        }
        self.ensure_k1();
        let n = self.y.len();
        let h_min = 1e-14 * self.t.abs().max(1.0);
        loop {
            let mut h = self.h.min(h_cap).min(span);
            let last = h >= span * (1.0 - 1e-12);
            if last {
                h = span;
            }
            if h < h_min && !last {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let t = self.t;
            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let ytmp = &mut self.ytmp;
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            (self.f)(t + C2 * h, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.f)(t + C3 * h, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.f)(t + C4 * h, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.f)(t + C5 * h, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.f)(t + h, ytmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.f)(t + h, ynew, k7);
            for i in 0..n {
                ytmp[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = self.err_norm(&self.y, &self.ynew, &self.ytmp);
            if !err.is_finite() {
                self.h = h * 0.2;
                self.rejected += 1;
                if self.h < h_min {
                    return Err(Error::StepSizeUnderflow { t: self.t });
                }
                continue;
            }
            let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                let [k1, _, k3, k4, k5, k6, k7] = &self.k;
                let [r1, r2, r3, r4, r5] = &mut self.rcont;
                for i in 0..n {
                    let ydiff = self.ynew[i] - self.y[i];
                    let bspl = h * k1[i] - ydiff;
                    r1[i] = self.y[i];
                    r2[i] = ydiff;
                    r3[i] = bspl;
                    r4[i] = ydiff - h * k7[i] - bspl;
                    r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.t_prev = self.t;
                self.h_prev = h;
                self.t = if last { t_limit } else { self.t + h };
                core::mem::swap(&mut self.y, &mut self.ynew);
                self.k.swap(0, 6);
                self.fsal_valid = true;
                let proposal = (h * fac).max(h_min);
                self.h = if h < self.h { proposal.max(self.h) } else { proposal };
                self.accepted += 1;
                return Ok(h);
            }
            self.rejected += 1;
            self.h = h * fac.min(1.0);
        }
    }

    /// Dense interpolant of the last accepted step at time `t` in `[t_prev, t]`.
    pub fn dense_into(&self, t: f64, out: &mut [f64]) {
        let th = if self.h_prev > 0.0 { (t - self.t_prev) / self.h_prev } else { 0.0 };
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn dense(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y.len()];
        self.dense_into(t, &mut out);
        out
    }
}

/// Integrates from `t0` to `t1`, returning every accepted node (including `t0`).
pub fn integrate<F: FnMut(f64, &[f64], &mut [f64])>(
    f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: Tolerances,
    max_h: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut ts = vec![t0];
    let mut ys = vec![y0.to_vec()];
    if t1 <= t0 {
        return Ok((ts, ys));
    }
    let mut s = Dopri5::new(f, t0, y0, tol);
    while s.t() < t1 {
        s.step(t1, max_h)?;
        ts.push(s.t());
        ys.push(s.y().to_vec());
    }
    Ok((ts, ys))
}

/// Integrates from `t0` to `t1` and returns only the final state.
pub fn integrate_to<F: FnMut(f64, &[f64], &mut [f64])>(f: F, t0: f64, y0: &[f64], t1: f64, tol: Tolerances) -> Result<Vec<f64>> {
    if t1 <= t0 {
        return Ok(y0.to_vec());
    }
    let mut s = Dopri5::new(f, t0, y0, tol);
    while s.t() < t1 {
        s.step(t1, f64::INFINITY)?;
    }
    Ok(s.y().to_vec())
}

/// Classical fourth-order Runge-Kutta with `steps` equal steps over `[0, t]`.
/// A negative `t` integrates backwards.
pub fn rk4<F: FnMut(&[f64], &mut [f64])>(mut f: F, y0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let n = y0.len();
    let h = t / steps.max(1) as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..steps.max(1) {
        f(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Bisection for a sign change of `g` on `[a, b]`; `ga`, `gb` are `g(a)`, `g(b)`.
pub fn bisect(mut g: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, gb: f64, xtol: f64) -> f64 {
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let y = integrate_to(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 5.0, Tolerances::default()).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut s = Dopri5::new(f, 0.0, &[0.0, 1.0], Tolerances::default());
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            s.step(10.0, 0.5).unwrap();
            let (a, b) = (s.t_prev(), s.t());
            for k in 1..4 {
                let t = a + (b - a) * k as f64 / 4.0;
                let d = s.dense(t);
                worst = worst.max((d[0] - t.sin()).abs());
            }
        }
        assert!((s.y()[0] - 10f64.sin()).abs() < 1e-8);
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn step_respects_cap_and_limit() {
        let mut s = Dopri5::new(|_, _, dy: &mut [f64]| dy[0] = 1.0, 0.0, &[0.0], Tolerances::default());
        let h = s.step(1.0, 0.125).unwrap();
        assert!(h <= 0.125);
        while s.t() < 1.0 {
            s.step(1.0, 0.125).unwrap();
        }
        assert_eq!(s.t(), 1.0);
        assert!((s.y()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let e = |steps| (rk4(|y, dy| dy[0] = y[0], &[1.0], 1.0, steps)[0] - 1f64.exp()).abs();
        let ratio = e(20) / e(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, -2.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
