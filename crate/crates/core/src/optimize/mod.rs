//! Length minimization over horizontal curves with piecewise-constant unit controls.

mod bfgs;
mod minimize;
mod sign;

pub use bfgs::{bfgs, BfgsOptions, BfgsResult};
pub use minimize::{corner_test, minimize_length, CornerResult, MinimizationResult, MinimizeOptions};
pub use sign::{constant_sign_check, SignVerdict};

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::ode::{integrate_to, Dopri5, Tolerances};
use crate::structures::{ControlSignal, SRStructure};
use crate::vfield::CompiledField;

/// Angles `phi_k` of the unit controls `(cos phi_k, sin phi_k)` on the segments
/// `[k/N, (k+1)/N]` of the horizon `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedControl {
    pub angles: Vec<f64>,
}

impl DiscretizedControl {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Precondition("a discretized control needs at least one segment".into()));
        }
        Ok(DiscretizedControl { angles })
    }

    pub fn constant(angle: f64, n: usize) -> Self {
        DiscretizedControl { angles: alloc::vec![angle; n.max(1)] }
    }

    /// Direction `v_minus` on the first half, `v_plus` on the second; `n` is rounded up to even.
    pub fn corner(v_minus: [f64; 2], v_plus: [f64; 2], n: usize) -> Self {
        let half = n.div_ceil(2).max(1);
        let a = v_minus[1].atan2(v_minus[0]);
        let b = v_plus[1].atan2(v_plus[0]);
        let mut angles = alloc::vec![a; half];
        angles.extend(core::iter::repeat_n(b, half));
        DiscretizedControl { angles }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn control(&self, k: usize) -> [f64; 2] {
        let (s, c) = self.angles[k].sin_cos();
        [c, s]
    }

    /// Splits every segment into `factor` equal pieces carrying the same angle.
    pub fn refine(&self, factor: usize) -> Self {
        let angles = self.angles.iter().flat_map(|&a| core::iter::repeat_n(a, factor.max(1))).collect();
        DiscretizedControl { angles }
    }

    /// Angles wrapped to `(-pi, pi]`.
    pub fn normalized(&self) -> Self {
        let angles = self.angles.iter().map(|&a| a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil()).collect();
        DiscretizedControl { angles }
    }

    pub fn to_signal(&self) -> ControlSignal {
        let n = self.len();
        let times = (0..n).map(|k| k as f64 / n as f64).collect();
        let samples = (0..n).map(|k| self.control(k).to_vec()).collect();
        ControlSignal { times, samples }
    }
}

pub(crate) struct Frame2 {
    x1: CompiledField,
    x2: CompiledField,
    dim: usize,
}

impl Frame2 {
    pub(crate) fn new(s: &SRStructure) -> Result<Self> {
        if s.rank() != 2 {
            return Err(Error::Precondition("length minimization is implemented for rank-2 structures".into()));
        }
        Ok(Frame2 { x1: s.frame()[0].compile(), x2: s.frame()[1].compile(), dim: s.dim() })
    }
}

/// Endpoint of `xdot = speed (u1 X1 + u2 X2)` on `[0, 1]` under the control `c`.
pub fn shoot(s: &SRStructure, x0: &[f64], c: &DiscretizedControl, speed: f64) -> Result<Vec<f64>> {
    let fr = Frame2::new(s)?;
    shoot_frame(&fr, x0, c, speed, Tolerances::default())
}

pub(crate) fn shoot_frame(fr: &Frame2, x0: &[f64], c: &DiscretizedControl, speed: f64, tol: Tolerances) -> Result<Vec<f64>> {
    if x0.len() != fr.dim {
        return Err(Error::DimensionMismatch { expected: fr.dim, found: x0.len() });
    }
    let n = c.len();
    let mut x = x0.to_vec();
    if speed == 0.0 {
        return Ok(x);
    }
    let mut buf = alloc::vec![0.0; fr.dim];
    for k in 0..n {
        let [u1, u2] = c.control(k);
        let (a, b) = (speed * u1, speed * u2);
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            fr.x1.eval_into(y, dy);
            fr.x2.eval_into(y, &mut buf);
            for i in 0..dy.len() {
                dy[i] = a * dy[i] + b * buf[i];
            }
        };
        x = integrate_to(rhs, k as f64 / n as f64, &x, (k + 1) as f64 / n as f64, tol)?;
    }
    Ok(x)
}

/// Endpoint and its Jacobian with respect to `(phi_1, ..., phi_N, speed)`, by
/// forward sensitivity integration segment by segment.
pub fn shoot_jacobian(s: &SRStructure, x0: &[f64], c: &DiscretizedControl, speed: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let fr = Frame2::new(s)?;
    shoot_jacobian_frame(&fr, x0, c, speed, Tolerances::default())
}

pub(crate) fn shoot_jacobian_frame(
    fr: &Frame2,
    x0: &[f64],
    c: &DiscretizedControl,
    speed: f64,
    tol: Tolerances,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = fr.dim;
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x0.len() });
    }
    let n = c.len();
    let mut jac = DMatrix::<f64>::zeros(d, n + 1);
    let mut x = x0.to_vec();
    // state: x (d), Phi (d*d column-major), s_phi (d), s_v (d)
    let width = d + d * d + 2 * d;
    let mut y0 = alloc::vec![0.0; width];
    let mut f1 = alloc::vec![0.0; d];
    let mut f2 = alloc::vec![0.0; d];
    for k in 0..n {
        let [u1, u2] = c.control(k);
        y0[..d].copy_from_slice(&x);
        y0[d..].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            y0[d + i * d + i] = 1.0;
        }
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let (xs, rest) = y.split_at(d);
            fr.x1.eval_into(xs, &mut f1);
            fr.x2.eval_into(xs, &mut f2);
            dy.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..d {
                dy[i] = speed * (u1 * f1[i] + u2 * f2[i]);
            }
            // columns of Phi, then s_phi, then s_v all obey w' = DF w
            for col in 0..d + 2 {
                let w = &rest[col * d..(col + 1) * d];
                let out = &mut dy[d + col * d..d + (col + 1) * d];
                fr.x1.add_jvp(xs, w, speed * u1, out);
                fr.x2.add_jvp(xs, w, speed * u2, out);
            }
            let sp = d + d * d;
            for i in 0..d {
                dy[sp + i] += speed * (-u2 * f1[i] + u1 * f2[i]);
                dy[sp + d + i] += u1 * f1[i] + u2 * f2[i];
            }
        };
        let mut st = Dopri5::new(rhs, k as f64 / n as f64, &y0, tol);
        let t1 = (k + 1) as f64 / n as f64;
        while st.t() < t1 {
            st.step(t1, f64::INFINITY)?;
        }
        let y = st.y();
        x.copy_from_slice(&y[..d]);
        let phi = DMatrix::from_column_slice(d, d, &y[d..d + d * d]);
        let prev = jac.columns(0, k).clone_owned();
        jac.columns_mut(0, k).copy_from(&(&phi * prev));
        let jv = &phi * jac.column(n) + nalgebra::DVector::from_column_slice(&y[d + d * d + d..]);
        jac.column_mut(n).copy_from(&jv);
        jac.column_mut(k).copy_from_slice(&y[d + d * d..d + d * d + d]);
    }
    Ok((x, jac))
}

/// Central finite-difference Jacobian of the endpoint map with step `h`.
pub fn shoot_jacobian_fd(s: &SRStructure, x0: &[f64], c: &DiscretizedControl, speed: f64, h: f64) -> Result<DMatrix<f64>> {
    let fr = Frame2::new(s)?;
    let tol = Tolerances::default();
    let n = c.len();
    let mut jac = DMatrix::zeros(fr.dim, n + 1);
    for j in 0..=n {
        let eval = |delta: f64| {
            let mut cc = c.clone();
            let mut v = speed;
            if j < n {
                cc.angles[j] += delta;
            } else {
                v += delta;
            }
            shoot_frame(&fr, x0, &cc, v, tol)
        };
        let (p, m) = (eval(h)?, eval(-h)?);
        for i in 0..fr.dim {
            jac[(i, j)] = (p[i] - m[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}
