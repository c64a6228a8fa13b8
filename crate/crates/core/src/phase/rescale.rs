use alloc::vec::Vec;

use nalgebra::Vector2;
#[allow(unused_imports)]
use num_traits::Float;

use super::polar::unwrap_angle;
use super::{degenerate_fg, hermite, hermite_deriv, ConjugationFrame, PhaseKind, PhasePath, TargetForm};
use crate::error::{Error, Result};
use crate::extremals::{AMatrix, FeedbackTrace};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaleOptions {
    /// Target relative change of `|h|` across one refined substep.
    pub substep_rel: f64,
    pub max_substeps: usize,
    /// Largest accepted relative defect of `h' = A h` in the rescaled time.
    pub consistency_tol: f64,
}

impl Default for RescaleOptions {
    fn default() -> Self {
        RescaleOptions { substep_rel: 1e-3, max_substeps: 2000, consistency_tol: 1e-5 }
    }
}

struct Sample {
    t: f64,
    h: [f64; 2],
    hd: [f64; 2],
    a: AMatrix,
    node: bool,
}

fn lerp_a(a: &AMatrix, b: &AMatrix, w: f64) -> AMatrix {
    AMatrix { a11: a.a11 + w * (b.a11 - a.a11), a12: a.a12 + w * (b.a12 - a.a12), a21: a.a21 + w * (b.a21 - a.a21) }
}

/// Logarithmic mean, so that `dt / log_mean` integrates `1/|h|` exactly for affine `|h|`.
fn log_mean(a: f64, b: f64) -> f64 {
    let r = b / a - 1.0;
    if r.abs() < 1e-6 {
        a * (1.0 + r / 2.0 - r * r / 12.0)
    } else {
        (b - a) / (b / a).ln()
    }
}

/// Rescales a feedback trace from `t_star` onward to `s = int dt/|h|` in the
/// frame `frame.oriented(trace.sign)`.
///
/// Returns the path and the largest relative defect of `dh/ds = A h` measured
/// at the recorded nodes.
pub fn rescale_time(trace: &FeedbackTrace, t_star: f64, frame: &ConjugationFrame, opt: &RescaleOptions) -> Result<(PhasePath, f64)> {
    let n = trace.len();
    let t_end = trace.zeros.first().copied().unwrap_or(f64::INFINITY);
    let start = (0..n).find(|&k| trace.t[k] >= t_star).ok_or(Error::EmptyInterval { a: t_star, b: trace.t[n - 1] })?;
    let stop = (start..n).find(|&k| trace.t[k] >= t_end).unwrap_or(n);
    if stop < start + 3 {
        return Err(Error::TooFewNodes { needed: 3, found: stop.saturating_sub(start) });
    }
    for k in start..stop {
        if !(trace.h_norm(k) > 0.0) {
            return Err(Error::VanishingH { t: trace.t[k] });
        }
    }

    let mut samples = Vec::new();
    for k in start..stop - 1 {
        let (t0, t1) = (trace.t[k], trace.t[k + 1]);
        let (h0, h1) = (trace.h[k], trace.h[k + 1]);
        let (d0, d1) = (trace.h_dot(k), trace.h_dot(k + 1));
        let speed = d0[0].hypot(d0[1]).max(d1[0].hypot(d1[1]));
        let floor = trace.h_norm(k).min(trace.h_norm(k + 1));
        let m = ((t1 - t0) * speed / (opt.substep_rel * floor)).ceil().clamp(1.0, opt.max_substeps as f64) as usize;
        for j in 0..m {
            let w = j as f64 / m as f64;
            let t = t0 + w * (t1 - t0);
            let h = [0, 1].map(|i| hermite(t0, t1, h0[i], h1[i], d0[i], d1[i], t));
            let hd = [0, 1].map(|i| hermite_deriv(t0, t1, h0[i], h1[i], d0[i], d1[i], t));
            samples.push(Sample { t, h, hd, a: lerp_a(&trace.a[k], &trace.a[k + 1], w), node: j == 0 });
        }
    }
    let last = stop - 1;
    samples.push(Sample { t: trace.t[last], h: trace.h[last], hd: trace.h_dot(last), a: trace.a[last], node: true });

    let fr = frame.oriented(trace.sign);
    let mut path = PhasePath::empty(PhaseKind::Rescaled);
    let mut s = 0.0;
    let mut prev_hn = 0.0;
    let mut prev_theta = f64::NAN;
    let mut xs: Vec<Vector2<f64>> = Vec::with_capacity(samples.len());
    let mut ms = Vec::with_capacity(samples.len());
    for (i, sm) in samples.iter().enumerate() {
        let hn = sm.h[0].hypot(sm.h[1]);
        if !(hn > 0.0) {
            return Err(Error::VanishingH { t: sm.t });
        }
        if i > 0 {
            s += (sm.t - samples[i - 1].t) / log_mean(prev_hn, hn);
        }
        prev_hn = hn;
        let x = fr.p_inv * Vector2::new(sm.h[0], sm.h[1]);
        let dx = fr.p_inv * Vector2::new(sm.hd[0], sm.hd[1]) * hn;
        let m = fr.conjugate(&sm.a) * trace.sign;
        let r2 = x.norm_squared();
        let raw = x[1].atan2(x[0]);
        let th = if prev_theta.is_nan() { raw } else { unwrap_angle(prev_theta, raw) };
        prev_theta = th;
        let (alpha, beta, zeta) = (-m[(0, 0)], m[(0, 1)], m[(1, 0)]);
        let (f, g) = if fr.target == TargetForm::NilpotentJordan { degenerate_fg(alpha, beta, zeta, th) } else { (f64::NAN, f64::NAN) };
        path.s.push(s);
        path.t.push(sm.t);
        path.rho.push(r2.sqrt());
        path.theta.push(th);
        path.dtheta.push((x[0] * dx[1] - x[1] * dx[0]) / r2);
        path.dlnrho.push(x.dot(&dx) / r2);
        path.alpha.push(alpha);
        path.beta.push(beta);
        path.zeta.push(zeta);
        path.mu.push(zeta + beta);
        path.eta.push(f64::NAN);
        path.f.push(f);
        path.g.push(g);
        xs.push(x);
        ms.push(m);
    }

    let mut residual: f64 = 0.0;
    for i in 1..samples.len() - 1 {
        if !samples[i].node {
            continue;
        }
        let (sa, sb, sc) = (path.s[i - 1], path.s[i], path.s[i + 1]);
        let (ha, hb) = (sb - sa, sc - sb);
        let fd = xs[i + 1] * (ha / (hb * (ha + hb))) - xs[i - 1] * (hb / (ha * (ha + hb))) + xs[i] * ((hb - ha) / (ha * hb));
        let model = ms[i] * xs[i];
        let scale = ms[i].norm() * xs[i].norm();
        if scale > 0.0 {
            residual = residual.max((fd - model).norm() / scale);
        }
    }
    if residual > opt.consistency_tol {
        return Err(Error::RescaleInconsistent { residual });
    }
    Ok((path, residual))
}
