use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when `max |g_i|` falls below this.
    pub gtol: f64,
    /// Stop when the objective changes by less than `ftol (1 + |f|)` in one iteration.
    pub ftol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iter: 500, gtol: 1e-9, ftol: 1e-15, c1: 1e-4, c2: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Probe {
    a: f64,
    f: f64,
    d: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

/// Line search satisfying the strong Wolfe conditions, with safeguarded
/// quadratic interpolation in the zoom phase.
fn strong_wolfe<F>(
    fg: &mut F,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    p: &DVector<f64>,
    opt: &BfgsOptions,
    evals: &mut usize,
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let d0 = g0.dot(p);
    if !(d0 < 0.0) {
        return None;
    }
    let mut eval = |a: f64| {
        *evals += 1;
        let xa = x + p * a;
        let (f, g) = fg(xa.as_slice());
        let g = DVector::from_vec(g);
        let d = g.dot(p);
        Probe { a, f, d, x: xa, g }
    };
    let mut prev = Probe { a: 0.0, f: f0, d: d0, x: x.clone(), g: g0.clone() };
    let mut a = 1.0;
    for i in 0..40 {
        let cur = eval(a);
        if !cur.f.is_finite() {
            a = 0.5 * (prev.a + a);
            continue;
        }
        if cur.f > f0 + opt.c1 * a * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut eval, prev, cur, f0, d0, opt);
        }
        if cur.d.abs() <= -opt.c2 * d0 {
            return Some(cur);
        }
        if cur.d >= 0.0 {
            return zoom(&mut eval, cur, prev, f0, d0, opt);
        }
        a *= 2.0;
        prev = cur;
    }
    None
}

fn zoom<E: FnMut(f64) -> Probe>(eval: &mut E, mut lo: Probe, mut hi: Probe, f0: f64, d0: f64, opt: &BfgsOptions) -> Option<Probe> {
    for _ in 0..60 {
        let (a_lo, a_hi) = (lo.a, hi.a);
        let width = a_hi - a_lo;
        let denom = 2.0 * (hi.f - lo.f - lo.d * width);
        let mut a = if denom.abs() > 0.0 { a_lo - lo.d * width * width / denom } else { f64::NAN };
        let (l, r) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
        let margin = 0.1 * (r - l);
        if !(a > l + margin && a < r - margin) {
            a = 0.5 * (a_lo + a_hi);
        }
        if (r - l).abs() < 1e-16 * r.abs().max(1.0) {
            break;
        }
        let cur = eval(a);
        if cur.f > f0 + opt.c1 * a * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -opt.c2 * d0 {
                return Some(cur);
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    if lo.a > 0.0 && lo.f < f0 {
        Some(lo)
    } else {
        None
    }
}

/// Minimizes `f` with BFGS on the inverse Hessian; `fg(x)` returns `(f(x), grad f(x))`.
pub fn bfgs<F>(mut fg: F, x0: &[f64], opt: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut f, g) = fg(x0);
    let mut g = DVector::from_vec(g);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut evals = 1;
    let mut first = true;
    for it in 0..opt.max_iter {
        let gn = inf_norm(&g);
        if gn <= opt.gtol {
            return BfgsResult { x: x.as_slice().to_vec(), f, grad_norm: gn, iterations: it, evaluations: evals, converged: true };
        }
        let mut p = -(&h * &g);
        if !(g.dot(&p) < 0.0) {
            h = DMatrix::identity(n, n);
            p = -g.clone();
        }
        let Some(step) = strong_wolfe(&mut fg, &x, f, &g, &p, opt, &mut evals) else {
            if !first {
                h = DMatrix::identity(n, n);
                first = true;
                continue;
            }
            return BfgsResult { x: x.as_slice().to_vec(), f, grad_norm: gn, iterations: it, evaluations: evals, converged: false };
        };
        let s = &step.x - &x;
        let y = &step.g - &g;
        let sy = s.dot(&y);
        let df = f - step.f;
        x = step.x;
        g = step.g;
        f = step.f;
        if sy > 1e-300 {
            if first {
                h *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            h.ger(-rho, &s, &hy, 1.0);
            h.ger(-rho, &hy, &s, 1.0);
            h.ger(rho * rho * yhy + rho, &s, &s, 1.0);
        }
        if df.abs() <= opt.ftol * (1.0 + f.abs()) {
            let gn = inf_norm(&g);
            return BfgsResult {
                x: x.as_slice().to_vec(),
                f,
                grad_norm: gn,
                iterations: it + 1,
                evaluations: evals,
                converged: gn <= opt.gtol,
            };
        }
    }
    let gn = inf_norm(&g);
    BfgsResult { x: x.as_slice().to_vec(), f, grad_norm: gn, iterations: opt.max_iter, evaluations: evals, converged: gn <= opt.gtol }
}
