use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use super::{degenerate_fg, PhaseKind, PhasePath};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, Tolerances};

/// Below this radius the polar chart is abandoned.
pub const COLLAPSE_RADIUS: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarOptions {
    pub tol: Tolerances,
    /// Spacing of the output grid in `s`.
    pub ds_out: f64,
    /// Largest rotation of `theta` allowed in a single step.
    pub max_rotation: f64,
}

impl Default for PolarOptions {
    fn default() -> Self {
        PolarOptions { tol: Tolerances::uniform(1e-10), ds_out: 0.01, max_rotation: FRAC_PI_2 }
    }
}

/// Nearest lift of `raw` to `prev + (-pi, pi]`.
pub(crate) fn unwrap_angle(prev: f64, raw: f64) -> f64 {
    let k = ((prev - raw) / (2.0 * PI)).round();
    raw + 2.0 * PI * k
}

/// Runs the stepper over `[s0, s1]` and hands every grid point `s0 + k ds_out`
/// (plus `s1`) to `emit`. `rate` bounds `|theta'|` at a state.
fn run_on_grid<F, R, E>(rhs: F, y0: &[f64], s0: f64, s1: f64, opt: &PolarOptions, rate: R, mut emit: E) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    R: Fn(f64, &[f64]) -> f64,
    E: FnMut(f64, &[f64]) -> Result<()>,
{
    if !(opt.ds_out > 0.0) || !(s1 > s0) {
        return Err(Error::EmptyInterval { a: s0, b: s1 });
    }
    let mut st = Dopri5::new(rhs, s0, y0, opt.tol);
    emit(s0, y0)?;
    let mut k = 1usize;
    let mut buf = alloc::vec![0.0; y0.len()];
    while st.t() < s1 {
        let r = rate(st.t(), st.y()).abs();
        let cap = if r > 0.0 { opt.max_rotation / r } else { f64::INFINITY };
        st.step(s1, cap.min(10.0 * opt.ds_out))?;
        loop {
            let sk = s0 + k as f64 * opt.ds_out;
            if sk > st.t() || sk >= s1 - 1e-12 * opt.ds_out {
                break;
            }
            st.dense_into(sk, &mut buf);
            emit(sk, &buf)?;
            k += 1;
        }
    }
    emit(s1, st.y())
}

/// Degenerate polar system on `[0, s_max]` with `(ln rho, theta)` as state:
/// `(ln rho)' = sin cos + f`, `theta' = -sin^2 + g`, where `f, g` come from
/// `alpha(s), beta(s), zeta(s)`.
pub fn simulate_polar<A, B, Z>(alpha: A, beta: B, zeta: Z, rho0: f64, theta0: f64, s_max: f64, opt: &PolarOptions) -> Result<PhasePath>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
    Z: Fn(f64) -> f64,
{
    if !(rho0 > 0.0) {
        return Err(Error::Precondition("initial radius must be positive".into()));
    }
    let fg = |s: f64, th: f64| degenerate_fg(alpha(s), beta(s), zeta(s), th);
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let (f, g) = fg(s, y[1]);
        let (sn, cs) = y[1].sin_cos();
        dy[0] = sn * cs + f;
        dy[1] = -sn * sn + g;
    };
    let rate = |s: f64, y: &[f64]| {
        let (_, g) = fg(s, y[1]);
        -y[1].sin().powi(2) + g
    };
    let ln_min = COLLAPSE_RADIUS.ln();
    let mut path = PhasePath::empty(PhaseKind::Degenerate);
    run_on_grid(rhs, &[rho0.ln(), theta0], 0.0, s_max, opt, rate, |s, y| {
        if !(y[0] > ln_min) {
            return Err(Error::RadialCollapse { s });
        }
        let (a, b, z) = (alpha(s), beta(s), zeta(s));
        let (f, g) = degenerate_fg(a, b, z, y[1]);
        let (sn, cs) = y[1].sin_cos();
        path.s.push(s);
        path.rho.push(y[0].exp());
        path.theta.push(y[1]);
        path.dtheta.push(-sn * sn + g);
        path.dlnrho.push(sn * cs + f);
        path.alpha.push(a);
        path.beta.push(b);
        path.zeta.push(z);
        path.mu.push(z + b);
        path.eta.push(f64::NAN);
        path.f.push(f);
        path.g.push(g);
        Ok(())
    })?;
    Ok(path)
}

/// Elliptic polar system `rho' = -alpha cos 2theta + mu sin 2theta`,
/// `theta' = (alpha sin 2theta + mu cos 2theta + eta) / rho` on `[0, s_max]`.
pub fn simulate_elliptic<A, M, N>(alpha: A, mu: M, eta: N, rho0: f64, theta0: f64, s_max: f64, opt: &PolarOptions) -> Result<PhasePath>
where
    A: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
    N: Fn(f64) -> f64,
{
    if !(rho0 > 0.0) {
        return Err(Error::Precondition("initial radius must be positive".into()));
    }
    let w = |s: f64, th: f64| alpha(s) * (2.0 * th).sin() + mu(s) * (2.0 * th).cos() + eta(s);
    let drho = |s: f64, th: f64| -alpha(s) * (2.0 * th).cos() + mu(s) * (2.0 * th).sin();
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = drho(s, y[1]);
        dy[1] = w(s, y[1]) / y[0];
    };
    let rate = |s: f64, y: &[f64]| w(s, y[1]) / y[0];
    let mut path = PhasePath::empty(PhaseKind::Elliptic);
    run_on_grid(rhs, &[rho0, theta0], 0.0, s_max, opt, rate, |s, y| {
        if !(y[0] > COLLAPSE_RADIUS) {
            return Err(Error::RadialCollapse { s });
        }
        let (m, n) = (mu(s), eta(s));
        path.s.push(s);
        path.rho.push(y[0]);
        path.theta.push(y[1]);
        path.dtheta.push(w(s, y[1]) / y[0]);
        path.dlnrho.push(drho(s, y[1]) / y[0]);
        path.alpha.push(alpha(s));
        path.beta.push(m - n);
        path.zeta.push(m + n);
        path.mu.push(m);
        path.eta.push(n);
        path.f.push(f64::NAN);
        path.g.push(f64::NAN);
        Ok(())
    })?;
    Ok(path)
}

/// Linear flow `x' = (-alpha, beta; zeta, alpha)(s) x` from `x(s0) = x0` to `s1`.
///
/// `s1 < s0` integrates backwards; the returned path is always ordered by increasing `s`.
pub fn simulate_linear<A, B, Z>(alpha: A, beta: B, zeta: Z, x0: [f64; 2], s0: f64, s1: f64, opt: &PolarOptions) -> Result<PhasePath>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
    Z: Fn(f64) -> f64,
{
    if x0[0] == 0.0 && x0[1] == 0.0 {
        return Err(Error::Precondition("initial point is the origin".into()));
    }
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let field = |s: f64, x: &[f64]| {
        let (a, b, z) = (alpha(s), beta(s), zeta(s));
        [-a * x[0] + b * x[1], z * x[0] + a * x[1]]
    };
    let rhs = |sig: f64, y: &[f64], dy: &mut [f64]| {
        let v = field(s0 + dir * sig, y);
        dy[0] = dir * v[0];
        dy[1] = dir * v[1];
    };
    let rate = |sig: f64, y: &[f64]| {
        let v = field(s0 + dir * sig, y);
        (y[0] * v[1] - y[1] * v[0]) / (y[0] * y[0] + y[1] * y[1])
    };
    let mut path = PhasePath::empty(PhaseKind::Hyperbolic);
    let mut prev = f64::NAN;
    run_on_grid(rhs, &x0, 0.0, (s1 - s0).abs(), opt, rate, |sig, y| {
        let s = s0 + dir * sig;
        let r2 = y[0] * y[0] + y[1] * y[1];
        let rho = r2.sqrt();
        if !(rho > COLLAPSE_RADIUS) {
            return Err(Error::RadialCollapse { s });
        }
        let raw = y[1].atan2(y[0]);
        let th = if prev.is_nan() { raw } else { unwrap_angle(prev, raw) };
        prev = th;
        let v = field(s, y);
        path.s.push(s);
        path.rho.push(rho);
        path.theta.push(th);
        path.dtheta.push((y[0] * v[1] - y[1] * v[0]) / r2);
        path.dlnrho.push((y[0] * v[0] + y[1] * v[1]) / r2);
        path.alpha.push(alpha(s));
        path.beta.push(beta(s));
        path.zeta.push(zeta(s));
        path.mu.push(zeta(s) + beta(s));
        path.eta.push(f64::NAN);
        path.f.push(f64::NAN);
        path.g.push(f64::NAN);
        Ok(())
    })?;
    if dir < 0.0 {
        for v in [
            &mut path.s,
            &mut path.rho,
            &mut path.theta,
            &mut path.dtheta,
            &mut path.dlnrho,
            &mut path.alpha,
            &mut path.beta,
            &mut path.zeta,
            &mut path.mu,
            &mut path.eta,
            &mut path.f,
            &mut path.g,
        ] {
            v.reverse();
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_polar_flow_has_linear_cotangent() {
        let opt = PolarOptions::default();
        let th0 = FRAC_PI_2;
        let p = simulate_polar(|_| 0.0, |_| 1.0, |_| 0.0, 1.0, th0, 100.0, &opt).unwrap();
        p.check_invariants().unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..p.len() {
            let cot = 1.0 / p.theta[k].tan();
            worst = worst.max((cot - p.s[k]).abs());
        }
        assert!(worst < 1e-6, "cot error {worst}");
        assert!((p.s[p.len() - 1] - 100.0).abs() < 1e-12);
        assert!((p.s[1] - 0.01).abs() < 1e-15);
        // rho sin theta is conserved when f = g = 0
        for k in 0..p.len() {
            assert!((p.rho[k] * p.theta[k].sin() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_collapse_is_reported() {
        let opt = PolarOptions { ds_out: 1.0, ..Default::default() };
        let e = simulate_polar(|_| 1.0, |_| 1.0, |_| 0.0, 1.0, 0.0, 1000.0, &opt).unwrap_err();
        assert!(matches!(e, Error::RadialCollapse { .. }));
    }

    #[test]
    fn linear_saddle_backward_and_forward() {
        let opt = PolarOptions { tol: Tolerances::uniform(1e-12), ..Default::default() };
        let p = simulate_linear(|_| 1.0, |_| 0.0, |_| 0.0, [1e-6, 0.0], 10.0, 0.0, &opt).unwrap();
        assert_eq!(p.s[0], 0.0);
        assert!((p.rho[0] - 1e-6 * 10f64.exp()).abs() < 1e-7 * p.rho[0]);
        assert!(p.s.windows(2).all(|w| w[1] > w[0]));
        let q = simulate_linear(|_| 0.0, |_| 1.0, |_| -1.0, [1.0, 0.0], 0.0, 3.0, &opt).unwrap();
        let k = q.len() - 1;
        assert!((q.theta[k] + 3.0).abs() < 1e-9 && (q.rho[k] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn elliptic_rotation_is_uniform_with_constant_coefficients() {
        let p = simulate_elliptic(|_| 0.0, |_| 0.0, |_| 1.0, 2.0, 0.0, 10.0, &PolarOptions::default()).unwrap();
        let k = p.len() - 1;
        assert!((p.theta[k] - 5.0).abs() < 1e-9 && (p.rho[k] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unwrap_picks_nearest_lift() {
        assert!((unwrap_angle(6.2, 0.1) - (0.1 + 2.0 * PI)).abs() < 1e-15);
        assert!((unwrap_angle(-3.1, 3.1) - (3.1 - 2.0 * PI)).abs() < 1e-15);
    }
}
