use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{trapezoid, PhasePath};
use crate::error::{Error, Result};

/// Ratio `|h(s_end)| / |h(s_0)|` a hyperbolic path must reach before the tail is trusted.
pub const HYPERBOLIC_DECAY: f64 = 1e-6;
/// Largest relative misfit of the exponential tail model.
pub const TAIL_FIT_TOL: f64 = 0.01;
pub const ASYMPTOTIC_TOL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicReport {
    pub a: f64,
    /// `sup |x1 x2| / R` over the trailing half.
    pub sup_cross: f64,
    /// `sup |x1^2 - x2^2 - 2aR| / (2aR)` over the trailing half.
    pub sup_diff: f64,
    pub tan2theta_end: f64,
    /// Fitted decay rate of `|h|^2` on the final quarter.
    pub tail_rate: f64,
    pub tail_residual: f64,
    /// Share of `R(s_0)` contributed by the extrapolated tail.
    pub tail_share: f64,
    pub accepted: bool,
}

/// Least-squares line `y = c0 + c1 x`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - c1 * mx, c1)
}

/// Checks `x1 x2 = o(R)` and `x1^2 - x2^2 = 2aR(1 + o(1))` with `R(s) = int_s^inf |h|^2`.
pub fn hyperbolic_asymptotics(path: &PhasePath, a: f64) -> Result<HyperbolicReport> {
    if !(a > 0.0) {
        return Err(Error::Precondition("hyperbolic asymptotics need det A < 0".into()));
    }
    let n = path.len();
    if n < 8 {
        return Err(Error::TooFewNodes { needed: 8, found: n });
    }
    if !(path.rho[n - 1] < HYPERBOLIC_DECAY * path.rho[0]) {
        return Err(Error::Precondition("path stops before |h| decays by 1e-6".into()));
    }
    let q: Vec<f64> = path.rho.iter().map(|r| r * r).collect();
    let from = path.s.partition_point(|&s| s < path.s[n - 1] - 0.25 * path.s_span()).min(n - 4);
    let xs = &path.s[from..];
    let ys: Vec<f64> = q[from..].iter().map(|v| v.ln()).collect();
    let (c0, c1) = fit_line(xs, &ys);
    if !(c1 < 0.0) {
        return Err(Error::TailFitRejected { residual: f64::INFINITY });
    }
    let tail_residual = xs.iter().zip(&q[from..]).map(|(x, v)| (v / (c0 + c1 * x).exp() - 1.0).abs()).fold(0.0, f64::max);
    if tail_residual > TAIL_FIT_TOL {
        return Err(Error::TailFitRejected { residual: tail_residual });
    }
    let tail = -(c0 + c1 * path.s[n - 1]).exp() / c1;

    let mut r = alloc::vec![0.0; n];
    r[n - 1] = tail;
    for k in (0..n - 1).rev() {
        r[k] = r[k + 1] + 0.5 * (path.s[k + 1] - path.s[k]) * (q[k] + q[k + 1]);
    }
    let half = path.s[0] + 0.5 * path.s_span();
    let (mut sup_cross, mut sup_diff): (f64, f64) = (0.0, 0.0);
    for k in (0..n).filter(|&k| path.s[k] >= half) {
        let (x1, x2) = (path.x1(k), path.x2(k));
        sup_cross = sup_cross.max((x1 * x2).abs() / r[k]);
        sup_diff = sup_diff.max((x1 * x1 - x2 * x2 - 2.0 * a * r[k]).abs() / (2.0 * a * r[k]));
    }
    let (x1, x2) = (path.x1(n - 1), path.x2(n - 1));
    Ok(HyperbolicReport {
        a,
        sup_cross,
        sup_diff,
        tan2theta_end: 2.0 * x1 * x2 / (x1 * x1 - x2 * x2),
        tail_rate: -c1,
        tail_residual,
        tail_share: tail / r[0],
        accepted: sup_cross <= ASYMPTOTIC_TOL && sup_diff <= ASYMPTOTIC_TOL,
    })
}

/// `int |h|^p ds` over the path truncated where `rho` first drops below `c rho(s_0)`, one value per cutoff.
pub fn lp_integrals(path: &PhasePath, p: f64, cutoffs: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = path.rho.iter().map(|r| r.powf(p)).collect();
    cutoffs
        .iter()
        .map(|&c| {
            let end = path.rho.iter().position(|&r| r < c * path.rho[0]).map_or(path.len(), |k| k + 1);
            trapezoid(&path.s[..end], &vals[..end])
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticReport {
    pub rate: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// Largest backward step of `M s + ln(rho^2 w)` between consecutive nodes.
    pub monotone_defect: f64,
    pub nondecreasing: bool,
    /// Whether `rho >= rho_0 e^{-M (s - s_0)/2} (w_0 / w)^{1/2}` held at every node.
    pub lower_bound_ok: bool,
    pub min_rho: f64,
}

/// Monitors `e^{M s} rho^2 w` with `w = alpha sin 2theta + mu cos 2theta + eta` along an elliptic path.
pub fn excluded_elliptic_monitor(path: &PhasePath, rate: f64, a: f64) -> Result<EllipticReport> {
    if path.mu.iter().chain(&path.eta).any(|v| v.is_nan()) || path.eta.len() != path.len() || path.is_empty() {
        return Err(Error::Precondition("path carries no elliptic coefficients".into()));
    }
    let mut rep = EllipticReport {
        rate,
        min_w: f64::INFINITY,
        max_w: f64::NEG_INFINITY,
        monotone_defect: 0.0,
        nondecreasing: true,
        lower_bound_ok: true,
        min_rho: f64::INFINITY,
    };
    let (s0, r0) = (path.s[0], path.rho[0]);
    let mut w0 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..path.len() {
        let th2 = 2.0 * path.theta[k];
        let w = path.alpha[k] * th2.sin() + path.mu[k] * th2.cos() + path.eta[k];
        if !(w > 0.5 * a && w < 2.0 * a) {
            return Err(Error::EllipticWindow { s: path.s[k], w });
        }
        if k == 0 {
            w0 = w;
        }
        rep.min_w = rep.min_w.min(w);
        rep.max_w = rep.max_w.max(w);
        rep.min_rho = rep.min_rho.min(path.rho[k]);
        let q = rate * path.s[k] + 2.0 * path.rho[k].ln() + w.ln();
        rep.monotone_defect = rep.monotone_defect.max(prev - q);
        prev = q;
        let bound = r0 * (-rate * (path.s[k] - s0) / 2.0).exp() * (w0 / w).sqrt();
        rep.lower_bound_ok &= path.rho[k] >= bound * (1.0 - 1e-6);
    }
    rep.nondecreasing = rep.monotone_defect <= 1e-6;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::Tolerances;
    use crate::phase::{simulate_elliptic, simulate_linear, PolarOptions};

    fn opt() -> PolarOptions {
        PolarOptions { tol: Tolerances::uniform(1e-12), ..Default::default() }
    }

    #[test]
    fn stable_axis_has_exact_r() {
        let p = simulate_linear(|_| 1.0, |_| 0.0, |_| 0.0, [1.0, 0.0], 0.0, 16.0, &opt()).unwrap();
        let rep = hyperbolic_asymptotics(&p, 1.0).unwrap();
        assert!(p.theta.iter().all(|&t| t == 0.0));
        assert_eq!(rep.sup_cross, 0.0);
        assert!(rep.sup_diff < 1e-4, "{}", rep.sup_diff);
        assert!(rep.tail_residual < 1e-8 && (rep.tail_rate - 2.0).abs() < 1e-8);
        assert!(rep.accepted && rep.tan2theta_end == 0.0);
    }

    #[test]
    fn stable_branch_of_decaying_saddle_obeys_asymptotics() {
        let e = |s: f64| (-0.5 * s).exp();
        let p =
            simulate_linear(move |s| 1.0 + 0.3 * e(s), move |s| 0.4 * e(s), move |s| 0.5 * e(s), [1e-7, 0.0], 18.0, 0.0, &opt()).unwrap();
        assert!(p.rho[p.len() - 1] < 1e-6 * p.rho[0]);
        assert!(p.x2(0).abs() > 1e-3 * p.rho[0], "start should be off the axis");
        let rep = hyperbolic_asymptotics(&p, 1.0).unwrap();
        assert!(rep.accepted, "{rep:?}");
        assert!(rep.tan2theta_end.abs() < 1e-3);
    }

    #[test]
    fn non_hyperbolic_and_short_paths_are_refused() {
        let p = simulate_linear(|_| 1.0, |_| 0.0, |_| 0.0, [1.0, 0.0], 0.0, 5.0, &opt()).unwrap();
        assert!(hyperbolic_asymptotics(&p, 1.0).is_err());
        assert!(hyperbolic_asymptotics(&p, -1.0).is_err());
    }

    #[test]
    fn lp_integrals_settle_as_cutoff_shrinks() {
        let p = simulate_linear(|_| 1.0, |_| 0.0, |_| 0.0, [1.0, 0.0], 0.0, 20.0, &opt()).unwrap();
        for pw in [1.0, 2.0] {
            let v = lp_integrals(&p, pw, &[1e-6, 1e-7, 1e-8]);
            assert!((v[0] - v[1]).abs() <= 1e-6 && (v[1] - v[2]).abs() <= 1e-6, "{v:?}");
            assert!((v[2] - 1.0 / pw).abs() < 1e-4);
        }
    }

    #[test]
    fn circular_orbit_is_trivially_monitored() {
        let p = simulate_elliptic(|_| 0.0, |_| 0.0, |_| 1.0, 1.0, 0.3, 50.0, &opt()).unwrap();
        let rep = excluded_elliptic_monitor(&p, 0.0, 1.0).unwrap();
        assert!(rep.nondecreasing && rep.lower_bound_ok);
        assert!((rep.min_w - 1.0).abs() < 1e-12 && (rep.max_w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slowly_varying_elliptic_coefficients_keep_monitor_monotone() {
        let p = simulate_elliptic(
            |s| 0.1 * (0.1 * s).sin(),
            |s| 0.1 * (0.1 * s).cos(),
            |s| 1.0 + 0.05 * (0.2 * s).sin(),
            1.0,
            0.0,
            300.0,
            &opt(),
        )
        .unwrap();
        let rep = excluded_elliptic_monitor(&p, 0.1, 1.0).unwrap();
        assert!(rep.nondecreasing, "{rep:?}");
        assert!(rep.lower_bound_ok && rep.min_rho > 0.1);
        let e = excluded_elliptic_monitor(&p, 0.1, 3.0).unwrap_err();
        assert!(matches!(e, Error::EllipticWindow { .. }));
    }
}
