use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::bfgs::{bfgs, BfgsOptions};
use super::{shoot_frame, shoot_jacobian_frame, DiscretizedControl, Frame2};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::ode::Tolerances;
use crate::structures::SRStructure;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizeOptions {
    /// Declared endpoint tolerance for convergence.
    pub endpoint_tol: f64,
    /// Outer iterations continue until the endpoint error drops below this (or stagnates).
    pub polish_tol: f64,
    pub max_outer: usize,
    pub mu0: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    pub inner: BfgsOptions,
    pub tol: Tolerances,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            endpoint_tol: 1e-6,
            polish_tol: 1e-10,
            max_outer: 50,
            mu0: 10.0,
            mu_growth: 10.0,
            mu_max: 1e10,
            inner: BfgsOptions { max_iter: 400, gtol: 1e-10, ..Default::default() },
            tol: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizationResult {
    pub control: DiscretizedControl,
    pub speed: f64,
    /// `|speed|`: unit controls on a unit horizon.
    pub length: f64,
    pub endpoint_error: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
}

fn pack(c: &DiscretizedControl, v: f64) -> Vec<f64> {
    let mut z = c.angles.clone();
    z.push(v);
    z
}

fn unpack(z: &[f64]) -> (DiscretizedControl, f64) {
    let n = z.len() - 1;
    (DiscretizedControl { angles: z[..n].to_vec() }, z[n])
}

/// Minimizes the length `|speed|` of `[0, 1] -> M` under the control `(angles, speed)`
/// subject to reaching `x1`, by an augmented Lagrangian on `speed^2` with BFGS inner solves.
///
/// A run that exhausts `max_outer` returns its best iterate with `converged = false`.
pub fn minimize_length(
    s: &SRStructure,
    x0: &[f64],
    x1: &[f64],
    init: &DiscretizedControl,
    init_speed: f64,
    opt: &MinimizeOptions,
) -> Result<MinimizationResult> {
    let fr = Frame2::new(s)?;
    if x1.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: x1.len() });
    }
    let d = s.dim();
    let n = init.len();
    let mut z = pack(init, init_speed);
    let mut lambda = alloc::vec![0.0; d];
    let mut mu = opt.mu0;
    let mut total_iters = 0;
    let mut best: Option<MinimizationResult> = None;
    let mut prev_len = f64::INFINITY;

    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let (c, v) = unpack(z);
        let e = shoot_frame(&fr, x0, &c, v, opt.tol)?;
        Ok(e.iter().zip(x1).map(|(a, b)| a - b).collect())
    };

    for outer in 0..opt.max_outer {
        let mut failure = None;
        let lam = lambda.clone();
        let fg = |zz: &[f64]| -> (f64, Vec<f64>) {
            let (c, v) = unpack(zz);
            match shoot_jacobian_frame(&fr, x0, &c, v, opt.tol) {
                Ok((e, j)) => {
                    let r: Vec<f64> = e.iter().zip(x1).map(|(a, b)| a - b).collect();
                    let w: Vec<f64> = (0..d).map(|i| lam[i] + mu * r[i]).collect();
                    let f = v * v + (0..d).map(|i| lam[i] * r[i] + 0.5 * mu * r[i] * r[i]).sum::<f64>();
                    let mut g: Vec<f64> = (0..=n).map(|k| (0..d).map(|i| w[i] * j[(i, k)]).sum()).collect();
                    g[n] += 2.0 * v;
                    (f, g)
                }
                Err(e) => {
                    failure = Some(e);
                    (f64::INFINITY, alloc::vec![0.0; n + 1])
                }
            }
        };
        let res = bfgs(fg, &z, &opt.inner);
        if let Some(e) = failure.filter(|_| !res.f.is_finite()) {
            return Err(e);
        }
        total_iters += res.iterations;
        z = res.x;
        let r = residual(&z)?;
        let err = norm(&r);
        let (c, v) = unpack(&z);
        let cand = MinimizationResult {
            control: c,
            speed: v,
            length: v.abs(),
            endpoint_error: err,
            iterations: total_iters,
            outer_iterations: outer + 1,
            converged: err <= opt.endpoint_tol,
        };
        let better = match &best {
            None => true,
            Some(b) => match (cand.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => {
                    cand.endpoint_error <= opt.polish_tol || cand.length < b.length - 1e-12 || b.endpoint_error > cand.endpoint_error
                }
                (false, false) => cand.endpoint_error < b.endpoint_error,
            },
        };
        if better {
            best = Some(cand.clone());
        }
        let stagnant = (cand.length - prev_len).abs() <= 1e-13 * (1.0 + cand.length);
        if cand.converged && (err <= opt.polish_tol || stagnant) {
            return Ok(cand);
        }
        prev_len = cand.length;
        for i in 0..d {
            lambda[i] += mu * r[i];
        }
        mu = (mu * opt.mu_growth).min(opt.mu_max);
    }
    let mut b = best.expect("at least one outer iteration");
    b.iterations = total_iters;
    b.outer_iterations = opt.max_outer;
    Ok(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CornerResult {
    /// `(2 eps_leg - optimized length) / (2 eps_leg)`.
    pub margin: f64,
    pub corner_length: f64,
    pub corner_endpoint: Vec<f64>,
    pub result: MinimizationResult,
}

/// Builds the corner curve (`eps_leg` along `v_minus`, then `eps_leg` along `v_plus`)
/// and looks for a strictly shorter curve with the same endpoints.
pub fn corner_test(
    s: &SRStructure,
    x0: &[f64],
    v_minus: [f64; 2],
    v_plus: [f64; 2],
    eps_leg: f64,
    n: usize,
    opt: &MinimizeOptions,
) -> Result<CornerResult> {
    if !(eps_leg > 0.0) {
        return Err(Error::Precondition("leg length must be positive".into()));
    }
    let fr = Frame2::new(s)?;
    let corner = DiscretizedControl::corner(v_minus, v_plus, n);
    let corner_length = 2.0 * eps_leg;
    let y = shoot_frame(&fr, x0, &corner, corner_length, opt.tol)?;
    let result = minimize_length(s, x0, &y, &corner, corner_length, opt)?;
    if !result.converged {
        return Err(Error::NonConvergence(alloc::format!("corner optimization stopped with endpoint error {:e}", result.endpoint_error)));
    }
    Ok(CornerResult { margin: (corner_length - result.length) / corner_length, corner_length, corner_endpoint: y, result })
}
