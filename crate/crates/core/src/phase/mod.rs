//! Rescaled planar dynamics of `h` near its zeros.
//!
//! A [`PhasePath`] stores `h = rho e^{i theta}` in a conjugated frame against a
//! rescaled time `s`, together with the entries of `P^{-1} A P = (-alpha, beta; zeta, alpha)`.

mod asymptotics;
mod dichotomy;
mod polar;
mod rescale;

pub use asymptotics::{excluded_elliptic_monitor, hyperbolic_asymptotics, lp_integrals, EllipticReport, HyperbolicReport};
pub use dichotomy::{detect_dichotomy, verify_estimates, Dichotomy, EstimatesReport, SwitchSequence, WindowReport};
pub use polar::{simulate_elliptic, simulate_linear, simulate_polar, PolarOptions};
pub use rescale::{rescale_time, RescaleOptions};

use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::extremals::AMatrix;
use crate::linalg::eigvec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseKind {
    /// `theta' = -sin^2 theta + g`, `rho'/rho = sin cos + f`.
    Degenerate,
    /// `rho' = -alpha cos 2theta + mu sin 2theta`, `theta' = w / rho`.
    Elliptic,
    /// Linear flow `h' = A(s) h` near a saddle.
    Hyperbolic,
    /// Rescaled from a recorded feedback trajectory.
    Rescaled,
}

/// Samples of a planar path in polar form; coefficient columns not defined for
/// the path kind are `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePath {
    pub kind: PhaseKind,
    pub s: Vec<f64>,
    /// Original time, when the path was rescaled from a trajectory.
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// `d theta / ds`.
    pub dtheta: Vec<f64>,
    /// `d ln rho / ds`.
    pub dlnrho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl PhasePath {
    pub(crate) fn empty(kind: PhaseKind) -> Self {
        PhasePath {
            kind,
            s: Vec::new(),
            t: Vec::new(),
            rho: Vec::new(),
            theta: Vec::new(),
            dtheta: Vec::new(),
            dlnrho: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            zeta: Vec::new(),
            mu: Vec::new(),
            eta: Vec::new(),
            f: Vec::new(),
            g: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn x1(&self, k: usize) -> f64 {
        self.rho[k] * self.theta[k].cos()
    }

    pub fn x2(&self, k: usize) -> f64 {
        self.rho[k] * self.theta[k].sin()
    }

    pub fn s_span(&self) -> f64 {
        match (self.s.first(), self.s.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Checks `rho > 0` and that consecutive angles differ by less than `pi/2`.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.len() {
            if !(self.rho[k] > 0.0) {
                return Err(Error::RadialCollapse { s: self.s[k] });
            }
            if k > 0 && (self.theta[k] - self.theta[k - 1]).abs() >= core::f64::consts::FRAC_PI_2 {
                return Err(Error::Precondition("angle lift jumps by pi/2 or more between nodes".into()));
            }
        }
        Ok(())
    }

    /// Keeps the nodes with `keep(k)`.
    pub fn retain_nodes(&self, keep: impl Fn(usize) -> bool) -> PhasePath {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| keep(k)).collect();
        let pick = |v: &Vec<f64>| if v.is_empty() { Vec::new() } else { idx.iter().map(|&k| v[k]).collect() };
        PhasePath {
            kind: self.kind,
            s: pick(&self.s),
            t: pick(&self.t),
            rho: pick(&self.rho),
            theta: pick(&self.theta),
            dtheta: pick(&self.dtheta),
            dlnrho: pick(&self.dlnrho),
            alpha: pick(&self.alpha),
            beta: pick(&self.beta),
            zeta: pick(&self.zeta),
            mu: pick(&self.mu),
            eta: pick(&self.eta),
            f: pick(&self.f),
            g: pick(&self.g),
        }
    }
}

/// Perturbation terms of the degenerate polar system.
pub fn degenerate_fg(alpha: f64, beta: f64, zeta: f64, theta: f64) -> (f64, f64) {
    let mu = zeta + beta;
    let (s, c) = theta.sin_cos();
    let f = -alpha * (2.0 * theta).cos() + (mu - 1.0) * s * c;
    let g = alpha * (2.0 * theta).sin() + zeta + (1.0 - mu) * s * s;
    (f, g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetForm {
    /// `P^{-1} A P = diag(-a, a)`.
    HyperbolicDiag(f64),
    /// `P^{-1} A P = (0, 1; 0, 0)`.
    NilpotentJordan,
    /// `P^{-1} A P = (0, -a; a, 0)`.
    EllipticRotation(f64),
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationFrame {
    pub p: Matrix2<f64>,
    pub p_inv: Matrix2<f64>,
    pub target: TargetForm,
}

impl ConjugationFrame {
    pub fn identity() -> Self {
        ConjugationFrame { p: Matrix2::identity(), p_inv: Matrix2::identity(), target: TargetForm::Identity }
    }

    fn from_p(p: Matrix2<f64>, target: TargetForm) -> Result<Self> {
        if p.determinant().abs() <= 1e-12 {
            return Err(Error::Singular);
        }
        let p_inv = p.try_inverse().ok_or(Error::Singular)?;
        Ok(ConjugationFrame { p, p_inv, target })
    }

    /// Chooses the normal form of a trace-free `A` by the sign of `det A` (within `det_tol`).
    pub fn for_matrix(a: &AMatrix, det_tol: f64) -> Result<Self> {
        let m = a.matrix();
        let det = a.det();
        if a.norm() <= det_tol {
            return Err(Error::NoEigenline("A is the zero matrix"));
        }
        let frame = if det < -det_tol {
            let lam = (-det).sqrt();
            let vm = eigvec(&m, -lam);
            let vp = eigvec(&m, lam);
            Self::from_p(Matrix2::from_columns(&[vm, vp]), TargetForm::HyperbolicDiag(lam))?
        } else if det > det_tol {
            let lam = det.sqrt();
            let e1 = Vector2::new(1.0, 0.0);
            let second = m * e1 / lam;
            Self::from_p(Matrix2::from_columns(&[e1, second]), TargetForm::EllipticRotation(lam))?
        } else {
            let mut v2 = Vector2::new(1.0, 0.0);
            if (m * v2).norm() < (m * Vector2::new(0.0, 1.0)).norm() {
                v2 = Vector2::new(0.0, 1.0);
            }
            let v1 = m * v2;
            Self::from_p(Matrix2::from_columns(&[v1, v2]), TargetForm::NilpotentJordan)?
        };
        Ok(frame)
    }

    /// Frame in which `sign P^{-1} A P` has the target form, for feedback `u = sign h/|h|`.
    pub fn oriented(&self, sign: f64) -> ConjugationFrame {
        if sign >= 0.0 {
            return *self;
        }
        let p = match self.target {
            TargetForm::Identity => return *self,
            TargetForm::HyperbolicDiag(_) => Matrix2::from_columns(&[self.p.column(1).into_owned(), self.p.column(0).into_owned()]),
            _ => Matrix2::from_columns(&[self.p.column(0).into_owned(), -self.p.column(1)]),
        };
        let p_inv = p.try_inverse().unwrap_or(self.p_inv);
        ConjugationFrame { p, p_inv, target: self.target }
    }

    pub fn conjugate(&self, a: &AMatrix) -> Matrix2<f64> {
        self.p_inv * a.matrix() * self.p
    }

    pub fn target_matrix(&self) -> Matrix2<f64> {
        match self.target {
            TargetForm::HyperbolicDiag(a) => Matrix2::new(-a, 0.0, 0.0, a),
            TargetForm::NilpotentJordan => Matrix2::new(0.0, 1.0, 0.0, 0.0),
            TargetForm::EllipticRotation(a) => Matrix2::new(0.0, -a, a, 0.0),
            TargetForm::Identity => Matrix2::identity(),
        }
    }

    /// Max-entry distance between `P^{-1} A P` and the target form.
    pub fn form_error(&self, a: &AMatrix) -> f64 {
        (self.conjugate(a) - self.target_matrix()).abs().max()
    }
}

/// Cubic Hermite interpolation on `[x0, x1]`.
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

pub(crate) fn hermite_deriv(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0 + (6.0 * t - 6.0 * t2) * y1) / h + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1
}

/// Trapezoid rule over samples.
pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_reach_their_normal_forms() {
        let cases = [
            (AMatrix { a11: -0.3, a12: 0.8, a21: 0.5 }, "hyp"),
            (AMatrix { a11: 0.0, a12: 1.0, a21: 0.0 }, "nil"),
            (AMatrix { a11: 0.2, a12: -1.0, a21: 0.9 }, "ell"),
            (AMatrix { a11: 0.5, a12: 0.5, a21: -0.5 }, "nil"),
        ];
        for (a, kind) in cases {
            let f = ConjugationFrame::for_matrix(&a, 1e-12).unwrap();
            assert!(f.form_error(&a) < 1e-12, "{kind} {:?}", f.conjugate(&a));
            let ok = matches!(
                (kind, f.target),
                ("hyp", TargetForm::HyperbolicDiag(_)) | ("nil", TargetForm::NilpotentJordan) | ("ell", TargetForm::EllipticRotation(_))
            );
            assert!(ok, "{kind} {:?}", f.target);
        }
        assert!(ConjugationFrame::for_matrix(&AMatrix::default(), 1e-12).is_err());
    }

    #[test]
    fn oriented_frame_absorbs_negative_feedback() {
        for a in [
            AMatrix { a11: -0.3, a12: 0.8, a21: 0.5 },
            AMatrix { a11: 0.5, a12: 0.5, a21: -0.5 },
            AMatrix { a11: 0.2, a12: -1.0, a21: 0.9 },
        ] {
            let f = ConjugationFrame::for_matrix(&a, 1e-12).unwrap().oriented(-1.0);
            let m = -f.conjugate(&a);
            assert!((m - f.target_matrix()).abs().max() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 2.0 * x * x * x - x + 0.5;
        let dp = |x: f64| 6.0 * x * x - 1.0;
        let (a, b) = (0.3, 1.7);
        for k in 0..=10 {
            let x = a + (b - a) * k as f64 / 10.0;
            assert!((hermite(a, b, p(a), p(b), dp(a), dp(b), x) - p(x)).abs() < 1e-13);
            assert!((hermite_deriv(a, b, p(a), p(b), dp(a), dp(b), x) - dp(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn fg_vanish_in_nilpotent_form() {
        for th in [0.1, 1.0, 2.5, -4.0] {
            let (f, g) = degenerate_fg(0.0, 1.0, 0.0, th);
            assert!(f.abs() < 1e-15 && g.abs() < 1e-15);
        }
        let (f, g) = degenerate_fg(0.0, 1.1, -0.1, 0.7);
        assert!(f.abs() < 1e-15 && (g + 0.1).abs() < 1e-15);
    }
}
