//! Normal and abnormal extremals of rank-2 structures.
//!
//! The abnormal flow integrates the lift with the feedback `u = sign h/|h|`,
//! where `h = (-h212, h112)`, and keeps the Goh functions `h1, h2, h12` at zero
//! by a minimal-norm projection of the covector after every accepted step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{eigvec, line_angle, min_norm_solve, norm, saddle_eigen};
use crate::ode::{bisect, Dopri5, Tolerances};
use crate::structures::SRStructure;
use crate::vfield::{BracketWord, CompiledField};

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl ExtremalState {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: p.len() });
        }
        if norm(&p) == 0.0 {
            return Err(Error::Precondition("covector must be nonzero".into()));
        }
        Ok(ExtremalState { x, p })
    }

    fn packed(&self) -> Vec<f64> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.p);
        y
    }

    fn unpack(y: &[f64]) -> Self {
        let n = y.len() / 2;
        ExtremalState { x: y[..n].to_vec(), p: y[n..].to_vec() }
    }
}

/// Trace-free 2x2 matrix `(a11, a12; a21, -a11)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
}

impl AMatrix {
    pub fn a22(&self) -> f64 {
        -self.a11
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22()
    }

    pub fn det(&self) -> f64 {
        -self.a11 * self.a11 - self.a12 * self.a21
    }

    pub fn norm(&self) -> f64 {
        (2.0 * self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21).sqrt()
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a21, self.a22())
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] - self.a11 * v[1]]
    }

    pub fn sub(&self, o: &AMatrix) -> AMatrix {
        AMatrix { a11: self.a11 - o.a11, a12: self.a12 - o.a12, a21: self.a21 - o.a21 }
    }

    pub fn scale(&self, k: f64) -> AMatrix {
        AMatrix { a11: k * self.a11, a12: k * self.a12, a21: k * self.a21 }
    }
}

fn word(s: &str) -> BracketWord {
    s.parse().expect("static word")
}

fn compile_word(s: &SRStructure, w: &str) -> Result<CompiledField> {
    Ok(s.bracket(&word(w))?.compile())
}

/// Compiled bracket fields needed by rank-2 abnormal dynamics.
#[derive(Clone, Debug)]
pub struct Rank2Brackets {
    pub x1: CompiledField,
    pub x2: CompiledField,
    pub x12: CompiledField,
    pub x112: CompiledField,
    pub x212: CompiledField,
    pub x1112: CompiledField,
    pub x2112: CompiledField,
    pub x2212: CompiledField,
    pub x1212: CompiledField,
}

impl Rank2Brackets {
    pub fn new(s: &SRStructure) -> Result<Self> {
        if s.rank() != 2 {
            return Err(Error::Precondition(format!("rank-2 frame required, got rank {}", s.rank())));
        }
        Ok(Rank2Brackets {
            x1: compile_word(s, "1")?,
            x2: compile_word(s, "2")?,
            x12: compile_word(s, "12")?,
            x112: compile_word(s, "112")?,
            x212: compile_word(s, "212")?,
            x1112: compile_word(s, "1112")?,
            x2112: compile_word(s, "2112")?,
            x2212: compile_word(s, "2212")?,
            x1212: compile_word(s, "1212")?,
        })
    }

    pub fn dim(&self) -> usize {
        self.x1.dim()
    }

    /// `(h1, h2, h12)`.
    pub fn goh(&self, x: &[f64], p: &[f64]) -> [f64; 3] {
        [self.x1.pair(x, p), self.x2.pair(x, p), self.x12.pair(x, p)]
    }

    pub fn goh_residual(&self, x: &[f64], p: &[f64]) -> f64 {
        self.goh(x, p).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `h = (-h212, h112)`.
    pub fn h(&self, x: &[f64], p: &[f64]) -> [f64; 2] {
        [-self.x212.pair(x, p), self.x112.pair(x, p)]
    }

    pub fn a(&self, x: &[f64], p: &[f64]) -> AMatrix {
        AMatrix { a11: -self.x2112.pair(x, p), a12: -self.x2212.pair(x, p), a21: self.x1112.pair(x, p) }
    }

    /// `|h1212 - h2112|`, with both sides from independently built brackets.
    pub fn jacobi_residual(&self, x: &[f64], p: &[f64]) -> f64 {
        (self.x1212.pair(x, p) - self.x2112.pair(x, p)).abs()
    }

    /// Lift of the control system: `xdot = u1 X1 + u2 X2`, `pdot = -(u1 DX1^T p + u2 DX2^T p)`.
    pub fn lift_rhs(&self, y: &[f64], u: [f64; 2], dy: &mut [f64]) {
        let n = self.dim();
        let (x, p) = y.split_at(n);
        let (dx, dp) = dy.split_at_mut(n);
        let mut tmp = [0.0f64; 16];
        let buf = &mut tmp[..n];
        self.x1.eval_into(x, buf);
        for i in 0..n {
            dx[i] = u[0] * buf[i];
        }
        self.x2.eval_into(x, buf);
        for i in 0..n {
            dx[i] += u[1] * buf[i];
        }
        dp.iter_mut().for_each(|v| *v = 0.0);
        self.x1.add_pullback(x, p, -u[0], dp);
        self.x2.add_pullback(x, p, -u[1], dp);
    }

    /// Minimal-norm correction of `p` onto `{h1 = h2 = h12 = 0}` at `x`.
    ///
    /// Returns the corrected covector and the displacement norm.
    pub fn goh_project(&self, x: &[f64], p: &[f64]) -> (Vec<f64>, f64) {
        let n = self.dim();
        let rows = [self.x1.eval(x), self.x2.eval(x), self.x12.eval(x)];
        let g = DMatrix::from_fn(3, n, |r, c| rows[r][c]);
        let r = self.goh(x, p);
        let rhs = DVector::from_vec(vec![-r[0], -r[1], -r[2]]);
        let dp = min_norm_solve(&g, &rhs, 1e-12);
        let out: Vec<f64> = p.iter().zip(dp.iter()).map(|(a, b)| a + b).collect();
        (out, dp.norm())
    }
}

/// `h_i = <p, X_i(x)>` for a 1-based frame index.
pub fn hamiltonian_lift(s: &SRStructure, st: &ExtremalState, i: usize) -> Result<f64> {
    if i == 0 || i > s.rank() {
        return Err(Error::LetterOutOfRange { letter: i, frame_len: s.rank() });
    }
    bracket_function(s, st, &BracketWord::new(vec![i])?)
}

/// `h_w = <p, X_w(x)>`.
pub fn bracket_function(s: &SRStructure, st: &ExtremalState, w: &BracketWord) -> Result<f64> {
    if st.x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: st.x.len() });
    }
    let f = s.bracket(w)?;
    Ok(f.components().iter().zip(&st.p).map(|(c, pi)| pi * c.eval(&st.x)).sum())
}

/// The matrix `A` at a state, after checking `h1212 = h2112`.
pub fn a_matrix(s: &SRStructure, st: &ExtremalState) -> Result<AMatrix> {
    let b = Rank2Brackets::new(s)?;
    let residual = b.jacobi_residual(&st.x, &st.p);
    if residual > 1e-10 {
        return Err(Error::JacobiInconsistent { residual });
    }
    Ok(b.a(&st.x, &st.p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<ExtremalState>,
    pub hamiltonian: Vec<f64>,
}

fn normal_hamiltonian(fields: &[CompiledField], x: &[f64], p: &[f64]) -> f64 {
    0.5 * fields.iter().map(|f| f.pair(x, p).powi(2)).sum::<f64>()
}

/// Normal extremal of `H = 1/2 sum h_i^2`, sampled on `steps + 1` uniform nodes.
pub fn normal_flow(s: &SRStructure, st0: &ExtremalState, t_end: f64, steps: usize) -> Result<NormalTrajectory> {
    normal_flow_with(s, st0, t_end, steps, Tolerances::uniform(1e-12))
}

pub fn normal_flow_with(s: &SRStructure, st0: &ExtremalState, t_end: f64, steps: usize, tol: Tolerances) -> Result<NormalTrajectory> {
    if steps == 0 {
        return Err(Error::Precondition("normal_flow needs steps >= 1".into()));
    }
    let n = s.dim();
    if st0.x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: st0.x.len() });
    }
    let fields: Vec<CompiledField> = s.frame().iter().map(|f| f.compile()).collect();
    let h0 = normal_hamiltonian(&fields, &st0.x, &st0.p);
    let mut out = NormalTrajectory { t: vec![0.0], states: vec![st0.clone()], hamiltonian: vec![h0] };
    if t_end <= 0.0 {
        return Ok(out);
    }
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (x, p) = y.split_at(n);
        let (dx, dp) = dy.split_at_mut(n);
        dx.iter_mut().for_each(|v| *v = 0.0);
        dp.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; n];
        for f in &fields {
            let hi = f.pair(x, p);
            f.eval_into(x, &mut buf);
            for k in 0..n {
                dx[k] += hi * buf[k];
            }
            f.add_pullback(x, p, -hi, dp);
        }
    };
    let mut stepper = Dopri5::new(rhs, 0.0, &st0.packed(), tol);
    for k in 1..=steps {
        let tk = t_end * k as f64 / steps as f64;
        while stepper.t() < tk {
            stepper.step(tk, f64::INFINITY)?;
        }
        let st = ExtremalState::unpack(stepper.y());
        out.hamiltonian.push(normal_hamiltonian(&fields, &st.x, &st.p));
        out.t.push(tk);
        out.states.push(st);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    Horizon,
    /// `h` reached zero (the time is also listed in `zeros`).
    Zero,
    /// The frozen-control landing crossed the zero plane with `|h|` above `zero_tol`.
    NearMiss {
        min_h: f64,
    },
}

/// Planar data shared by abnormal and model feedback runs.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackTrace {
    pub sign: f64,
    pub t: Vec<f64>,
    pub u: Vec<[f64; 2]>,
    pub h: Vec<[f64; 2]>,
    pub a: Vec<AMatrix>,
    pub zeros: Vec<f64>,
    pub termination: Termination,
}

impl FeedbackTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn h_norm(&self, k: usize) -> f64 {
        self.h[k][0].hypot(self.h[k][1])
    }

    /// `hdot = A u` at node `k`.
    pub fn h_dot(&self, k: usize) -> [f64; 2] {
        self.a[k].apply(self.u[k])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbnormalTrajectory {
    pub trace: FeedbackTrace,
    pub states: Vec<ExtremalState>,
    /// `max(|h1|, |h2|, |h12|)` before the projection at each node.
    pub goh_residual: Vec<f64>,
    /// Norm of the covector correction applied at each node.
    pub projection: Vec<f64>,
    pub jacobi_residual: Vec<f64>,
}

impl AbnormalTrajectory {
    pub fn max_goh(&self) -> f64 {
        self.goh_residual.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_projection(&self) -> f64 {
        self.projection.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_jacobi(&self) -> f64 {
        self.jacobi_residual.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackOptions {
    pub tol: Tolerances,
    pub max_step: f64,
    /// Zero accepted when `|h| < zero_tol * |h(0)|`.
    pub zero_tol: f64,
    /// Control is frozen once `|h| < terminal_tol * |h(0)|` and nonincreasing.
    pub terminal_tol: f64,
    /// Fraction of `|h|` that a step may remove while `|h|` decreases.
    pub approach_fraction: f64,
    pub goh_tol: f64,
    pub projection_bound: f64,
    pub precondition_tol: f64,
}

impl Default for FeedbackOptions {
    fn default() -> Self {
        FeedbackOptions {
            tol: Tolerances::default(),
            max_step: 0.01,
            zero_tol: 1e-9,
            terminal_tol: 1e-5,
            approach_fraction: 0.25,
            goh_tol: 1e-8,
            projection_bound: 1e-8,
            precondition_tol: 1e-12,
        }
    }
}

/// A planar feedback system: state `y`, planar `h(t, y)`, matrix `A(t, y)`.
trait FeedbackSystem {
    fn rhs(&self, t: f64, y: &[f64], u: [f64; 2], dy: &mut [f64]);
    fn h(&self, t: f64, y: &[f64]) -> [f64; 2];
    fn a(&self, t: f64, y: &[f64]) -> AMatrix;
    /// Post-step correction; returns `(pre-correction residual, displacement)`.
    fn correct(&self, _t: f64, _y: &mut [f64]) -> Result<(f64, f64)> {
        Ok((0.0, 0.0))
    }
}

fn feedback_u(h: [f64; 2], sign: f64) -> [f64; 2] {
    let r = h[0].hypot(h[1]);
    if r == 0.0 {
        [0.0, 0.0]
    } else {
        [sign * h[0] / r, sign * h[1] / r]
    }
}

struct RawRun {
    trace: FeedbackTrace,
    states: Vec<Vec<f64>>,
    residual: Vec<f64>,
    displacement: Vec<f64>,
}

fn run_feedback<S: FeedbackSystem>(sys: &S, y0: &[f64], t_end: f64, sign: f64, opt: &FeedbackOptions) -> Result<RawRun> {
    let h0 = sys.h(0.0, y0);
    let h0n = h0[0].hypot(h0[1]);
    if !(h0n > 0.0) {
        return Err(Error::Precondition("|h(0)| must be positive".into()));
    }
    let mut run = RawRun {
        trace: FeedbackTrace {
            sign,
            t: vec![0.0],
            u: vec![feedback_u(h0, sign)],
            h: vec![h0],
            a: vec![sys.a(0.0, y0)],
            zeros: Vec::new(),
            termination: Termination::Horizon,
        },
        states: vec![y0.to_vec()],
        residual: vec![0.0],
        displacement: vec![0.0],
    };
    if t_end <= 0.0 {
        return Ok(run);
    }
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| sys.rhs(t, y, feedback_u(sys.h(t, y), sign), dy);
    let mut stepper = Dopri5::new(rhs, 0.0, y0, opt.tol);
    let mut hist: Vec<f64> = vec![h0n];
    let mut y = y0.to_vec();
    while stepper.t() < t_end {
        let k = run.trace.t.len() - 1;
        let hk = run.trace.h[k];
        let hn = hist[hist.len() - 1];
        let hd = run.trace.h_dot(k);
        let rate = (hk[0] * hd[0] + hk[1] * hd[1]) / hn;
        let mut cap = opt.max_step;
        if rate < 0.0 {
            cap = cap.min(opt.approach_fraction * hn / -rate);
        }
        stepper.step(t_end, cap)?;
        let t = stepper.t();
        y.copy_from_slice(stepper.y());
        let (res, disp) = sys.correct(t, &mut y)?;
        if disp > 0.0 {
            stepper.set_state(&y);
        }
        let h = sys.h(t, &y);
        let hn = h[0].hypot(h[1]);
        run.trace.t.push(t);
        run.trace.u.push(feedback_u(h, sign));
        run.trace.h.push(h);
        run.trace.a.push(sys.a(t, &y));
        run.states.push(y.clone());
        run.residual.push(res);
        run.displacement.push(disp);
        hist.push(hn);
        let settled = hist.len() > 5 && hist[hist.len() - 6..].windows(2).all(|w| w[1] <= w[0]);
        if hn < opt.terminal_tol * h0n && settled {
            land(sys, &mut run, t_end, sign, h0n, opt)?;
            return Ok(run);
        }
    }
    Ok(run)
}

/// Integrates with the last control frozen and bisects the crossing of `h . h_hat = 0`.
fn land<S: FeedbackSystem>(sys: &S, run: &mut RawRun, t_end: f64, sign: f64, h0n: f64, opt: &FeedbackOptions) -> Result<()> {
    let k = run.trace.t.len() - 1;
    let t0 = run.trace.t[k];
    let y0 = run.states[k].clone();
    let hl = run.trace.h[k];
    let hln = hl[0].hypot(hl[1]);
    let hhat = [hl[0] / hln, hl[1] / hln];
    let u = feedback_u(hl, sign);
    let g = |t: f64, y: &[f64]| {
        let h = sys.h(t, y);
        h[0] * hhat[0] + h[1] * hhat[1]
    };
    let speed = -{
        let hd = run.trace.h_dot(k);
        hd[0] * hhat[0] + hd[1] * hhat[1]
    };
    if !(speed > 0.0) {
        return Ok(());
    }
    let t_guess = hln / speed;
    let limit = t_end.min(t0 + 4.0 * t_guess);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| sys.rhs(t, y, u, dy);
    let mut stepper = Dopri5::new(rhs, t0, &y0, opt.tol);
    let mut g_prev = hln;
    while stepper.t() < limit {
        stepper.step(limit, 0.5 * t_guess)?;
        let t = stepper.t();
        let gn = g(t, stepper.y());
        if gn <= 0.0 {
            let a = stepper.t_prev();
            let ts = bisect(|s| g(s, &stepper.dense(s)), a, t, g_prev, gn, 1e-15 * t.max(1.0));
            let ys = stepper.dense(ts);
            let h = sys.h(ts, &ys);
            let hn = h[0].hypot(h[1]);
            run.trace.t.push(ts);
            run.trace.u.push(u);
            run.trace.h.push(h);
            run.trace.a.push(sys.a(ts, &ys));
            let mut yc = ys.clone();
            let (res, disp) = sys.correct(ts, &mut yc)?;
            run.states.push(ys);
            run.residual.push(res);
            run.displacement.push(disp);
            if hn < opt.zero_tol * h0n {
                run.trace.zeros.push(ts);
                run.trace.termination = Termination::Zero;
            } else {
                run.trace.termination = Termination::NearMiss { min_h: hn };
            }
            return Ok(());
        }
        g_prev = gn;
    }
    let hn = {
        let h = sys.h(stepper.t(), stepper.y());
        h[0].hypot(h[1])
    };
    run.trace.termination = Termination::NearMiss { min_h: hn };
    Ok(())
}

struct LiftSystem<'a> {
    b: &'a Rank2Brackets,
    opt: &'a FeedbackOptions,
}

impl FeedbackSystem for LiftSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64], u: [f64; 2], dy: &mut [f64]) {
        self.b.lift_rhs(y, u, dy);
    }

    fn h(&self, _t: f64, y: &[f64]) -> [f64; 2] {
        let (x, p) = y.split_at(self.b.dim());
        self.b.h(x, p)
    }

    fn a(&self, _t: f64, y: &[f64]) -> AMatrix {
        let (x, p) = y.split_at(self.b.dim());
        self.b.a(x, p)
    }

    fn correct(&self, t: f64, y: &mut [f64]) -> Result<(f64, f64)> {
        let n = self.b.dim();
        let (x, p) = y.split_at_mut(n);
        let res = self.b.goh_residual(x, p);
        let (pc, disp) = self.b.goh_project(x, p);
        if disp > self.opt.projection_bound {
            return Err(Error::ProjectionTooLarge { t, displacement: disp });
        }
        p.copy_from_slice(&pc);
        Ok((res, disp))
    }
}

/// Abnormal extremal driven by `u = sign h/|h|` until `t_end` or a zero of `h`.
pub fn abnormal_feedback_flow(s: &SRStructure, st0: &ExtremalState, t_end: f64, sign: f64) -> Result<AbnormalTrajectory> {
    abnormal_feedback_flow_with(s, st0, t_end, sign, &FeedbackOptions::default())
}

pub fn abnormal_feedback_flow_with(
    s: &SRStructure,
    st0: &ExtremalState,
    t_end: f64,
    sign: f64,
    opt: &FeedbackOptions,
) -> Result<AbnormalTrajectory> {
    let b = Rank2Brackets::new(s)?;
    if st0.x.len() != s.dim() || st0.p.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: st0.x.len() });
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Precondition(format!("sign must be +1 or -1, got {sign}")));
    }
    let goh = b.goh_residual(&st0.x, &st0.p);
    if goh > opt.precondition_tol * norm(&st0.p).max(1.0) {
        return Err(Error::Precondition(format!("initial covector violates h1 = h2 = h12 = 0 (residual {goh:e})")));
    }
    let sys = LiftSystem { b: &b, opt };
    let raw = run_feedback(&sys, &st0.packed(), t_end, sign, opt)?;
    let n = s.dim();
    let jacobi = raw.states.iter().map(|y| b.jacobi_residual(&y[..n], &y[n..])).collect();
    Ok(AbnormalTrajectory {
        trace: raw.trace,
        states: raw.states.iter().map(|y| ExtremalState::unpack(y)).collect(),
        goh_residual: raw.residual,
        projection: raw.displacement,
        jacobi_residual: jacobi,
    })
}

struct PlanarSystem<F> {
    a: F,
}

impl<F: Fn(f64) -> AMatrix> FeedbackSystem for PlanarSystem<F> {
    fn rhs(&self, t: f64, _y: &[f64], u: [f64; 2], dy: &mut [f64]) {
        let v = (self.a)(t).apply(u);
        dy[0] = v[0];
        dy[1] = v[1];
    }

    fn h(&self, _t: f64, y: &[f64]) -> [f64; 2] {
        [y[0], y[1]]
    }

    fn a(&self, t: f64, _y: &[f64]) -> AMatrix {
        (self.a)(t)
    }
}

/// The reduced system `hdot = A(t) sign h/|h|` in the plane.
pub fn planar_feedback_flow(
    a: impl Fn(f64) -> AMatrix,
    h0: [f64; 2],
    t_end: f64,
    sign: f64,
    opt: &FeedbackOptions,
) -> Result<FeedbackTrace> {
    Ok(run_feedback(&PlanarSystem { a }, &h0, t_end, sign, opt)?.trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroClass {
    HyperbolicNegDet,
    DegenerateZeroDet,
    ZeroMatrix,
    PositiveDetViolation,
}

pub fn classify_zero(a: &AMatrix, det_tol: f64) -> ZeroClass {
    let det = a.det();
    if a.norm() <= det_tol {
        ZeroClass::ZeroMatrix
    } else if det < -det_tol {
        ZeroClass::HyperbolicNegDet
    } else if det > det_tol {
        ZeroClass::PositiveDetViolation
    } else {
        ZeroClass::DegenerateZeroDet
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitDirection {
    pub direction: Vector2<f64>,
    /// Angle to the nearest eigenline of `A(t1)`.
    pub residual: f64,
    /// Eigenvalue of that eigenline.
    pub eigenvalue: f64,
    pub class: ZeroClass,
    pub nodes_used: usize,
}

fn lsq_poly_constant(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
    let m = DMatrix::from_fn(xs.len(), degree + 1, |r, c| xs[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    min_norm_solve(&m, &b, 1e-14)[0]
}

/// Extrapolates `u(t)` as `t` increases to the zero `t1` and compares with the eigenlines of `A(t1)`.
pub fn limit_control_direction(trace: &FeedbackTrace, t1: f64) -> Result<LimitDirection> {
    if !trace.zeros.iter().any(|&z| (z - t1).abs() <= 1e-12 * t1.abs().max(1.0)) {
        return Err(Error::Precondition(format!("t1 = {t1} is not a recorded zero")));
    }
    let k1 = trace.t.iter().position(|&t| (t - t1).abs() <= 1e-12 * t1.abs().max(1.0)).unwrap_or(trace.len() - 1);
    let t_start = trace.t[0];
    let window_start = t1 - 0.1 * (t1 - t_start);
    let idx: Vec<usize> = (0..k1).filter(|&k| trace.t[k] >= window_start).collect();
    if idx.len() < 20 {
        return Err(Error::TooFewNodes { needed: 20, found: idx.len() });
    }
    let a1 = trace.a[k1];
    let class = classify_zero(&a1, 1e-12);
    if class == ZeroClass::ZeroMatrix {
        return Err(Error::NoEigenline("A(t1) is the zero matrix"));
    }
    let ref_angle = {
        let u = trace.u[idx[idx.len() - 1]];
        u[1].atan2(u[0])
    };
    let taus: Vec<f64> = idx.iter().map(|&k| t1 - trace.t[k]).collect();
    let angles: Vec<f64> = idx
        .iter()
        .map(|&k| {
            let u = trace.u[k];
            let mut d = u[1].atan2(u[0]) - ref_angle;
            while d > core::f64::consts::PI {
                d -= 2.0 * core::f64::consts::PI;
            }
            while d < -core::f64::consts::PI {
                d += 2.0 * core::f64::consts::PI;
            }
            d
        })
        .collect();
    let theta = ref_angle + lsq_poly_constant(&taus, &angles, 2.min(idx.len() - 1));
    let dir = Vector2::new(theta.cos(), theta.sin());
    let m = a1.matrix();
    let (residual, eigenvalue) = match saddle_eigen(&m) {
        Some((lm, vm, lp, vp)) => {
            let (am, ap) = (line_angle(&dir, &vm), line_angle(&dir, &vp));
            if am <= ap {
                (am, lm)
            } else {
                (ap, lp)
            }
        }
        None => {
            let det = a1.det();
            if det > 0.0 && det.abs() > 1e-12 * a1.norm().powi(2) {
                return Err(Error::NoEigenline("A(t1) has no real eigenline"));
            }
            (line_angle(&dir, &eigvec(&m, 0.0)), 0.0)
        }
    };
    Ok(LimitDirection { direction: dir, residual, eigenvalue, class, nodes_used: idx.len() })
}

/// Orthonormal basis (as rows) of the annihilator of `span{X1, X2, X12}(x)`.
pub fn goh_annihilator_basis(b: &Rank2Brackets, x: &[f64]) -> Vec<Vec<f64>> {
    let n = b.dim();
    let rows = [b.x1.eval(x), b.x2.eval(x), b.x12.eval(x)];
    let g = DMatrix::from_fn(n, 3, |r, c| rows[c][r]);
    let full = {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (n, 3)).copy_from(&g);
        m
    };
    let svd = full.svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (j, sv) in svd.singular_values.iter().enumerate() {
        if *sv <= 1e-12 * smax.max(1.0) {
            out.push(u.column(j).iter().cloned().collect());
        }
    }
    out
}

/// Uniform sample on the unit sphere of the annihilator of `D^2(x0)`, rejecting `|h| < reject_below`.
pub fn sample_abnormal_covector<R: Rng + ?Sized>(s: &SRStructure, x0: &[f64], rng: &mut R, reject_below: f64) -> Result<ExtremalState> {
    let b = Rank2Brackets::new(s)?;
    let basis = goh_annihilator_basis(&b, x0);
    if basis.is_empty() {
        return Err(Error::Precondition("annihilator of D^2 is trivial at x0".into()));
    }
    for _ in 0..10_000 {
        let coef: Vec<f64> = (0..basis.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut p = vec![0.0; s.dim()];
        for (c, v) in coef.iter().zip(&basis) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += c * vi;
            }
        }
        let r = norm(&p);
        if r == 0.0 {
            continue;
        }
        p.iter_mut().for_each(|v| *v /= r);
        let (p, _) = b.goh_project(x0, &p);
        let h = b.h(x0, &p);
        if h[0].hypot(h[1]) >= reject_below {
            return ExtremalState::new(x0.to_vec(), p);
        }
    }
    Err(Error::NonConvergence("covector rejection sampling exhausted".into()))
}

/// Least-norm change of `p` placing `h(0)` on the eigenline of `A` whose eigenvalue
/// `lambda` satisfies `sign * lambda < 0`, keeping the Goh functions and `A` unchanged.
/// The result is renormalised to `|p| = 1`.
pub fn aim_along_eigenline(s: &SRStructure, st: &ExtremalState, sign: f64) -> Result<ExtremalState> {
    let b = Rank2Brackets::new(s)?;
    let x = &st.x;
    let a = b.a(x, &st.p);
    let (lm, vm, _, vp) = saddle_eigen(&a.matrix()).ok_or(Error::NoEigenline("A is not hyperbolic"))?;
    let v = if sign * lm < 0.0 { vm } else { vp };
    let h = b.h(x, &st.p);
    let hn = h[0].hypot(h[1]);
    let v = if v[0] * h[0] + v[1] * h[1] >= 0.0 { v } else { -v };
    with_h(&b, st, [hn * v[0], hn * v[1]])
}

/// Least-norm change of `p` giving `h(x) = target` with `h1 = h2 = h12 = 0` and `A` unchanged,
/// renormalised to `|p| = 1`.
fn with_h(b: &Rank2Brackets, st: &ExtremalState, target: [f64; 2]) -> Result<ExtremalState> {
    let x = &st.x;
    let fields = [&b.x1, &b.x2, &b.x12, &b.x1112, &b.x2112, &b.x2212, &b.x212, &b.x112];
    let rows: Vec<Vec<f64>> = fields.iter().map(|f| f.eval(x)).collect();
    let n = b.dim();
    let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let current: Vec<f64> = fields.iter().map(|f| f.pair(x, &st.p)).collect();
    let mut want = current.clone();
    for w in want.iter_mut().take(3) {
        *w = 0.0;
    }
    want[6] = -target[0];
    want[7] = target[1];
    let rhs = DVector::from_iterator(rows.len(), want.iter().zip(&current).map(|(w, c)| w - c));
    let dp = min_norm_solve(&m, &rhs, 1e-12);
    let mut p: Vec<f64> = st.p.iter().zip(dp.iter()).map(|(a, b)| a + b).collect();
    let r = norm(&p);
    p.iter_mut().for_each(|v| *v /= r);
    let (p, _) = b.goh_project(x, &p);
    ExtremalState::new(x.clone(), p)
}

/// Side of the attracting eigenline on which `h` passes: the sign of the repelling component
/// of `h` at its closest approach, in the eigenbasis of `A` there.
fn miss_side(trace: &FeedbackTrace, sign: f64) -> f64 {
    let k = (0..trace.len()).min_by(|&i, &j| trace.h_norm(i).total_cmp(&trace.h_norm(j))).unwrap_or(0);
    let Some((lm, vm, _, vp)) = saddle_eigen(&trace.a[k].matrix()) else {
        return 0.0;
    };
    let (vs, vu) = if sign * lm < 0.0 { (vm, vp) } else { (vp, vm) };
    let h0 = Vector2::new(trace.h[0][0], trace.h[0][1]);
    let vs = if vs.dot(&h0) >= 0.0 { vs } else { -vs };
    let vu = if vs[0] * vu[1] - vs[1] * vu[0] >= 0.0 { vu } else { -vu };
    let basis = Matrix2::from_columns(&[vs, vu]);
    let Some(inv) = basis.try_inverse() else {
        return 0.0;
    };
    let c = inv * Vector2::new(trace.h[k][0], trace.h[k][1]);
    c[1].signum()
}

#[derive(Clone, Debug)]
pub struct ShotRun {
    pub initial: ExtremalState,
    pub trajectory: AbnormalTrajectory,
    /// Shooting runs performed, including the accepted one.
    pub runs: usize,
}

/// Shoots on the direction of `h(0)` (keeping `A(0)` and the Goh functions) until the abnormal
/// run with `u = sign h/|h|` reaches a zero of `h` before `t_end`.
///
/// Starts on the attracting eigenline of `A(0)` and brackets the miss side by the total rotation of `h`.
pub fn shoot_to_zero(s: &SRStructure, st: &ExtremalState, t_end: f64, sign: f64, opt: &FeedbackOptions) -> Result<ShotRun> {
    let b = Rank2Brackets::new(s)?;
    let aimed = aim_along_eigenline(s, st, sign)?;
    let h = b.h(&aimed.x, &aimed.p);
    let hn = h[0].hypot(h[1]);
    let phi0 = h[1].atan2(h[0]);
    let mut runs = 0;
    let mut attempt = |phi: f64| -> Result<(ExtremalState, AbnormalTrajectory, f64)> {
        runs += 1;
        let st = with_h(&b, &aimed, [hn * phi.cos(), hn * phi.sin()])?;
        let tr = abnormal_feedback_flow_with(s, &st, t_end, sign, opt)?;
        let side = miss_side(&tr.trace, sign);
        Ok((st, tr, side))
    };
    let (st0, tr0, side0) = attempt(phi0)?;
    if tr0.trace.termination == Termination::Zero {
        return Ok(ShotRun { initial: st0, trajectory: tr0, runs: 1 });
    }
    let mut delta = 1e-3;
    let (mut lo, mut hi) = loop {
        let (.., side) = attempt(phi0 + delta)?;
        if side * side0 < 0.0 {
            break (phi0, phi0 + delta);
        }
        let (.., side) = attempt(phi0 - delta)?;
        if side * side0 < 0.0 {
            break (phi0 - delta, phi0);
        }
        delta *= 4.0;
        if delta > 1.0 {
            return Err(Error::NonConvergence("no sign change of the miss side near the eigenline".into()));
        }
    };
    let side_lo = if lo == phi0 { side0 } else { -side0 };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (st, tr, side) = attempt(mid)?;
        if tr.trace.termination == Termination::Zero {
            return Ok(ShotRun { initial: st, trajectory: tr, runs });
        }
        if side * side_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * phi0.abs().max(1.0) {
            break;
        }
    }
    Err(Error::NonConvergence("shooting bracket collapsed without reaching h = 0".into()))
}

/// Kernel-following trajectory on `{h = 0}`: `u(t)` is the unit kernel vector of `A(t)`,
/// oriented continuously from `orientation`. Uncertified: no minimality claim is made.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<ExtremalState>,
    pub u: Vec<[f64; 2]>,
    pub h_norm: Vec<f64>,
    pub det: Vec<f64>,
    pub certified: bool,
}

pub fn kernel_following_flow(
    s: &SRStructure,
    st0: &ExtremalState,
    t_end: f64,
    orientation: [f64; 2],
    opt: &FeedbackOptions,
) -> Result<KernelTrajectory> {
    let b = Rank2Brackets::new(s)?;
    let n = s.dim();
    let a0 = b.a(&st0.x, &st0.p);
    if a0.norm() == 0.0 || a0.det().abs() > 1e-10 * a0.norm().powi(2) {
        return Err(Error::Precondition("kernel following needs det A = 0 and A != 0".into()));
    }
    let kernel = |a: &AMatrix, prev: [f64; 2]| -> [f64; 2] {
        let k = eigvec(&a.matrix(), 0.0);
        if k[0] * prev[0] + k[1] * prev[1] >= 0.0 {
            [k[0], k[1]]
        } else {
            [-k[0], -k[1]]
        }
    };
    let u0 = kernel(&a0, orientation);
    let cell = core::cell::Cell::new(u0);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let a = b.a(&y[..n], &y[n..]);
        let u = kernel(&a, cell.get());
        b.lift_rhs(y, u, dy);
    };
    let mut stepper = Dopri5::new(rhs, 0.0, &st0.packed(), opt.tol);
    let h0 = b.h(&st0.x, &st0.p);
    let mut out = KernelTrajectory {
        t: vec![0.0],
        states: vec![st0.clone()],
        u: vec![u0],
        h_norm: vec![h0[0].hypot(h0[1])],
        det: vec![a0.det()],
        certified: false,
    };
    while t_end > 0.0 && stepper.t() < t_end {
        stepper.step(t_end, opt.max_step)?;
        let y = stepper.y();
        let st = ExtremalState::unpack(y);
        let a = b.a(&st.x, &st.p);
        let u = kernel(&a, cell.get());
        cell.set(u);
        let h = b.h(&st.x, &st.p);
        out.t.push(stepper.t());
        out.u.push(u);
        out.h_norm.push(h[0].hypot(h[1]));
        out.det.push(a.det());
        out.states.push(st);
    }
    Ok(out)
}

/// Central-difference check of `d/dt h_w = u1 h_{1w} + u2 h_{2w}` at interior nodes.
///
/// Returns the worst relative error over the given words.
pub fn propagation_law_error(s: &SRStructure, traj: &AbnormalTrajectory, words: &[BracketWord], delta: f64) -> Result<f64> {
    let b = Rank2Brackets::new(s)?;
    let n = s.dim();
    let fields: Vec<(CompiledField, CompiledField, CompiledField)> = words
        .iter()
        .map(|w| Ok((s.bracket(w)?.compile(), s.bracket(&w.prepend(1))?.compile(), s.bracket(&w.prepend(2))?.compile())))
        .collect::<Result<_>>()?;
    let sign = traj.trace.sign;
    let tol = Tolerances::uniform(1e-13);
    let mut worst: f64 = 0.0;
    let last = traj.states.len().saturating_sub(1);
    for k in 1..last {
        let t = traj.trace.t[k];
        if t - delta <= traj.trace.t[0] || t + delta >= traj.trace.t[last] {
            continue;
        }
        let y0 = traj.states[k].packed();
        let fwd = |_t: f64, y: &[f64], dy: &mut [f64]| b.lift_rhs(y, feedback_u(b.h(&y[..n], &y[n..]), sign), dy);
        let bwd = |_t: f64, y: &[f64], dy: &mut [f64]| {
            b.lift_rhs(y, feedback_u(b.h(&y[..n], &y[n..]), sign), dy);
            dy.iter_mut().for_each(|v| *v = -*v);
        };
        let yp = crate::ode::integrate_to(fwd, 0.0, &y0, delta, tol)?;
        let ym = crate::ode::integrate_to(bwd, 0.0, &y0, delta, tol)?;
        let (x, p) = y0.split_at(n);
        let u = feedback_u(b.h(x, p), sign);
        let scale = {
            let h = b.h(x, p);
            h[0].hypot(h[1])
        };
        for (fw, f1w, f2w) in &fields {
            let d = (fw.pair(&yp[..n], &yp[n..]) - fw.pair(&ym[..n], &ym[n..])) / (2.0 * delta);
            let pred = u[0] * f1w.pair(x, p) + u[1] * f2w.pair(x, p);
            let err = (d - pred).abs() / pred.abs().max(scale);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Label used in reports for a termination reason.
pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Horizon => "horizon".into(),
        Termination::Zero => "zero".into(),
        Termination::NearMiss { min_h } => format!("near-miss({min_h:e})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::free_nilpotent_frame;

    fn dz3() -> ExtremalState {
        ExtremalState::new(vec![0.0; 3], vec![0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn lifts_and_brackets() {
        let m = SRStructure::martinet();
        assert_eq!(hamiltonian_lift(&m, &dz3(), 1).unwrap(), 0.0);
        let dx = ExtremalState::new(vec![0.3, -1.0, 2.0], vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(hamiltonian_lift(&m, &dx, 1).unwrap(), 1.0);
        let at2 = ExtremalState::new(vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(hamiltonian_lift(&m, &at2, 2).unwrap(), 2.0);
        let w = |s: &str| s.parse::<BracketWord>().unwrap();
        assert_eq!(bracket_function(&m, &dz3(), &w("112")).unwrap(), 1.0);
        assert_eq!(bracket_function(&m, &dz3(), &w("212")).unwrap(), 0.0);
        assert_eq!(bracket_function(&m, &at2, &w("11")).unwrap(), 0.0);
        assert!(hamiltonian_lift(&m, &dz3(), 3).is_err());
    }

    #[test]
    fn martinet_abnormal_line() {
        let m = SRStructure::martinet();
        let tr = abnormal_feedback_flow(&m, &dz3(), 2.0, 1.0).unwrap();
        assert_eq!(tr.trace.termination, Termination::Horizon);
        let last = tr.states.last().unwrap();
        assert!((last.x[1] - 2.0).abs() < 1e-12 && last.x[0].abs() < 1e-14 && last.x[2].abs() < 1e-14);
        for (u, h) in tr.trace.u.iter().zip(&tr.trace.h) {
            assert!(u[0].abs() < 1e-14 && (u[1] - 1.0).abs() < 1e-14);
            assert!(h[0].abs() < 1e-14 && (h[1] - 1.0).abs() < 1e-14);
        }
        assert!(tr.trace.a.iter().all(|a| a.norm() == 0.0));
        assert!(tr.max_goh() <= 1e-8);
    }

    #[test]
    fn zero_horizon_gives_single_node() {
        let tr = abnormal_feedback_flow(&SRStructure::martinet(), &dz3(), 0.0, 1.0).unwrap();
        assert_eq!(tr.states.len(), 1);
    }

    #[test]
    fn preconditions_are_enforced() {
        let m = SRStructure::martinet();
        let bad = ExtremalState::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(abnormal_feedback_flow(&m, &bad, 1.0, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(abnormal_feedback_flow(&m, &dz3(), 1.0, 0.5), Err(Error::Precondition(_))));
        let vanishing = ExtremalState::new(vec![0.0; 3], vec![0.0, 0.0, 1.0]).unwrap();
        let h3 = SRStructure::heisenberg();
        assert!(abnormal_feedback_flow(&h3, &vanishing, 1.0, 1.0).is_err());
    }

    #[test]
    fn a_matrix_examples() {
        let m = SRStructure::martinet();
        let st = ExtremalState::new(vec![0.0, 0.7, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a_matrix(&m, &st).unwrap(), AMatrix::default());
        let f4 = free_nilpotent_frame(4).unwrap();
        let p = vec![0.0, 0.0, 0.0, 0.5, -0.2, 0.3, 0.4, -0.7];
        let st = ExtremalState::new(vec![0.0; 8], p).unwrap();
        let a = a_matrix(&f4, &st).unwrap();
        assert_eq!(a, AMatrix { a11: -0.4, a12: 0.7, a21: 0.3 });
        assert_eq!(a.trace(), 0.0);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_zero(&AMatrix { a11: -1.0, a12: 0.0, a21: 0.0 }, 1e-8), ZeroClass::HyperbolicNegDet);
        assert_eq!(classify_zero(&AMatrix { a11: 0.0, a12: 1.0, a21: 0.0 }, 1e-8), ZeroClass::DegenerateZeroDet);
        assert_eq!(classify_zero(&AMatrix::default(), 1e-8), ZeroClass::ZeroMatrix);
        assert_eq!(classify_zero(&AMatrix { a11: 0.0, a12: 1.0, a21: -1.0 }, 1e-8), ZeroClass::PositiveDetViolation);
    }

    #[test]
    fn heisenberg_normal_geodesics() {
        let h = SRStructure::heisenberg();
        let st = ExtremalState::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
        let tr = normal_flow(&h, &st, 3.0, 30).unwrap();
        for (t, s) in tr.t.iter().zip(&tr.states) {
            assert!((s.x[0] - t).abs() < 1e-10 && s.x[1].abs() < 1e-12 && s.x[2].abs() < 1e-12);
        }
        let st = ExtremalState::new(vec![0.0; 3], vec![0.6, 0.8, 2.0]).unwrap();
        let tr = normal_flow(&h, &st, 10.0, 100).unwrap();
        let h0 = tr.hamiltonian[0];
        assert!((h0 - 0.5).abs() < 1e-15);
        assert!(tr.hamiltonian.iter().all(|v| ((v - h0) / h0).abs() < 1e-8));
        let same = normal_flow(&h, &st, 0.0, 1).unwrap();
        assert_eq!(same.states, vec![st]);
    }

    #[test]
    fn free4_eigenline_run_is_affine() {
        let f4 = free_nilpotent_frame(4).unwrap();
        let p = vec![0.0, 0.0, 0.0, 0.3, -0.9, 0.2, 0.5, 0.6];
        let st = ExtremalState::new(vec![0.0; 8], p).unwrap();
        let st = aim_along_eigenline(&f4, &st, 1.0).unwrap();
        let tr = abnormal_feedback_flow(&f4, &st, 20.0, 1.0).unwrap();
        assert_eq!(tr.trace.termination, Termination::Zero, "{:?}", tr.trace.termination);
        let t1 = tr.trace.zeros[0];
        let a0 = tr.trace.a[0];
        let (lm, vm, _, _) = saddle_eigen(&a0.matrix()).unwrap();
        let h0 = tr.trace.h[0];
        let h0n = h0[0].hypot(h0[1]);
        assert!((t1 - h0n / -lm).abs() < 1e-8 * t1, "t1 {t1} vs {}", h0n / -lm);
        let s = if vm.dot(&Vector2::new(h0[0], h0[1])) > 0.0 { 1.0 } else { -1.0 };
        for (t, h) in tr.trace.t.iter().zip(&tr.trace.h) {
            let pred = [s * (t - t1) * lm * vm[0], s * (t - t1) * lm * vm[1]];
            assert!((h[0] - pred[0]).abs() < 1e-8 && (h[1] - pred[1]).abs() < 1e-8, "{h:?} {pred:?}");
        }
        assert!(tr.trace.a.iter().all(|a| a.sub(&a0).norm() <= 1e-12));
        let lim = limit_control_direction(&tr.trace, t1).unwrap();
        assert!(lim.residual < 1e-4 && lim.eigenvalue < 0.0, "{lim:?}");
    }

    #[test]
    fn planar_saddle_on_stable_axis() {
        let a = AMatrix { a11: -1.0, a12: 0.0, a21: 0.0 };
        let tr = planar_feedback_flow(|_| a, [1.0, 0.0], 5.0, 1.0, &FeedbackOptions::default()).unwrap();
        assert_eq!(tr.termination, Termination::Zero);
        assert!((tr.zeros[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_respects_goh_and_rejection() {
        use rand::SeedableRng;
        let f4 = free_nilpotent_frame(4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let st = sample_abnormal_covector(&f4, &[0.0; 8], &mut rng, 1e-3).unwrap();
            let b = Rank2Brackets::new(&f4).unwrap();
            assert!(b.goh_residual(&st.x, &st.p) < 1e-15);
            assert!((norm(&st.p) - 1.0).abs() < 1e-12);
            let h = b.h(&st.x, &st.p);
            assert!(h[0].hypot(h[1]) >= 1e-3);
        }
    }

    #[test]
    fn kernel_following_keeps_h_zero() {
        let f4 = free_nilpotent_frame(4).unwrap();
        let st = ExtremalState::new(vec![0.0; 8], vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let kt = kernel_following_flow(&f4, &st, 1.0, [0.0, 1.0], &FeedbackOptions::default()).unwrap();
        assert!(!kt.certified);
        assert!(kt.h_norm.iter().all(|&h| h < 1e-12));
        assert!(kt.u.iter().all(|u| u[0].abs() < 1e-12 && (u[1] - 1.0).abs() < 1e-12));
    }
}
