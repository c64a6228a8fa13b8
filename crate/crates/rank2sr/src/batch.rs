//! Independent randomized runs shared by stages and suites. Each run draws from its own
//! ChaCha stream, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rank2sr_core::extremals::{
    abnormal_feedback_flow_with, aim_along_eigenline, classify_zero, limit_control_direction, sample_abnormal_covector, shoot_to_zero,
    AbnormalTrajectory, FeedbackOptions, FeedbackTrace, Rank2Brackets, Termination, ZeroClass,
};
use rank2sr_core::linalg::saddle_eigen;
use rank2sr_core::structures::SRStructure;
use rank2sr_core::Result;
use serde::Serialize;

pub fn stream_rng(seed: u64, stage: usize, run: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((stage as u64) << 40) | run);
    r
}

/// Largest `|h(t) - h_affine(t)|`, where `h_affine` decreases linearly to zero at `t1`
/// along the attracting eigenline of `A(t1)` at rate `|lambda|`.
pub fn affine_residual(trace: &FeedbackTrace, t1: f64) -> Option<f64> {
    let a1 = trace.a.last()?;
    let (lm, vm, lp, vp) = saddle_eigen(&a1.matrix())?;
    let (lam, v) = if trace.sign * lm < 0.0 { (lm, vm) } else { (lp, vp) };
    let h0 = trace.h[0];
    let dir = if v[0] * h0[0] + v[1] * h0[1] >= 0.0 { 1.0 } else { -1.0 };
    let mut worst: f64 = 0.0;
    for (t, h) in trace.t.iter().zip(&trace.h) {
        let c = dir * (t1 - t) * lam.abs();
        worst = worst.max((h[0] - c * v[0]).hypot(h[1] - c * v[1]));
    }
    Some(worst)
}

pub fn a_drift(trace: &FeedbackTrace) -> f64 {
    let a0 = trace.a[0];
    trace.a.iter().map(|a| a.sub(&a0).norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DetsignRecord {
    pub run: u64,
    pub aimed: bool,
    pub det0: f64,
    pub reached_zero: bool,
    pub t1: f64,
    pub class: Option<ZeroClassLabel>,
    pub a_drift: f64,
    pub affine_residual: f64,
    pub goh: f64,
    pub projection: f64,
    pub jacobi: f64,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ZeroClassLabel {
    HyperbolicNegDet,
    DegenerateZeroDet,
    ZeroMatrix,
    PositiveDetViolation,
}

impl From<ZeroClass> for ZeroClassLabel {
    fn from(c: ZeroClass) -> Self {
        match c {
            ZeroClass::HyperbolicNegDet => ZeroClassLabel::HyperbolicNegDet,
            ZeroClass::DegenerateZeroDet => ZeroClassLabel::DegenerateZeroDet,
            ZeroClass::ZeroMatrix => ZeroClassLabel::ZeroMatrix,
            ZeroClass::PositiveDetViolation => ZeroClassLabel::PositiveDetViolation,
        }
    }
}

impl DetsignRecord {
    pub fn row(&self) -> Vec<f64> {
        let class = match self.class {
            Some(ZeroClassLabel::HyperbolicNegDet) => 0.0,
            Some(ZeroClassLabel::DegenerateZeroDet) => 1.0,
            Some(ZeroClassLabel::ZeroMatrix) => 2.0,
            Some(ZeroClassLabel::PositiveDetViolation) => 3.0,
            None => f64::NAN,
        };
        vec![
            self.run as f64,
            self.aimed as u8 as f64,
            self.det0,
            self.reached_zero as u8 as f64,
            self.t1,
            class,
            self.a_drift,
            self.affine_residual,
            self.goh,
        ]
    }

    pub const HEADER: [&'static str; 9] = ["run", "aimed", "det0", "reached_zero", "t1", "class", "a_drift", "affine_residual", "goh"];
}

fn record(run: u64, aimed: bool, det0: f64, tr: &AbnormalTrajectory, det_tol: f64) -> DetsignRecord {
    let reached = tr.trace.termination == Termination::Zero;
    let t1 = if reached { tr.trace.zeros[0] } else { f64::NAN };
    let class = reached.then(|| classify_zero(tr.trace.a.last().expect("nonempty"), det_tol).into());
    let affine =
        if class == Some(ZeroClassLabel::HyperbolicNegDet) { affine_residual(&tr.trace, t1).unwrap_or(f64::NAN) } else { f64::NAN };
    DetsignRecord {
        run,
        aimed,
        det0,
        reached_zero: reached,
        t1,
        class,
        a_drift: a_drift(&tr.trace),
        affine_residual: affine,
        goh: tr.max_goh(),
        projection: tr.max_projection(),
        jacobi: tr.max_jacobi(),
    }
}

/// One randomized covector at the origin, run as sampled and, when `aim` is set and `A(0)` is
/// hyperbolic, once more with `h(0)` on the attracting eigenline.
#[allow(clippy::too_many_arguments)]
pub fn detsign_run(
    s: &SRStructure,
    seed: u64,
    stage: usize,
    run: u64,
    t_end: f64,
    det_tol: f64,
    aim: bool,
    opt: &FeedbackOptions,
) -> Result<Vec<DetsignRecord>> {
    let mut rng = stream_rng(seed, stage, run);
    let st = sample_abnormal_covector(s, &vec![0.0; s.dim()], &mut rng, 1e-3)?;
    let b = Rank2Brackets::new(s)?;
    let det0 = b.a(&st.x, &st.p).det();
    let mut out = Vec::new();
    let tr = abnormal_feedback_flow_with(s, &st, t_end, 1.0, opt)?;
    out.push(record(run, false, det0, &tr, det_tol));
    if aim {
        if let Ok(aimed) = aim_along_eigenline(s, &st, 1.0) {
            let tr = abnormal_feedback_flow_with(s, &aimed, t_end, 1.0, opt)?;
            out.push(record(run, true, det0, &tr, det_tol));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EigenRecord {
    pub attempt: u64,
    pub det0: f64,
    pub t1: f64,
    pub det1: f64,
    pub residual: f64,
    pub eigenvalue: f64,
    pub shooting_runs: usize,
}

impl EigenRecord {
    pub fn row(&self) -> Vec<f64> {
        vec![self.attempt as f64, self.det0, self.t1, self.det1, self.residual, self.eigenvalue, self.shooting_runs as f64]
    }

    pub const HEADER: [&'static str; 7] = ["attempt", "det0", "t1", "det1", "residual", "eigenvalue", "shooting_runs"];
}

#[derive(Clone, Debug, PartialEq)]
pub enum EigenAttempt {
    Accepted(EigenRecord),
    /// `det A` at the start or at the zero was not below `det_max`.
    NotHyperbolic,
    /// No shooting run reached `h = 0` within the projection bound.
    ShootingFailed(String),
}

/// Samples a covector; if `det A(0) < det_max`, shoots to `h = 0` and extrapolates the
/// control direction.
#[allow(clippy::too_many_arguments)]
pub fn eigenlimit_attempt(
    s: &SRStructure,
    seed: u64,
    stage: usize,
    attempt: u64,
    t_end: f64,
    det_max: f64,
    sign: f64,
    opt: &FeedbackOptions,
) -> Result<EigenAttempt> {
    let mut rng = stream_rng(seed, stage, attempt);
    let st = sample_abnormal_covector(s, &vec![0.0; s.dim()], &mut rng, 1e-3)?;
    let det0 = Rank2Brackets::new(s)?.a(&st.x, &st.p).det();
    if det0 >= det_max {
        return Ok(EigenAttempt::NotHyperbolic);
    }
    let shot = match shoot_to_zero(s, &st, t_end, sign, opt) {
        Ok(shot) => shot,
        Err(e @ (rank2sr_core::Error::NonConvergence(_) | rank2sr_core::Error::ProjectionTooLarge { .. })) => {
            return Ok(EigenAttempt::ShootingFailed(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let tr = &shot.trajectory.trace;
    let t1 = tr.zeros[0];
    let det1 = tr.a.last().expect("nonempty").det();
    if det1 >= det_max {
        return Ok(EigenAttempt::NotHyperbolic);
    }
    let lim = limit_control_direction(tr, t1)?;
    Ok(EigenAttempt::Accepted(EigenRecord {
        attempt,
        det0,
        t1,
        det1,
        residual: lim.residual,
        eigenvalue: lim.eigenvalue,
        shooting_runs: shot.runs,
    }))
}
