//! Stage execution. Each stage returns its checks, a JSON summary and numeric tables;
//! the runner in [`crate::run`] writes and validates them.

use rank2sr_core::extremals::{
    abnormal_feedback_flow_with, aim_along_eigenline, classify_zero, limit_control_direction, sample_abnormal_covector, shoot_to_zero,
    termination_label, ExtremalState, FeedbackOptions, FeedbackTrace, Rank2Brackets, Termination,
};
use rank2sr_core::optimize::{corner_test, minimize_length, DiscretizedControl, MinimizeOptions};
use rank2sr_core::phase::{
    detect_dichotomy, excluded_elliptic_monitor, hyperbolic_asymptotics, rescale_time, simulate_elliptic, simulate_polar, verify_estimates,
    ConjugationFrame, PolarOptions, RescaleOptions, TargetForm,
};
use rank2sr_core::structures::{flag_dimensions, word_label, SRStructure};
use rank2sr_core::{evaluate, lie_bracket, BracketWord};
use rayon::prelude::*;
use serde_json::json;

use crate::batch::{
    affine_residual, detsign_run, eigenlimit_attempt, stream_rng, DetsignRecord, EigenAttempt, EigenRecord, ZeroClassLabel,
};
use crate::config::{Settings, StageSpec, StartMode};
use crate::error::{CliError, Result};
use crate::output::{Check, Table};

pub struct StageOutput {
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
    pub tables: Vec<Table>,
}

/// State carried between stages of one scenario.
pub struct Pipeline<'a> {
    pub structure: &'a SRStructure,
    pub seed: u64,
    pub settings: Settings,
    last_trace: Option<FeedbackTrace>,
}

impl<'a> Pipeline<'a> {
    pub fn new(structure: &'a SRStructure, seed: u64, settings: Settings) -> Self {
        Pipeline { structure, seed, settings, last_trace: None }
    }

    fn feedback_options(&self) -> FeedbackOptions {
        FeedbackOptions { tol: self.settings.tolerances(), ..FeedbackOptions::default() }
    }

    fn polar_options(&self, ds: f64) -> PolarOptions {
        PolarOptions { tol: self.settings.tolerances(), ds_out: ds, ..PolarOptions::default() }
    }

    fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions { tol: self.settings.tolerances(), ..MinimizeOptions::default() }
    }
}

fn file_stem(index: usize, kind: &str) -> String {
    format!("{index:02}-{kind}")
}

fn pre(stage: &str, ok: bool, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Precondition { stage: stage.to_string(), detail: detail() })
    }
}

fn check_dim(stage: &str, what: &str, v: &Option<Vec<f64>>, dim: usize) -> Result<()> {
    match v {
        Some(v) => pre(stage, v.len() == dim && v.iter().all(|x| x.is_finite()), || {
            format!("{what} must have {dim} finite coordinates, got {}", v.len())
        }),
        None => Ok(()),
    }
}

fn positive(stage: &str, what: &str, x: f64) -> Result<()> {
    pre(stage, x.is_finite() && x > 0.0, || format!("{what} must be positive and finite, got {x}"))
}

fn unit_sign(stage: &str, sign: f64) -> Result<()> {
    pre(stage, sign == 1.0 || sign == -1.0, || format!("sign must be +1 or -1, got {sign}"))
}

/// Checks stage parameters against the structure before any integration starts.
pub fn validate(specs: &[StageSpec], s: &SRStructure) -> Result<()> {
    let dim = s.dim();
    let rank2 = |stage: &str| pre(stage, s.rank() == 2, || format!("rank-2 frame required, got rank {}", s.rank()));
    for (i, spec) in specs.iter().enumerate() {
        let stage = format!("{} ({})", i, spec.kind());
        let st = stage.as_str();
        match spec {
            StageSpec::Brackets { point, max_len } => {
                check_dim(st, "point", point, dim)?;
                pre(st, (1..=8).contains(max_len), || format!("max_len must be in 1..=8, got {max_len}"))?;
            }
            StageSpec::Abnormal { x0, p0, t_end, sign, .. } => {
                rank2(st)?;
                check_dim(st, "x0", x0, dim)?;
                check_dim(st, "p0", p0, dim)?;
                positive(st, "t_end", *t_end)?;
                unit_sign(st, *sign)?;
                if let Some(p) = p0 {
                    let x = x0.clone().unwrap_or_else(|| vec![0.0; dim]);
                    let b = Rank2Brackets::new(s).map_err(|e| CliError::from_core(st, e))?;
                    let r = b.goh_residual(&x, p);
                    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    pre(st, pn > 0.0, || "p0 must be nonzero".into())?;
                    pre(st, r <= 1e-12 * pn.max(1.0), || format!("p0 violates h1 = h2 = h12 = 0 (residual {r:e})"))?;
                }
            }
            StageSpec::Detsign { runs, t_end, det_tol, .. } => {
                rank2(st)?;
                pre(st, *runs >= 1, || "runs must be at least 1".into())?;
                positive(st, "t_end", *t_end)?;
                positive(st, "det_tol", *det_tol)?;
            }
            StageSpec::Eigenlimit { instances, t_end, det_max, sign } => {
                rank2(st)?;
                pre(st, *instances >= 1, || "instances must be at least 1".into())?;
                positive(st, "t_end", *t_end)?;
                pre(st, *det_max < 0.0, || format!("det_max must be negative, got {det_max}"))?;
                unit_sign(st, *sign)?;
            }
            StageSpec::Rescale {} => {
                let earlier = specs[..i].iter().any(|p| matches!(p, StageSpec::Abnormal { .. }));
                pre(st, earlier, || "needs an earlier abnormal stage".into())?;
            }
            StageSpec::Polar { alpha, beta, zeta, rho0, theta0, s_max, eps, ds } => {
                pre(st, alpha.is_finite() && beta.is_finite() && zeta.is_finite(), || "coefficients must be finite".into())?;
                positive(st, "rho0", *rho0)?;
                pre(st, theta0.is_finite(), || "theta0 must be finite".into())?;
                positive(st, "s_max", *s_max)?;
                pre(st, *eps > 0.0 && *eps <= 0.25, || format!("eps must be in (0, 1/4], got {eps}"))?;
                positive(st, "ds", *ds)?;
            }
            StageSpec::Elliptic { alpha, mu, eta, rho0, theta0, s_max, rate, window, ds } => {
                pre(st, alpha.is_finite() && mu.is_finite() && eta.is_finite(), || "coefficients must be finite".into())?;
                positive(st, "rho0", *rho0)?;
                pre(st, theta0.is_finite(), || "theta0 must be finite".into())?;
                positive(st, "s_max", *s_max)?;
                pre(st, rate.is_finite() && *rate >= 0.0, || format!("rate must be nonnegative, got {rate}"))?;
                positive(st, "window", *window)?;
                positive(st, "ds", *ds)?;
            }
            StageSpec::Corner { x0, v_minus, v_plus, eps_leg, n } => {
                rank2(st)?;
                check_dim(st, "x0", x0, dim)?;
                for v in [v_minus, v_plus] {
                    let r = v[0].hypot(v[1]);
                    pre(st, (r - 1.0).abs() <= 1e-12, || format!("corner directions must be unit vectors, got |v| = {r}"))?;
                }
                positive(st, "eps_leg", *eps_leg)?;
                pre(st, *n >= 2, || format!("n must be at least 2, got {n}"))?;
            }
            StageSpec::Minimize { x0, x1, n, init_angle, init_speed } => {
                rank2(st)?;
                check_dim(st, "x0", x0, dim)?;
                check_dim(st, "x1", &Some(x1.clone()), dim)?;
                pre(st, *n >= 1, || "n must be at least 1".into())?;
                pre(st, init_angle.is_finite() && init_speed.is_finite(), || "initial control must be finite".into())?;
            }
        }
    }
    Ok(())
}

pub fn run_stage(p: &mut Pipeline, index: usize, spec: &StageSpec) -> Result<StageOutput> {
    let stage = format!("{index} ({})", spec.kind());
    let core = |e: rank2sr_core::Error| CliError::from_core(&stage, e);
    let stem = file_stem(index, spec.kind());
    let s = p.structure;
    let dim = s.dim();
    match spec {
        StageSpec::Brackets { point, max_len } => {
            let point = point.clone().unwrap_or_else(|| vec![0.0; dim]);
            let flag = flag_dimensions(s, &point, *max_len).map_err(core)?;
            let mut brackets = Vec::new();
            for len in 1..=*max_len {
                for w in BracketWord::all_of_length(s.rank(), len) {
                    let f = s.bracket(&w).map_err(core)?;
                    brackets.push(json!({ "word": word_label(&w), "value": evaluate(&f, &point).map_err(core)? }));
                }
            }
            let x = &s.frame()[0];
            let y = &s.frame()[1];
            let xy = lie_bracket(x, y).map_err(core)?;
            let anti = xy.add(&lie_bracket(y, x).map_err(core)?).map_err(core)?;
            let jac = lie_bracket(x, &lie_bracket(y, &xy).map_err(core)?)
                .and_then(|a| a.add(&lie_bracket(y, &lie_bracket(&xy, x)?)?))
                .and_then(|a| a.add(&lie_bracket(&xy, &lie_bracket(x, y)?)?))
                .map_err(core)?;
            let nonzero = |f: &rank2sr_core::PolyVecField| f.components().iter().filter(|c| !c.is_zero()).count() as f64;
            let step = flag.iter().position(|&d| d == dim).map(|k| k + 1);
            Ok(StageOutput {
                checks: vec![
                    Check::at_most("bracket-antisymmetry", nonzero(&anti), 0.0),
                    Check::at_most("jacobi-identity", nonzero(&jac), 0.0),
                ],
                summary: json!({ "point": point, "flag": flag, "step": step, "brackets": brackets }),
                tables: vec![],
            })
        }
        StageSpec::Abnormal { x0, p0, t_end, sign, start } => {
            let opt = p.feedback_options();
            let x0 = x0.clone().unwrap_or_else(|| vec![0.0; dim]);
            let st = match p0 {
                Some(p0) => ExtremalState::new(x0, p0.clone()).map_err(core)?,
                None => {
                    let mut rng = stream_rng(p.seed, index, 0);
                    sample_abnormal_covector(s, &x0, &mut rng, 1e-3).map_err(core)?
                }
            };
            let (st, tr, runs) = match start {
                StartMode::Given => {
                    let tr = abnormal_feedback_flow_with(s, &st, *t_end, *sign, &opt).map_err(core)?;
                    (st, tr, 1)
                }
                StartMode::Aim => {
                    let st = aim_along_eigenline(s, &st, *sign).map_err(core)?;
                    let tr = abnormal_feedback_flow_with(s, &st, *t_end, *sign, &opt).map_err(core)?;
                    (st, tr, 1)
                }
                StartMode::Shoot => {
                    let shot = shoot_to_zero(s, &st, *t_end, *sign, &opt).map_err(core)?;
                    (shot.initial, shot.trajectory, shot.runs)
                }
            };
            let mut header = vec!["t", "u1", "u2", "hp1", "hp2", "a11", "a12", "a21", "goh", "projection", "jacobi"];
            let xs: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
            header.extend(xs.iter().map(String::as_str));
            let mut table = Table::new(format!("{stem}.csv"), &header);
            let t = &tr.trace;
            for k in 0..t.len() {
                let a = t.a[k];
                let mut row = vec![
                    t.t[k],
                    t.u[k][0],
                    t.u[k][1],
                    t.h[k][0],
                    t.h[k][1],
                    a.a11,
                    a.a12,
                    a.a21,
                    tr.goh_residual[k],
                    tr.projection[k],
                    tr.jacobi_residual[k],
                ];
                row.extend_from_slice(&tr.states[k].x);
                table.push(row);
            }
            let zero = (t.termination == Termination::Zero).then(|| t.zeros[0]);
            let zero_report = match zero {
                Some(t1) => {
                    let class: ZeroClassLabel = classify_zero(t.a.last().expect("nonempty"), 1e-8).into();
                    let limit = match limit_control_direction(t, t1) {
                        Ok(l) => {
                            json!({ "direction": [l.direction[0], l.direction[1]], "residual": l.residual, "eigenvalue": l.eigenvalue })
                        }
                        Err(e) => json!({ "unavailable": e.to_string() }),
                    };
                    let affine = if is_carnot(s) { affine_residual(t, t1) } else { None };
                    json!({ "t1": t1, "class": class, "det": t.a.last().expect("nonempty").det(), "limit": limit,
                            "affine_residual": affine })
                }
                None => serde_json::Value::Null,
            };
            let summary = json!({
                "p0": st.p,
                "sign": sign,
                "termination": termination_label(&t.termination),
                "nodes": t.len(),
                "shooting_runs": runs,
                "zero": zero_report,
                "u_first": t.u[0],
                "u_last": t.u[t.len() - 1],
            });
            let checks = vec![
                Check::at_most("goh-invariance", tr.max_goh(), 1e-8),
                Check::at_most("goh-projection", tr.max_projection(), 1e-8),
                Check::at_most("jacobi-reduction", tr.max_jacobi(), 1e-10),
            ];
            p.last_trace = Some(tr.trace);
            Ok(StageOutput { checks, summary, tables: vec![table] })
        }
        StageSpec::Detsign { runs, t_end, det_tol, aim } => {
            let opt = p.feedback_options();
            let seed = p.seed;
            let pool = p.settings.pool()?;
            let recs: Vec<DetsignRecord> = pool
                .install(|| {
                    (0..*runs as u64)
                        .into_par_iter()
                        .map(|r| detsign_run(s, seed, index, r, *t_end, *det_tol, *aim, &opt))
                        .collect::<rank2sr_core::Result<Vec<_>>>()
                })
                .map_err(core)?
                .into_iter()
                .flatten()
                .collect();
            let mut table = Table::new(format!("{stem}.csv"), &DetsignRecord::HEADER);
            recs.iter().for_each(|r| table.push(r.row()));
            let zeros: Vec<&DetsignRecord> = recs.iter().filter(|r| r.reached_zero).collect();
            let count = |c: ZeroClassLabel| zeros.iter().filter(|r| r.class == Some(c)).count();
            let violations = count(ZeroClassLabel::PositiveDetViolation);
            let max = |f: fn(&DetsignRecord) -> f64| recs.iter().map(f).filter(|v| !v.is_nan()).fold(0.0, f64::max);
            let mut checks = vec![
                Check::at_most("positive-det-violations", violations as f64, 0.0),
                Check::at_most("goh-invariance", max(|r| r.goh), 1e-8),
                Check::at_most("goh-projection", max(|r| r.projection), 1e-8),
                Check::at_most("jacobi-reduction", max(|r| r.jacobi), 1e-10),
            ];
            if is_carnot(s) {
                checks.push(Check::at_most("a-constancy", max(|r| r.a_drift), 1e-9));
                checks.push(Check::at_most("affine-h", max(|r| r.affine_residual), 1e-6));
            }
            let summary = json!({
                "runs": runs,
                "trajectories": recs.len(),
                "zeros": zeros.len(),
                "classes": {
                    "hyperbolic_neg_det": count(ZeroClassLabel::HyperbolicNegDet),
                    "degenerate_zero_det": count(ZeroClassLabel::DegenerateZeroDet),
                    "zero_matrix": count(ZeroClassLabel::ZeroMatrix),
                    "positive_det_violation": violations,
                },
                "records": recs,
            });
            Ok(StageOutput { checks, summary, tables: vec![table] })
        }
        StageSpec::Eigenlimit { instances, t_end, det_max, sign } => {
            let opt = p.feedback_options();
            let pool = p.settings.pool()?;
            let batch = eigenlimit_batch(&pool, s, p.seed, index, *instances, *t_end, *det_max, *sign, &opt).map_err(core)?;
            let found = &batch.found;
            let mut table = Table::new(format!("{stem}.csv"), &EigenRecord::HEADER);
            found.iter().for_each(|r| table.push(r.row()));
            let worst = found.iter().map(|r| r.residual).fold(0.0, f64::max);
            let wrong = found.iter().filter(|r| *sign * r.eigenvalue >= 0.0).count();
            Ok(StageOutput {
                checks: vec![
                    Check::at_least("instances", found.len() as f64, *instances as f64),
                    Check::at_most("eigenline-residual", worst, 1e-3),
                    Check::at_most("repelling-eigenline-limits", wrong as f64, 0.0),
                ],
                summary: json!({ "sign": sign, "attempts": batch.attempts, "not_hyperbolic": batch.not_hyperbolic,
                                 "shooting_failures": batch.shooting_failures, "records": found }),
                tables: vec![table],
            })
        }
        StageSpec::Rescale {} => {
            let trace = p
                .last_trace
                .as_ref()
                .ok_or_else(|| CliError::Precondition { stage: stage.clone(), detail: "no abnormal trace recorded".into() })?;
            pre(&stage, trace.termination == Termination::Zero, || "the last abnormal run did not reach h = 0".into())?;
            let t1 = trace.zeros[0];
            let frame = ConjugationFrame::for_matrix(trace.a.last().expect("nonempty"), 1e-8).map_err(core)?;
            let ropt = RescaleOptions::default();
            let (path, residual) = rescale_time(trace, trace.t[0], &frame, &ropt).map_err(core)?;
            let mut table = Table::new(format!("{stem}.csv"), &["s", "t", "rho", "theta", "x1", "x2"]);
            for k in 0..path.len() {
                table.push(vec![path.s[k], path.t[k], path.rho[k], path.theta[k], path.x1(k), path.x2(k)]);
            }
            let asym = match frame.target {
                TargetForm::HyperbolicDiag(a) => match hyperbolic_asymptotics(&path, a) {
                    Ok(r) => json!({ "accepted": r.accepted, "tan2theta_end": r.tan2theta_end, "tail_rate": r.tail_rate,
                                     "sup_cross": r.sup_cross, "sup_diff": r.sup_diff }),
                    Err(e) => json!({ "unavailable": e.to_string() }),
                },
                _ => serde_json::Value::Null,
            };
            let target = match frame.target {
                TargetForm::HyperbolicDiag(_) => "hyperbolic",
                TargetForm::NilpotentJordan => "nilpotent",
                TargetForm::EllipticRotation(_) => "elliptic",
                TargetForm::Identity => "identity",
            };
            Ok(StageOutput {
                checks: vec![Check::at_most("rescaling-consistency", residual, ropt.consistency_tol)],
                summary: json!({ "t1": t1, "target_form": target, "s_end": path.s.last(), "nodes": path.len(), "asymptotics": asym }),
                tables: vec![table],
            })
        }
        StageSpec::Polar { alpha, beta, zeta, rho0, theta0, s_max, eps, ds } => {
            let (a, b, z) = (*alpha, *beta, *zeta);
            let path =
                simulate_polar(move |s| a.eval(s), move |s| b.eval(s), move |s| z.eval(s), *rho0, *theta0, *s_max, &p.polar_options(*ds))
                    .map_err(core)?;
            path.check_invariants().map_err(core)?;
            let mut table = Table::new(format!("{stem}.csv"), &["s", "rho", "theta", "f", "g"]);
            for k in 0..path.len() {
                table.push(vec![path.s[k], path.rho[k], path.theta[k], path.f[k], path.g[k]]);
            }
            let d = detect_dichotomy(&path, *eps).map_err(core)?;
            let mut checks = vec![Check::at_least("dichotomy-conclusive", 1.0, 1.0)];
            let estimates = if d.rotates() {
                match verify_estimates(&path, d.switches(), *eps) {
                    Ok(rep) => {
                        let failing = rep.windows.iter().skip(1).filter(|w| w.applicable && !w.all_hold()).count();
                        checks.push(Check::at_most("window-estimates", failing as f64, 0.0));
                        json!({ "windows": rep.windows.iter().map(|w| json!({
                            "n": w.n, "s_start": w.s_start, "length": w.length, "applicable": w.applicable,
                            "all_hold": w.all_hold(), "sin_ratio": w.sin_ratio, "cos_ratio": w.cos_ratio })).collect::<Vec<_>>() })
                    }
                    Err(e) => json!({ "unavailable": e.to_string() }),
                }
            } else {
                serde_json::Value::Null
            };
            Ok(StageOutput {
                checks,
                summary: json!({ "verdict": d.label(), "switches": d.switches().s, "estimates": estimates }),
                tables: vec![table],
            })
        }
        StageSpec::Elliptic { alpha, mu, eta, rho0, theta0, s_max, rate, window, ds } => {
            let (a, m, e) = (*alpha, *mu, *eta);
            let path = simulate_elliptic(
                move |s| a.eval(s),
                move |s| m.eval(s),
                move |s| e.eval(s),
                *rho0,
                *theta0,
                *s_max,
                &p.polar_options(*ds),
            )
            .map_err(core)?;
            let rep = excluded_elliptic_monitor(&path, *rate, *window).map_err(core)?;
            let mut table = Table::new(format!("{stem}.csv"), &["s", "rho", "theta", "w"]);
            for k in 0..path.len() {
                let th = path.theta[k];
                let w = path.alpha[k] * (2.0 * th).sin() + path.mu[k] * (2.0 * th).cos() + path.eta[k];
                table.push(vec![path.s[k], path.rho[k], th, w]);
            }
            Ok(StageOutput {
                checks: vec![
                    Check::at_most("elliptic-monitor-monotone", rep.monotone_defect, 1e-6),
                    Check::at_least("elliptic-lower-bound", rep.lower_bound_ok as u8 as f64, 1.0),
                ],
                summary: json!({ "min_w": rep.min_w, "max_w": rep.max_w, "min_rho": rep.min_rho, "monotone_defect": rep.monotone_defect }),
                tables: vec![table],
            })
        }
        StageSpec::Corner { x0, v_minus, v_plus, eps_leg, n } => {
            let x0 = x0.clone().unwrap_or_else(|| vec![0.0; dim]);
            let c = corner_test(s, &x0, *v_minus, *v_plus, *eps_leg, *n, &p.minimize_options()).map_err(core)?;
            let straight = (v_minus[0] - v_plus[0]).abs() + (v_minus[1] - v_plus[1]).abs() <= 1e-12;
            let check = if straight {
                Check::at_most("straight-margin", c.margin.abs(), 1e-6)
            } else {
                Check::at_least("corner-margin", c.margin, 1e-3)
            };
            Ok(StageOutput {
                checks: vec![check, Check::at_most("endpoint-error", c.result.endpoint_error, 1e-6)],
                summary: json!({ "margin": c.margin, "corner_length": c.corner_length, "length": c.result.length,
                                 "endpoint": c.corner_endpoint, "outer_iterations": c.result.outer_iterations }),
                tables: vec![control_table(&stem, &c.result.control, c.result.speed)],
            })
        }
        StageSpec::Minimize { x0, x1, n, init_angle, init_speed } => {
            let x0 = x0.clone().unwrap_or_else(|| vec![0.0; dim]);
            let opt = p.minimize_options();
            let r = minimize_length(s, &x0, x1, &DiscretizedControl::constant(*init_angle, *n), *init_speed, &opt).map_err(core)?;
            Ok(StageOutput {
                checks: vec![Check::at_most("endpoint-error", r.endpoint_error, opt.endpoint_tol)],
                summary: json!({ "length": r.length, "converged": r.converged, "iterations": r.iterations,
                                 "outer_iterations": r.outer_iterations }),
                tables: vec![control_table(&stem, &r.control, r.speed)],
            })
        }
    }
}

fn control_table(stem: &str, c: &DiscretizedControl, speed: f64) -> Table {
    let mut t = Table::new(format!("{stem}.csv"), &["t", "u1", "u2"]);
    let sg = if speed < 0.0 { -1.0 } else { 1.0 };
    for k in 0..c.len() {
        let u = c.control(k);
        t.push(vec![k as f64 / c.len() as f64, sg * u[0], sg * u[1]]);
    }
    t
}

/// True when the frame is graded homogeneous, i.e. equal to its own nilpotent approximation.
pub fn is_carnot(s: &SRStructure) -> bool {
    rank2sr_core::structures::nilpotent_approximation(s).is_ok_and(|n| n.frame() == s.frame())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EigenBatch {
    pub found: Vec<EigenRecord>,
    pub attempts: u64,
    pub not_hyperbolic: usize,
    pub shooting_failures: Vec<(u64, String)>,
}

/// Runs attempts in fixed chunks until `instances` successes are found, keeping attempt order.
#[allow(clippy::too_many_arguments)]
pub fn eigenlimit_batch(
    pool: &rayon::ThreadPool,
    s: &SRStructure,
    seed: u64,
    stage: usize,
    instances: usize,
    t_end: f64,
    det_max: f64,
    sign: f64,
    opt: &FeedbackOptions,
) -> rank2sr_core::Result<EigenBatch> {
    const CHUNK: u64 = 32;
    let max_attempts = 50 * instances as u64;
    let mut out = EigenBatch::default();
    let mut next = 0;
    while out.found.len() < instances && next < max_attempts {
        let chunk: Vec<EigenAttempt> = pool.install(|| {
            (next..next + CHUNK)
                .into_par_iter()
                .map(|a| eigenlimit_attempt(s, seed, stage, a, t_end, det_max, sign, opt))
                .collect::<rank2sr_core::Result<_>>()
        })?;
        for (a, r) in (next..).zip(chunk) {
            if out.found.len() == instances {
                break;
            }
            out.attempts = a + 1;
            match r {
                EigenAttempt::Accepted(rec) => out.found.push(rec),
                EigenAttempt::NotHyperbolic => out.not_hyperbolic += 1,
                EigenAttempt::ShootingFailed(e) => out.shooting_failures.push((a, e)),
            }
        }
        next += CHUNK;
    }
    Ok(out)
}
