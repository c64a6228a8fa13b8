//! Verification suites: fixed-seed batteries that report one line per acceptance criterion.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rank2sr_core::extremals::{abnormal_feedback_flow_with, sample_abnormal_covector, FeedbackOptions};
use rank2sr_core::optimize::{corner_test, MinimizeOptions};
use rank2sr_core::phase::{detect_dichotomy, excluded_elliptic_monitor, simulate_elliptic, simulate_polar, verify_estimates, PolarOptions};
use rank2sr_core::poly::ratio;
use rank2sr_core::structures::{nilpotent_approximation, pushforward_rescaled, sup_distance_on_ball, SRStructure};
use rank2sr_core::vfield::flow_commutator;
use rank2sr_core::{evaluate, lie_bracket, Poly, PolyVecField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{detsign_run, stream_rng, DetsignRecord, ZeroClassLabel};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::stages::eigenlimit_batch;

pub const SUITES: [&str; 7] = ["goh", "detsign", "eigenlimit", "nilpotentize", "dichotomy", "estimates", "corners"];

const SEED: u64 = 20_240_601;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    fn at_most(id: u32, name: &str, measured: f64, bound: f64, detail: String) -> Self {
        Criterion { id, name: name.into(), measured, bound, pass: measured <= bound, detail }
    }

    fn at_least(id: u32, name: &str, measured: f64, bound: f64, detail: String) -> Self {
        Criterion { id, name: name.into(), measured, bound, pass: measured >= bound, detail }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
}

pub fn run_suite(name: &str, settings: Settings) -> Result<SuiteReport> {
    let criteria = match name {
        "goh" => goh(settings)?,
        "detsign" => detsign(settings)?,
        "eigenlimit" => eigenlimit(settings)?,
        "nilpotentize" => nilpotentize(settings)?,
        "dichotomy" => dichotomy(settings)?,
        "estimates" => estimates(settings)?,
        "corners" => corners(settings)?,
        other => return Err(CliError::UnknownSuite(other.into())),
    };
    Ok(SuiteReport { suite: name.into(), passed: criteria.iter().all(|c| c.pass), criteria })
}

fn core(suite: &str) -> impl Fn(rank2sr_core::Error) -> CliError + '_ {
    move |e| CliError::from_core(suite, e)
}

fn feedback(settings: Settings) -> FeedbackOptions {
    FeedbackOptions { tol: settings.tolerances(), ..FeedbackOptions::default() }
}

fn goh(settings: Settings) -> Result<Vec<Criterion>> {
    const PER_STRUCTURE: u64 = 8;
    let opt = feedback(settings);
    let pool = settings.pool()?;
    let mut goh = (0.0f64, String::new());
    let mut proj = (0.0f64, String::new());
    let mut jac = (0.0f64, String::new());
    let mut parts = Vec::new();
    for (k, name) in ["martinet", "engel", "free3", "free4"].into_iter().enumerate() {
        let s = SRStructure::builtin(name).expect("builtin");
        let runs: Vec<(f64, f64, f64)> = pool
            .install(|| {
                (0..PER_STRUCTURE)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = stream_rng(SEED, k, r);
                        let st = sample_abnormal_covector(&s, &vec![0.0; s.dim()], &mut rng, 1e-3)?;
                        let tr = abnormal_feedback_flow_with(&s, &st, 5.0, 1.0, &opt)?;
                        Ok((tr.max_goh(), tr.max_projection(), tr.max_jacobi()))
                    })
                    .collect::<rank2sr_core::Result<_>>()
            })
            .map_err(core("goh"))?;
        let worst = runs.iter().fold((0.0f64, 0.0f64, 0.0f64), |w, r| (w.0.max(r.0), w.1.max(r.1), w.2.max(r.2)));
        parts.push(format!("{name}: goh {:.1e}, projection {:.1e}, jacobi {:.1e}", worst.0, worst.1, worst.2));
        for (acc, v) in [(&mut goh, worst.0), (&mut proj, worst.1), (&mut jac, worst.2)] {
            if v >= acc.0 {
                *acc = (v, name.to_string());
            }
        }
    }
    let detail = format!("{PER_STRUCTURE} runs per structure, T = 5; {}", parts.join("; "));
    Ok(vec![
        Criterion::at_most(2, "goh-invariance", goh.0.max(proj.0), 1e-8, detail),
        Criterion::at_most(3, "jacobi-reduction", jac.0, 1e-10, format!("worst on {}", jac.1)),
    ])
}

fn detsign(settings: Settings) -> Result<Vec<Criterion>> {
    const ZEROS: usize = 100;
    const CHUNK: u64 = 32;
    let s = SRStructure::builtin("free4").expect("builtin");
    let opt = feedback(settings);
    let pool = settings.pool()?;
    let mut recs: Vec<DetsignRecord> = Vec::new();
    let mut next = 0u64;
    while recs.iter().filter(|r| r.reached_zero).count() < ZEROS {
        if next > 100 * ZEROS as u64 {
            break;
        }
        let chunk: Vec<Vec<DetsignRecord>> = pool
            .install(|| {
                (next..next + CHUNK)
                    .into_par_iter()
                    .map(|r| detsign_run(&s, SEED, 0, r, 5.0, 1e-8, true, &opt))
                    .collect::<rank2sr_core::Result<_>>()
            })
            .map_err(core("detsign"))?;
        recs.extend(chunk.into_iter().flatten());
        next += CHUNK;
    }
    let zeros: Vec<&DetsignRecord> = recs.iter().filter(|r| r.reached_zero).collect();
    let count = |c| zeros.iter().filter(|r| r.class == Some(c)).count();
    let violations = count(ZeroClassLabel::PositiveDetViolation);
    let hyper = count(ZeroClassLabel::HyperbolicNegDet);
    let drift = recs.iter().map(|r| r.a_drift).fold(0.0, f64::max);
    let affine = zeros.iter().map(|r| r.affine_residual).filter(|v| !v.is_nan()).fold(0.0, f64::max);
    let mut out = vec![Criterion::at_most(
        4,
        "det-sign",
        violations as f64,
        0.0,
        format!(
            "{} zeros over {} trajectories: {hyper} hyperbolic, {} degenerate, {} zero matrix, {violations} positive",
            zeros.len(),
            recs.len(),
            count(ZeroClassLabel::DegenerateZeroDet),
            count(ZeroClassLabel::ZeroMatrix),
        ),
    )];
    if zeros.len() < ZEROS {
        out[0].pass = false;
        out[0].detail.push_str(&format!("; fewer than {ZEROS} zeros"));
    }
    let mut c6 = Criterion::at_most(
        6,
        "nilpotent-constancy",
        drift,
        1e-9,
        format!("max |A(t) - A(0)| = {drift:.2e}; max affine residual {affine:.2e} (bound 1e-6) on {hyper} hyperbolic zeros"),
    );
    c6.pass = c6.pass && affine <= 1e-6 && hyper > 0;
    out.push(c6);
    Ok(out)
}

fn eigenlimit(settings: Settings) -> Result<Vec<Criterion>> {
    const INSTANCES: usize = 20;
    let s = SRStructure::free4_perturbed();
    let pool = settings.pool()?;
    let batch = eigenlimit_batch(&pool, &s, SEED, 0, INSTANCES, 5.0, -0.1, 1.0, &feedback(settings)).map_err(core("eigenlimit"))?;
    let found = &batch.found;
    let worst = found.iter().map(|r| r.residual).fold(0.0, f64::max);
    let repelling = found.iter().filter(|r| r.eigenvalue >= 0.0).count();
    let mut c = Criterion::at_most(
        5,
        "eigenvector-limit",
        worst,
        1e-3,
        format!(
            "{} instances on {} from {} attempts ({} not hyperbolic, {} shooting failures), {repelling} on the positive eigenline",
            found.len(),
            s.name,
            batch.attempts,
            batch.not_hyperbolic,
            batch.shooting_failures.len(),
        ),
    );
    c.pass = c.pass && found.len() == INSTANCES && repelling == 0;
    Ok(vec![c])
}

fn random_field<R: Rng>(rng: &mut R, dim: usize) -> PolyVecField {
    let comps = (0..dim)
        .map(|_| {
            let mut p = Poly::zero(dim);
            for _ in 0..rng.random_range(0..=4) {
                let mut e = vec![0u32; dim];
                for _ in 0..rng.random_range(0..=3) {
                    e[rng.random_range(0..dim)] += 1;
                }
                p = p.add(&Poly::monomial(ratio(rng.random_range(-4..=4), rng.random_range(1..=3)), e));
            }
            p
        })
        .collect();
    PolyVecField::new(comps).expect("dimension")
}

fn nilpotentize(_settings: Settings) -> Result<Vec<Criterion>> {
    let err = core("nilpotentize");
    let mut rng = stream_rng(SEED, 0, 0);
    let (mut worst, mut instances, mut exact_fail) = (0.0f64, 0usize, 0usize);
    while instances < 50 {
        let dim = rng.random_range(2..=5);
        let (x, y, z) = (random_field(&mut rng, dim), random_field(&mut rng, dim), random_field(&mut rng, dim));
        let xy = lie_bracket(&x, &y).map_err(&err)?;
        let anti = xy.add(&lie_bracket(&y, &x).map_err(&err)?).map_err(&err)?;
        let jac = lie_bracket(&x, &lie_bracket(&y, &z).map_err(&err)?)
            .and_then(|a| a.add(&lie_bracket(&y, &lie_bracket(&z, &x)?)?))
            .and_then(|a| a.add(&lie_bracket(&z, &xy)?))
            .map_err(&err)?;
        exact_fail += (!anti.is_zero()) as usize + (!jac.is_zero()) as usize;
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = evaluate(&xy, &q).map_err(&err)?;
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bn <= 0.1 {
            continue;
        }
        let c = flow_commutator(&x.compile(), &y.compile(), &q, 1e-6, 4).map_err(&err)?;
        let e = c.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / bn;
        worst = worst.max(e);
        instances += 1;
    }
    let mut c1 = Criterion::at_most(
        1,
        "bracket-correctness",
        worst,
        1e-4,
        format!("{instances} commutator instances; {exact_fail} exact antisymmetry/Jacobi failures"),
    );
    c1.pass = c1.pass && exact_fail == 0;

    let mut orders = Vec::new();
    let mut idempotent = true;
    for name in SRStructure::BUILTIN_NAMES {
        let s = SRStructure::builtin(name).expect("builtin");
        let n = nilpotent_approximation(&s).map_err(&err)?;
        idempotent &= nilpotent_approximation(&n).map_err(&err)?.frame() == n.frame();
    }
    let mut parts = Vec::new();
    for s in [SRStructure::martinet_cubic(), SRStructure::engel_perturbed()] {
        let n = nilpotent_approximation(&s).map_err(&err)?;
        let d: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| pushforward_rescaled(&s, e).and_then(|r| sup_distance_on_ball(&r, &n, 21)))
            .collect::<rank2sr_core::Result<_>>()
            .map_err(&err)?;
        for w in d.windows(2) {
            orders.push((w[0] / w[1]).log2());
        }
        parts.push(format!("{}: {:.3e}, {:.3e}, {:.3e}", s.name, d[0], d[1], d[2]));
    }
    let dev = orders.iter().map(|o| (o - 1.0).abs()).fold(0.0, f64::max);
    let mut c7 = Criterion::at_most(
        7,
        "nilpotentization",
        dev,
        0.3,
        format!("orders {orders:.4?}; distances {}; idempotent {idempotent}", parts.join("; ")),
    );
    c7.pass = c7.pass && idempotent;
    Ok(vec![c1, c7])
}

fn polar_opts(settings: Settings, ds: f64) -> PolarOptions {
    PolarOptions { tol: settings.tolerances(), ds_out: ds, ..PolarOptions::default() }
}

fn dichotomy(settings: Settings) -> Result<Vec<Criterion>> {
    let err = core("dichotomy");
    let th0 = FRAC_PI_2;
    let p = simulate_polar(|_| 0.0, |_| 1.0, |_| 0.0, 1.0, th0, 100.0, &polar_opts(settings, 0.01)).map_err(&err)?;
    let cot0 = th0.cos() / th0.sin();
    let cot = p.s.iter().zip(&p.theta).map(|(s, t)| (t.cos() / t.sin() - cot0 - s).abs()).fold(0.0, f64::max);
    let c8 = Criterion::at_most(8, "cotangent-law", cot, 1e-6, format!("f = g = 0, theta0 = pi/2, s up to {}", p.s[p.len() - 1]));

    let mut rng = stream_rng(SEED, 1, 0);
    let mut wrong = 0usize;
    let mut cases = 0usize;
    for eps in [0.1, 0.05] {
        for _ in 0..6 {
            let (a, b, z) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let k = rng.random_range(0.2..1.0);
            let th = rng.random_range(0.05..3.1);
            let path = simulate_polar(
                move |s| a * (-k * s).exp(),
                move |s| 1.0 + b * (-k * s).exp(),
                move |s| z * (-k * s).exp(),
                1.0,
                th,
                100.0 / eps,
                &polar_opts(settings, 0.05),
            )
            .map_err(&err)?;
            path.check_invariants().map_err(&err)?;
            cases += 1;
            wrong += detect_dichotomy(&path, eps).map_err(&err)?.rotates() as usize;
        }
    }
    let c9 =
        Criterion::at_most(9, "convergence-regime", wrong as f64, 0.0, format!("{cases} decaying perturbations, {wrong} misclassified"));

    let e = simulate_elliptic(
        |s| 0.1 * (0.1 * s).sin(),
        |s| 0.1 * (0.1 * s).cos(),
        |s| 1.0 + 0.05 * (0.2 * s).sin(),
        1.0,
        0.0,
        300.0,
        &polar_opts(settings, 0.01),
    )
    .map_err(&err)?;
    let rep = excluded_elliptic_monitor(&e, 0.1, 1.0).map_err(&err)?;
    let mut c10 = Criterion::at_most(
        10,
        "elliptic-monitor",
        rep.monotone_defect,
        1e-6,
        format!("lower bound held {}, min rho {:.4}, w in [{:.4}, {:.4}]", rep.lower_bound_ok, rep.min_rho, rep.min_w, rep.max_w),
    );
    c10.pass = c10.pass && rep.lower_bound_ok;
    Ok(vec![c8, c9, c10])
}

fn estimates(settings: Settings) -> Result<Vec<Criterion>> {
    let err = core("estimates");
    let mut failing = 0usize;
    let mut checked = 0usize;
    let mut parts = Vec::new();
    let mut worst_len = 0.0f64;
    for eps in [0.1f64, 0.05] {
        let g = -eps.powi(4) / 4.0;
        let period = 2.0 * PI / (-g).sqrt();
        let path = simulate_polar(|_| 0.0, move |_| 1.0 - g, move |_| g, 1.0, FRAC_PI_2, period * 3.2, &polar_opts(settings, 0.05))
            .map_err(&err)?;
        let d = detect_dichotomy(&path, eps).map_err(&err)?;
        if !d.rotates() {
            failing += 1;
            parts.push(format!("eps {eps}: no rotation"));
            continue;
        }
        let rep = verify_estimates(&path, d.switches(), eps).map_err(&err)?;
        let (lo, hi) = (2.0 / eps * (1.0 - eps * eps), 2.0 / eps * (1.0 + eps * eps));
        let mut lens = Vec::new();
        for w in rep.windows.iter().skip(1) {
            checked += 1;
            let in_bracket = w.length >= lo && w.length <= hi;
            worst_len = worst_len.max(((w.length - 2.0 / eps) / (2.0 / eps * eps * eps)).abs());
            if !(w.applicable && w.all_hold() && w.ratio_sin_ok && w.ratio_cos_ok && in_bracket) {
                failing += 1;
            }
            lens.push(format!("{:.4}", w.length));
        }
        parts.push(format!("eps {eps}: windows [{}] in [{lo:.4}, {hi:.4}]", lens.join(", ")));
    }
    let mut c = Criterion::at_most(9, "window-estimates", failing as f64, 0.0, parts.join("; "));
    c.detail.push_str(&format!("; {checked} windows past the first, worst relative length offset {worst_len:.3} of eps^2"));
    c.pass = c.pass && checked > 0;
    Ok(vec![c])
}

fn corners(settings: Settings) -> Result<Vec<Criterion>> {
    let err = core("corners");
    let opt = MinimizeOptions { tol: settings.tolerances(), ..MinimizeOptions::default() };
    let pool = settings.pool()?;
    let names = ["heisenberg", "engel", "free4"];
    let results: Vec<(f64, f64, f64)> = pool
        .install(|| {
            names
                .par_iter()
                .map(|name| {
                    let s = SRStructure::builtin(name).expect("builtin");
                    let x0 = vec![0.0; s.dim()];
                    let c = corner_test(&s, &x0, [1.0, 0.0], [0.0, 1.0], 0.5, 64, &opt)?;
                    let straight = corner_test(&s, &x0, [1.0, 0.0], [1.0, 0.0], 0.5, 64, &opt)?;
                    Ok((c.margin, c.result.endpoint_error, straight.margin))
                })
                .collect::<rank2sr_core::Result<_>>()
        })
        .map_err(&err)?;
    let min_margin = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max_straight = results.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    let max_endpoint = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail =
        names.iter().zip(&results).map(|(n, r)| format!("{n}: margin {:.6}, straight {:.1e}", r.0, r.2)).collect::<Vec<_>>().join("; ");
    let mut c = Criterion::at_least(11, "corner-non-minimality", min_margin, 1e-3, detail);
    c.detail.push_str(&format!("; max |straight margin| {max_straight:.1e} (bound 1e-6), max endpoint error {max_endpoint:.1e}"));
    c.pass = c.pass && max_straight <= 1e-6 && max_endpoint <= 1e-6;
    Ok(vec![c])
}
