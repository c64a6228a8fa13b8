use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::{hermite, PhasePath};
use crate::error::{Error, Result};

/// Marks of the rotation regime: `theta(s_{2n}) = pi - eps` and `theta(s_{2n+1}) = eps` mod `2 pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchSequence {
    pub eps: f64,
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    /// Whether `theta' < 0` at every node of window `n`.
    pub monotone: Vec<bool>,
}

impl SwitchSequence {
    /// Complete windows `[s_{2n}, s_{2n+1}]`.
    pub fn windows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s.chunks_exact(2).map(|w| (w[0], w[1]))
    }

    pub fn num_windows(&self) -> usize {
        self.s.len() / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dichotomy {
    ConvergesModPi { switches: SwitchSequence, tie_break: bool },
    Rotates { switches: SwitchSequence, tie_break: bool },
}

impl Dichotomy {
    pub fn switches(&self) -> &SwitchSequence {
        match self {
            Dichotomy::ConvergesModPi { switches, .. } | Dichotomy::Rotates { switches, .. } => switches,
        }
    }

    pub fn rotates(&self) -> bool {
        matches!(self, Dichotomy::Rotates { .. })
    }

    pub fn label(&self) -> &'static str {
        if self.rotates() {
            "rotates"
        } else {
            "converges_mod_pi"
        }
    }
}

/// Value of `(theta, ln rho)` at `s` inside node interval `k`.
pub(crate) fn interp(path: &PhasePath, k: usize, s: f64) -> (f64, f64) {
    let (s0, s1) = (path.s[k], path.s[k + 1]);
    let th = hermite(s0, s1, path.theta[k], path.theta[k + 1], path.dtheta[k], path.dtheta[k + 1], s);
    let lr = hermite(s0, s1, path.rho[k].ln(), path.rho[k + 1].ln(), path.dlnrho[k], path.dlnrho[k + 1], s);
    (th, lr)
}

/// Downward crossings of the levels `mark + 2 pi j`, as `(s, rho)` sorted in `s`.
fn crossings(path: &PhasePath, mark: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..path.len().saturating_sub(1) {
        let (hi, lo) = (path.theta[k], path.theta[k + 1]);
        if !(hi > lo) {
            continue;
        }
        let j0 = ((lo - mark) / (2.0 * PI)).ceil() as i64;
        let j1 = ((hi - mark) / (2.0 * PI)).floor() as i64;
        for j in j0..=j1 {
            let level = mark + 2.0 * PI * j as f64;
            if !(hi > level && level >= lo) {
                continue;
            }
            let (mut a, mut b) = (path.s[k], path.s[k + 1]);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if interp(path, k, m).0 > level {
                    a = m;
                } else {
                    b = m;
                }
                if b - a <= 1e-14 * (1.0 + b.abs()) {
                    break;
                }
            }
            let s = 0.5 * (a + b);
            out.push((s, interp(path, k, s).1.exp()));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Alternating sequence of `pi - eps` and `eps` crossings.
pub fn switch_sequence(path: &PhasePath, eps: f64) -> SwitchSequence {
    let upper = crossings(path, PI - eps);
    let lower = crossings(path, eps);
    let mut seq = SwitchSequence { eps, s: Vec::new(), rho: Vec::new(), monotone: Vec::new() };
    let mut cursor = f64::NEG_INFINITY;
    let (mut i, mut j) = (0, 0);
    loop {
        while i < upper.len() && upper[i].0 <= cursor {
            i += 1;
        }
        let Some(&(sa, ra)) = upper.get(i) else { break };
        while j < lower.len() && lower[j].0 <= sa {
            j += 1;
        }
        let Some(&(sb, rb)) = lower.get(j) else { break };
        let mono = (0..path.len()).filter(|&k| path.s[k] >= sa && path.s[k] <= sb).all(|k| path.dtheta[k] < 0.0);
        seq.s.extend([sa, sb]);
        seq.rho.extend([ra, rb]);
        seq.monotone.push(mono);
        cursor = sb;
    }
    seq
}

/// Classifies the long-time behaviour of `theta` on a path.
///
/// When both criteria hold, the path rotates if `theta` still turns by at
/// least `pi` over its trailing half.
pub fn detect_dichotomy(path: &PhasePath, eps: f64) -> Result<Dichotomy> {
    if !(eps > 0.0 && eps < PI / 2.0) {
        return Err(Error::Precondition("eps must lie in (0, pi/2)".into()));
    }
    let needed = 10.0 / eps;
    let covered = path.s_span();
    if covered < needed {
        return Err(Error::PathTooShort { covered, needed });
    }
    let n = path.len();
    let s_end = path.s[n - 1];
    let tail_from = s_end - 0.2 * covered;
    let converges = (0..n).filter(|&k| path.s[k] >= tail_from).all(|k| path.theta[k].sin().abs() < eps);
    let rotates = (path.theta[0] - path.theta[n - 1]).abs() >= 2.0 * PI;
    let switches = switch_sequence(path, eps);
    match (converges, rotates) {
        (true, false) => Ok(Dichotomy::ConvergesModPi { switches, tie_break: false }),
        (false, true) => Ok(Dichotomy::Rotates { switches, tie_break: false }),
        (true, true) => {
            let mid = path.s.partition_point(|&s| s < s_end - 0.5 * covered).min(n - 1);
            if (path.theta[mid] - path.theta[n - 1]).abs() >= PI {
                Ok(Dichotomy::Rotates { switches, tie_break: true })
            } else {
                Ok(Dichotomy::ConvergesModPi { switches, tie_break: true })
            }
        }
        (false, false) => Err(Error::Inconclusive),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub n: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub length: f64,
    pub rho_start: f64,
    /// `eps^2/4 - (M_f + M_g / sin eps)` at `s_start`.
    pub smallness_margin: f64,
    /// `eps^2/2 - M_g / sin^2 eps` at `s_start`.
    pub cotan_margin: f64,
    pub applicable: bool,
    pub monotone: bool,
    pub int_sin: f64,
    pub int_rho: f64,
    pub int_cos: f64,
    pub basic1: bool,
    pub basic2: bool,
    pub esti1: bool,
    pub esti2: bool,
    pub esti3: bool,
    pub sin_ratio: f64,
    pub cos_ratio: f64,
    pub ratio_sin_ok: bool,
    pub ratio_cos_ok: bool,
    /// Smallest relative slack over the five estimates (negative when one fails).
    pub margin: f64,
}

impl WindowReport {
    pub fn all_hold(&self) -> bool {
        self.basic1 && self.basic2 && self.esti1 && self.esti2 && self.esti3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatesReport {
    pub eps: f64,
    pub windows: Vec<WindowReport>,
}

impl EstimatesReport {
    /// All applicable windows except the first satisfy the five estimates and both ratio bounds.
    pub fn holds_past_first(&self) -> bool {
        let rest: Vec<&WindowReport> = self.windows.iter().skip(1).filter(|w| w.applicable).collect();
        !rest.is_empty() && rest.iter().all(|w| w.all_hold() && w.ratio_sin_ok && w.ratio_cos_ok)
    }
}

/// Simpson integrals of `rho sin theta`, `rho`, `rho cos theta` over `[a, b]`.
fn window_integrals(path: &PhasePath, a: f64, b: f64) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let k0 = path.s.partition_point(|&s| s <= a).saturating_sub(1);
    let f = |k: usize, s: f64| {
        let (th, lr) = interp(path, k, s);
        let r = lr.exp();
        [r * th.sin(), r, r * th.cos()]
    };
    let mut k = k0;
    while k + 1 < path.len() && path.s[k] < b {
        let lo = path.s[k].max(a);
        let hi = path.s[k + 1].min(b);
        if hi > lo {
            let (fa, fm, fb) = (f(k, lo), f(k, 0.5 * (lo + hi)), f(k, hi));
            for i in 0..3 {
                acc[i] += (hi - lo) / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
            }
        }
        k += 1;
    }
    acc
}

fn slack(v: f64, lo: f64, hi: f64) -> f64 {
    let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    (v - lo).min(hi - v) / scale
}

/// Checks the window-length, pointwise and integral estimates of the rotation
/// regime on every window of `seq`.
///
/// Windows whose tail sup-norms of `f, g` break the smallness hypotheses are
/// reported with `applicable = false`; if none is applicable the call fails.
pub fn verify_estimates(path: &PhasePath, seq: &SwitchSequence, eps: f64) -> Result<EstimatesReport> {
    if path.f.iter().chain(&path.g).any(|v| v.is_nan()) || path.f.len() != path.len() {
        return Err(Error::Precondition("path carries no degenerate-form perturbations f, g".into()));
    }
    if seq.num_windows() == 0 {
        return Err(Error::Inconclusive);
    }
    let n = path.len();
    let mut mf = alloc::vec![0.0; n];
    let mut mg = alloc::vec![0.0; n];
    let (mut af, mut ag): (f64, f64) = (0.0, 0.0);
    for k in (0..n).rev() {
        af = af.max(path.f[k].abs());
        ag = ag.max(path.g[k].abs());
        mf[k] = af;
        mg[k] = ag;
    }
    let se = eps.sin();
    let mut windows = Vec::new();
    let mut best_margin = f64::NEG_INFINITY;
    for (idx, (a, b)) in seq.windows().enumerate() {
        let k = path.s.partition_point(|&s| s < a).min(n - 1);
        let small = eps * eps / 4.0 - (mf[k] + mg[k] / se);
        let cot = eps * eps / 2.0 - mg[k] / (se * se);
        best_margin = best_margin.max(small.min(cot));
        let r0 = seq.rho[2 * idx];
        let len = b - a;

        let (l1, h1) = (2.0 / eps * (1.0 - eps * eps), 2.0 / eps * (1.0 + eps * eps));
        let mut m = slack(len, l1, h1);
        let basic1 = len >= l1 && len <= h1;

        let (l2, h2) = ((1.0 - eps) * eps * r0, (1.0 + eps) * eps * r0);
        let mut basic2 = true;
        let mut m2 = f64::INFINITY;
        let mut probe = |v: f64| {
            basic2 &= v >= l2 && v <= h2;
            m2 = m2.min(slack(v, l2, h2));
        };
        for j in 0..n {
            if path.s[j] > a && path.s[j] < b {
                probe(path.rho[j] * path.theta[j].sin());
            }
        }
        probe(r0 * eps.sin());
        probe(seq.rho[2 * idx + 1] * eps.sin());
        m = m.min(m2);

        let [isin, irho, icos] = window_integrals(path, a, b);
        let (l3, h3) = (2.0 * (1.0 - 2.0 * eps) * r0, 2.0 * (1.0 + 2.0 * eps) * r0);
        let esti1 = isin >= l3 && isin <= h3;
        m = m.min(slack(isin, l3, h3));
        let (l4, h4) = ((1.0 - 2.0 * eps) * r0 / eps, (1.0 + 2.0 * eps) * r0 / eps);
        let esti2 = irho >= l4 && irho <= h4;
        m = m.min(slack(irho, l4, h4));
        let esti3 = icos.abs() <= r0;
        m = m.min((r0 - icos.abs()) / r0);

        let sin_ratio = isin / irho;
        let cos_ratio = icos.abs() / irho;
        windows.push(WindowReport {
            n: idx,
            s_start: a,
            s_end: b,
            length: len,
            rho_start: r0,
            smallness_margin: small,
            cotan_margin: cot,
            applicable: small >= 0.0 && cot >= 0.0,
            monotone: seq.monotone[idx],
            int_sin: isin,
            int_rho: irho,
            int_cos: icos,
            basic1,
            basic2,
            esti1,
            esti2,
            esti3,
            sin_ratio,
            cos_ratio,
            ratio_sin_ok: sin_ratio <= 2.0 * eps * (1.0 + 2.0 * eps) / (1.0 - 2.0 * eps),
            ratio_cos_ok: cos_ratio <= 2.0 * eps,
            margin: m,
        });
    }
    if !windows.iter().any(|w| w.applicable) {
        return Err(Error::SmallnessViolated { margin: best_margin });
    }
    Ok(EstimatesReport { eps, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{simulate_polar, PolarOptions};
    use core::f64::consts::FRAC_PI_2;

    /// Constant `g` in the nilpotent frame: `zeta = g`, `beta = 1 - g`.
    fn rotation(g: f64, s_max: f64, ds: f64) -> PhasePath {
        let opt = PolarOptions { ds_out: ds, ..Default::default() };
        simulate_polar(|_| 0.0, move |_| 1.0 - g, move |_| g, 1.0, FRAC_PI_2, s_max, &opt).unwrap()
    }

    #[test]
    fn unperturbed_path_converges() {
        let p = rotation(0.0, 200.0, 0.01);
        let d = detect_dichotomy(&p, 0.1).unwrap();
        assert_eq!(d.label(), "converges_mod_pi");
        let flat = simulate_polar(|_| 0.0, |_| 1.0, |_| 0.0, 1.0, 0.0, 200.0, &PolarOptions::default()).unwrap();
        assert!(flat.theta.iter().all(|&t| t == 0.0));
        assert!(!detect_dichotomy(&flat, 0.1).unwrap().rotates());
        assert!(matches!(detect_dichotomy(&p, 0.01), Err(Error::PathTooShort { .. })));
    }

    #[test]
    fn strong_negative_g_rotates_with_short_windows() {
        let p = rotation(-0.1, 200.0, 0.01);
        assert!(p.dtheta.iter().all(|&d| d < 0.0));
        let d = detect_dichotomy(&p, 0.1).unwrap();
        assert!(d.rotates());
        let sw = d.switches();
        assert!(sw.num_windows() >= 3);
        let upper = 2.0 / 0.1_f64.tan();
        for (a, b) in sw.windows() {
            assert!(b - a > 0.0 && b - a < upper);
        }
        assert!(sw.monotone.iter().all(|&m| m));
    }

    #[test]
    fn window_lengths_in_basic_bracket() {
        for (eps, windows) in [(0.1, 2usize), (0.05, 2)] {
            let g = -eps.powi(4) / 4.0;
            let period = 2.0 * PI / (-g).sqrt();
            let p = rotation(g, period * (windows as f64 + 1.2), 0.05);
            let d = detect_dichotomy(&p, eps).unwrap();
            assert!(d.rotates(), "{eps}");
            let rep = verify_estimates(&p, d.switches(), eps).unwrap();
            assert!(rep.windows.len() >= windows, "{eps} {}", rep.windows.len());
            for w in &rep.windows {
                assert!(w.applicable && w.all_hold(), "{w:?}");
                assert!(w.ratio_sin_ok && w.ratio_cos_ok, "{w:?}");
                assert!(w.length >= 2.0 / eps * (1.0 - eps * eps) && w.length <= 2.0 / eps * (1.0 + eps * eps));
            }
            assert!(rep.holds_past_first());
        }
    }

    #[test]
    fn smallness_violation_is_reported() {
        let p = rotation(-0.1, 200.0, 0.01);
        let d = detect_dichotomy(&p, 0.1).unwrap();
        let e = verify_estimates(&p, d.switches(), 0.1).unwrap_err();
        assert!(matches!(e, Error::SmallnessViolated { margin } if margin < 0.0));
    }
}
