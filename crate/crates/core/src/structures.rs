//! Sub-Riemannian structures, flags, dilations and nilpotent approximation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::linalg::{exact_rank, numerical_rank};
use crate::poly::{parse_poly, Poly};
use crate::vfield::{bracket_of_word, lie_bracket, BracketWord, PolyVecField};

/// Relative singular-value threshold used by [`flag_dimensions`].
pub const RANK_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SRStructure {
    pub name: String,
    dim: usize,
    frame: Vec<PolyVecField>,
    weights: Option<Vec<u32>>,
}

impl SRStructure {
    pub fn new(name: impl Into<String>, frame: Vec<PolyVecField>, weights: Option<Vec<u32>>) -> Result<Self> {
        if frame.len() < 2 {
            return Err(Error::InvalidStructure(format!("frame has {} fields, need at least 2", frame.len())));
        }
        let dim = frame[0].dim();
        for f in &frame {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: f.dim() });
            }
        }
        if let Some(w) = &weights {
            if w.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: w.len() });
            }
            if w.first() != Some(&1) || w.windows(2).any(|p| p[0] > p[1]) {
                return Err(Error::InvalidStructure("weights must be nondecreasing with w_1 = 1".into()));
            }
        }
        Ok(SRStructure { name: name.into(), dim, frame, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    pub fn frame(&self) -> &[PolyVecField] {
        &self.frame
    }

    pub fn weights(&self) -> Option<&[u32]> {
        self.weights.as_deref()
    }

    pub fn bracket(&self, w: &BracketWord) -> Result<PolyVecField> {
        bracket_of_word(&self.frame, w)
    }

    /// Every right-nested bracket field with word length `<= max_len`, keyed by word.
    pub fn brackets_up_to(&self, max_len: usize) -> BTreeMap<BracketWord, PolyVecField> {
        let m = self.rank();
        let mut out: BTreeMap<BracketWord, PolyVecField> = BTreeMap::new();
        let mut prev: Vec<(BracketWord, PolyVecField)> =
            (1..=m).map(|i| (BracketWord::new(vec![i]).expect("nonempty"), self.frame[i - 1].clone())).collect();
        for len in 1..=max_len {
            if len > 1 {
                let mut next = Vec::with_capacity(prev.len() * m);
                for i in 1..=m {
                    for (w, f) in &prev {
                        let b = lie_bracket(&self.frame[i - 1], f).expect("same dimension");
                        next.push((w.prepend(i), b));
                    }
                }
                prev = next;
            }
            for (w, f) in &prev {
                out.insert(w.clone(), f.clone());
            }
        }
        out
    }

    pub fn heisenberg() -> Self {
        let x1 = PolyVecField::from_literals(&["1", "0", "-1/2 * z2"]).expect("literal");
        let x2 = PolyVecField::from_literals(&["0", "1", "1/2 * z1"]).expect("literal");
        SRStructure::new("heisenberg", vec![x1, x2], Some(vec![1, 1, 2])).expect("valid")
    }

    pub fn martinet() -> Self {
        let x1 = PolyVecField::from_literals(&["1", "0", "0"]).expect("literal");
        let x2 = PolyVecField::from_literals(&["0", "1", "1/2 * z1^2"]).expect("literal");
        SRStructure::new("martinet", vec![x1, x2], Some(vec![1, 1, 3])).expect("valid")
    }

    pub fn engel() -> Self {
        let x1 = PolyVecField::from_literals(&["1", "0", "0", "0"]).expect("literal");
        let x2 = PolyVecField::from_literals(&["0", "1", "z1", "1/2 * z1^2"]).expect("literal");
        SRStructure::new("engel", vec![x1, x2], Some(vec![1, 1, 2, 3])).expect("valid")
    }

    /// Martinet with a cubic perturbation; its nilpotent approximation is `martinet`.
    pub fn martinet_cubic() -> Self {
        let x1 = PolyVecField::from_literals(&["1", "0", "0"]).expect("literal");
        let x2 = PolyVecField::from_literals(&["0", "1", "1/2 * z1^2 + z1^3"]).expect("literal");
        SRStructure::new("martinet-cubic", vec![x1, x2], Some(vec![1, 1, 3])).expect("valid")
    }

    /// Engel with terms of weighted degree one above the graded part.
    pub fn engel_perturbed() -> Self {
        let x1 = PolyVecField::from_literals(&["1", "0", "0", "0"]).expect("literal");
        let x2 = PolyVecField::from_literals(&["0", "1", "z1 + z1^2", "1/2 * z1^2 + z2 * z3"]).expect("literal");
        SRStructure::new("engel-perturbed", vec![x1, x2], Some(vec![1, 1, 2, 3])).expect("valid")
    }

    /// Free step-4 frame with `z1^4/24` added to the sixth component of `X2`, so that
    /// `X1112 = (1 + z1) d6` and `A` varies along abnormal extremals.
    pub fn free4_perturbed() -> Self {
        let base = free_nilpotent_frame(4).expect("step 4");
        let mut comps = base.frame[1].components().to_vec();
        comps[5] = comps[5].add(&parse_poly("1/24 * z1^4", 8).expect("literal"));
        let x2 = PolyVecField::new(comps).expect("same dimension");
        SRStructure::new("free4-perturbed", vec![base.frame[0].clone(), x2], base.weights).expect("valid")
    }

    /// Builtin structure by name; see [`SRStructure::BUILTIN_NAMES`].
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "heisenberg" => Some(Self::heisenberg()),
            "martinet" => Some(Self::martinet()),
            "engel" => Some(Self::engel()),
            "free2" => free_nilpotent_frame(2).ok(),
            "free3" => free_nilpotent_frame(3).ok(),
            "free4" => free_nilpotent_frame(4).ok(),
            "martinet-cubic" => Some(Self::martinet_cubic()),
            "engel-perturbed" => Some(Self::engel_perturbed()),
            "free4-perturbed" => Some(Self::free4_perturbed()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 9] =
        ["heisenberg", "martinet", "engel", "free2", "free3", "free4", "martinet-cubic", "engel-perturbed", "free4-perturbed"];
}

/// Rank-2 free nilpotent frame of step 2, 3 or 4 in graded coordinates.
///
/// Coordinates follow the Hall order `X1, X2; X12; X112, X212; X1112, X2112, X2212`.
pub fn free_nilpotent_frame(step: u32) -> Result<SRStructure> {
    let (dim, weights): (usize, &[u32]) = match step {
        2 => (3, &[1, 1, 2]),
        3 => (5, &[1, 1, 2, 3, 3]),
        4 => (8, &[1, 1, 2, 3, 3, 4, 4, 4]),
        s => return Err(Error::UnsupportedStep(s)),
    };
    let x2_full = ["0", "1", "z1", "1/2 * z1^2", "z1 * z2", "1/6 * z1^3", "1/2 * z1^2 * z2", "1/2 * z1 * z2^2"];
    let mut x1 = vec!["0"; dim];
    x1[0] = "1";
    let x1 = PolyVecField::from_literals(&x1)?;
    let x2 = PolyVecField::from_literals(&x2_full[..dim])?;
    SRStructure::new(format!("free{step}"), vec![x1, x2], Some(weights.to_vec()))
}

fn check_point(s: &SRStructure, point: &[f64]) -> Result<()> {
    if point.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: point.len() });
    }
    Ok(())
}

/// Converts a point to exact rationals when every coordinate has denominator `<= 2^32`.
fn small_rational_point(point: &[f64]) -> Option<Vec<BigRational>> {
    let bound = BigInt::from(1u64 << 32);
    point
        .iter()
        .map(|&x| {
            let r = BigRational::from_float(x)?;
            (r.denom() <= &bound).then_some(r)
        })
        .collect()
}

/// Dimensions of `D^1, ..., D^max_step` at `point`.
pub fn flag_dimensions(s: &SRStructure, point: &[f64], max_step: usize) -> Result<Vec<usize>> {
    check_point(s, point)?;
    if let Some(exact) = small_rational_point(point) {
        return flag_dimensions_exact(s, &exact, max_step);
    }
    let brackets = s.brackets_up_to(max_step);
    let mut dims = Vec::with_capacity(max_step);
    for i in 0..max_step {
        let cols: Vec<Vec<f64>> = brackets
            .iter()
            .filter(|(w, _)| w.len() <= i + 1)
            .map(|(_, f)| f.components().iter().map(|c| c.eval(point)).collect())
            .collect();
        let m = DMatrix::from_fn(s.dim(), cols.len(), |r, c| cols[c][r]);
        dims.push(numerical_rank(&m, RANK_REL_TOL));
    }
    Ok(dims)
}

/// Exact flag dimensions at a rational point.
pub fn flag_dimensions_exact(s: &SRStructure, point: &[BigRational], max_step: usize) -> Result<Vec<usize>> {
    if point.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: point.len() });
    }
    let brackets = s.brackets_up_to(max_step);
    let mut dims = Vec::with_capacity(max_step);
    for i in 0..max_step {
        let rows: Vec<Vec<BigRational>> = brackets
            .iter()
            .filter(|(w, _)| w.len() <= i + 1)
            .map(|(_, f)| f.components().iter().map(|c| c.eval_exact(point)).collect())
            .collect();
        dims.push(exact_rank(rows));
    }
    Ok(dims)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    pub weights: Vec<u32>,
    pub nu: f64,
}

pub fn dilate(d: &Dilation, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != d.weights.len() {
        return Err(Error::DimensionMismatch { expected: d.weights.len(), found: z.len() });
    }
    Ok(z.iter().zip(&d.weights).map(|(&x, &w)| x * d.nu.powi(w as i32)).collect())
}

fn rational_pow(base: &BigRational, e: i64) -> BigRational {
    let p = num_traits::pow(base.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// The frame `nu (delta_{1/nu})_* X_i`, computed exactly on polynomial coefficients.
///
/// A monomial `z^a` in component `i` is multiplied by `nu^(1 - w_i + sum_j a_j w_j)`.
pub fn pushforward_rescaled(s: &SRStructure, nu: f64) -> Result<SRStructure> {
    let w = s.weights().ok_or(Error::WeightsAbsent)?.to_vec();
    let nu_q = BigRational::from_float(nu)
        .filter(|q| q.is_positive())
        .ok_or_else(|| Error::Precondition(format!("dilation factor must be positive and finite, got {nu}")))?;
    let frame = s
        .frame()
        .iter()
        .map(|f| {
            f.map_components(|i, c| {
                c.map_terms(|a, coef| {
                    let e = 1 - w[i] as i64 + Poly::weighted_degree(a, &w);
                    coef * rational_pow(&nu_q, e)
                })
            })
        })
        .collect();
    SRStructure::new(s.name.clone(), frame, Some(w))
}

/// Weighted-degree `-1` part of each frame field.
pub fn nilpotent_approximation(s: &SRStructure) -> Result<SRStructure> {
    let w = s.weights().ok_or(Error::WeightsAbsent)?.to_vec();
    for (k, f) in s.frame().iter().enumerate() {
        for (i, c) in f.components().iter().enumerate() {
            for (a, _) in c.terms() {
                let d = Poly::weighted_degree(a, &w) - w[i] as i64;
                if d < -1 {
                    return Err(Error::NotPrivileged(format!("X{} component {} has a term of weighted degree {d}", k + 1, i + 1)));
                }
            }
        }
    }
    let frame =
        s.frame().iter().map(|f| f.map_components(|i, c| c.filter_terms(|a| Poly::weighted_degree(a, &w) == w[i] as i64 - 1))).collect();
    let out = SRStructure::new(format!("{}-nilpotent", s.name.trim_end_matches("-nilpotent")), frame, Some(w.clone()))?;
    let max_w = *w.iter().max().unwrap_or(&1) as usize;
    let origin = vec![BigRational::from_integer(BigInt::from(0)); s.dim()];
    let flag = flag_dimensions_exact(&out, &origin, max_w)?;
    if flag.last() != Some(&s.dim()) {
        return Err(Error::NotPrivileged(format!("truncated frame is not bracket-generating at 0: flag {flag:?}")));
    }
    Ok(out)
}

/// Sup over sample points in the closed unit ball of `max_k |X_k(z) - Y_k(z)|`.
///
/// Samples a regular grid with `per_axis` points per coordinate, keeping points in the ball.
pub fn sup_distance_on_ball(a: &SRStructure, b: &SRStructure, per_axis: usize) -> Result<f64> {
    if a.dim() != b.dim() || a.rank() != b.rank() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let n = a.dim();
    let diffs: Vec<_> = a.frame().iter().zip(b.frame()).map(|(x, y)| x.sub(y).map(|d| d.compile())).collect::<Result<_>>()?;
    let per_axis = per_axis.max(2);
    let mut idx = vec![0usize; n];
    let mut z = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut best: f64 = 0.0;
    loop {
        for (zi, &k) in z.iter_mut().zip(&idx) {
            *zi = -1.0 + 2.0 * k as f64 / (per_axis - 1) as f64;
        }
        if z.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12 {
            for d in &diffs {
                d.eval_into(&z, &mut out);
                best = best.max(out.iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Piecewise-constant control: `samples[k]` holds on `[times[k], times[k+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: samples.len() });
        }
        if times.is_empty() || times.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidStructure("control time grid must be nonempty and increasing".into()));
        }
        Ok(ControlSignal { times, samples })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Value at time `t` (right-continuous).
    pub fn at(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        &self.samples[k]
    }

    /// Sample index active just before `t`.
    fn left_index(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t).saturating_sub(1)
    }

    /// Largest deviation of `|u(t_k)|` from 1.
    pub fn unit_defect(&self) -> f64 {
        self.samples.iter().map(|u| (u.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `u_n(tau) = u(a + tau (b - a))` on `[0, 1]`; samples are reused, never interpolated.
pub fn blowup_control(u: &ControlSignal, a: f64, b: f64) -> Result<ControlSignal> {
    if !(a < b) || a < u.times[0] || b > u.horizon() {
        return Err(Error::EmptyInterval { a, b });
    }
    let len = b - a;
    let mut times = vec![0.0];
    let mut samples = vec![u.at(a).to_vec()];
    for (t, s) in u.times.iter().zip(&u.samples) {
        if *t > a && *t < b {
            times.push((t - a) / len);
            samples.push(s.clone());
        }
    }
    times.push(1.0);
    samples.push(u.samples[u.left_index(b)].clone());
    ControlSignal::new(times, samples)
}

impl core::fmt::Display for SRStructure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{} (dim {}, rank {})", self.name, self.dim, self.rank())?;
        for (i, x) in self.frame.iter().enumerate() {
            writeln!(f, "  X{} = {}", i + 1, x)?;
        }
        if let Some(w) = &self.weights {
            write!(f, "  weights = {w:?}")?;
        }
        Ok(())
    }
}

/// A canonical name for a bracket word, e.g. `X2112`.
pub fn word_label(w: &BracketWord) -> String {
    let mut s = "X".to_string();
    for l in w.letters() {
        s.push_str(&format!("{l}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_poly, ratio};

    fn word(s: &str) -> BracketWord {
        s.parse().unwrap()
    }

    #[test]
    fn flags_of_builtins() {
        let o3 = [0.0; 3];
        assert_eq!(flag_dimensions(&SRStructure::heisenberg(), &o3, 2).unwrap(), vec![2, 3]);
        assert_eq!(flag_dimensions(&SRStructure::martinet(), &o3, 3).unwrap(), vec![2, 2, 3]);
        assert_eq!(flag_dimensions(&SRStructure::martinet(), &[1.0, 0.0, 0.0], 2).unwrap(), vec![2, 3]);
        assert_eq!(flag_dimensions(&free_nilpotent_frame(3).unwrap(), &[0.0; 5], 3).unwrap(), vec![2, 3, 5]);
        assert_eq!(flag_dimensions(&free_nilpotent_frame(4).unwrap(), &[0.0; 8], 4).unwrap(), vec![2, 3, 5, 8]);
        assert_eq!(flag_dimensions(&SRStructure::engel(), &[0.0; 4], 3).unwrap(), vec![2, 3, 4]);
    }

    #[test]
    fn float_path_agrees_off_dyadic_points() {
        let s = SRStructure::martinet();
        assert_eq!(flag_dimensions(&s, &[0.1, 0.3, -0.7], 2).unwrap(), vec![2, 3]);
        let f4 = free_nilpotent_frame(4).unwrap();
        let p = [0.1, -0.3, 0.7, 0.2, 0.9, -0.6, 0.4, 0.33];
        assert_eq!(flag_dimensions(&f4, &p, 4).unwrap(), vec![2, 3, 5, 8]);
    }

    #[test]
    fn free_step2_brackets() {
        let s = free_nilpotent_frame(2).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.bracket(&word("12")).unwrap(), PolyVecField::coordinate(3, 2));
        for w in BracketWord::all_of_length(2, 3) {
            assert!(s.bracket(&w).unwrap().is_zero(), "{w}");
        }
    }

    #[test]
    fn free_step4_hall_brackets() {
        let s = free_nilpotent_frame(4).unwrap();
        let lit = |v: &[&str]| PolyVecField::from_literals(v).unwrap();
        assert_eq!(s.bracket(&word("12")).unwrap(), lit(&["0", "0", "1", "z1", "z2", "1/2 * z1^2", "z1 * z2", "1/2 * z2^2"]));
        assert_eq!(s.bracket(&word("112")).unwrap(), lit(&["0", "0", "0", "1", "0", "z1", "z2", "0"]));
        assert_eq!(s.bracket(&word("212")).unwrap(), lit(&["0", "0", "0", "0", "1", "0", "z1", "z2"]));
        assert_eq!(s.bracket(&word("1112")).unwrap(), PolyVecField::coordinate(8, 5));
        assert_eq!(s.bracket(&word("2112")).unwrap(), PolyVecField::coordinate(8, 6));
        assert_eq!(s.bracket(&word("1212")).unwrap(), PolyVecField::coordinate(8, 6));
        assert_eq!(s.bracket(&word("2212")).unwrap(), PolyVecField::coordinate(8, 7));
        for w in BracketWord::all_of_length(2, 5) {
            assert!(s.bracket(&w).unwrap().is_zero(), "{w}");
        }
    }

    #[test]
    fn unsupported_step() {
        assert!(matches!(free_nilpotent_frame(5), Err(Error::UnsupportedStep(5))));
    }

    #[test]
    fn dilation_examples() {
        let d = |nu| Dilation { weights: vec![1, 1, 2], nu };
        assert_eq!(dilate(&d(1.0), &[0.3, -2.0, 5.0]).unwrap(), vec![0.3, -2.0, 5.0]);
        assert_eq!(dilate(&d(2.0), &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 4.0]);
        assert!(dilate(&d(2.0), &[1.0]).is_err());
    }

    #[test]
    fn pushforward_fixes_homogeneous_frames() {
        for s in [free_nilpotent_frame(2).unwrap(), free_nilpotent_frame(4).unwrap(), SRStructure::martinet()] {
            for nu in [0.5, 0.1, 3.0] {
                assert_eq!(pushforward_rescaled(&s, nu).unwrap().frame(), s.frame());
            }
        }
    }

    #[test]
    fn pushforward_exponent_rule() {
        let x = PolyVecField::from_literals(&["1", "z1^3"]).unwrap();
        let s = SRStructure::new("t", vec![x.clone(), x], Some(vec![1, 2])).unwrap();
        let r = pushforward_rescaled(&s, 0.5).unwrap();
        assert_eq!(r.frame()[0].component(1), &parse_poly("1/4 * z1^3", 2).unwrap());
        assert!(matches!(pushforward_rescaled(&SRStructure::new("t", s.frame().to_vec(), None).unwrap(), 0.5), Err(Error::WeightsAbsent)));
    }

    #[test]
    fn nilpotent_approximation_examples() {
        let f3 = free_nilpotent_frame(3).unwrap();
        assert_eq!(nilpotent_approximation(&f3).unwrap().frame(), f3.frame());
        let m = SRStructure::martinet();
        assert_eq!(nilpotent_approximation(&m).unwrap().frame(), m.frame());
        let x1 = PolyVecField::from_literals(&["1", "0", "0"]).unwrap();
        let x2 = PolyVecField::from_literals(&["0", "1", "1/2 * z1^2 + z1^3"]).unwrap();
        let s = SRStructure::new("fa", vec![x1, x2], Some(vec![1, 1, 3])).unwrap();
        let n = nilpotent_approximation(&s).unwrap();
        assert_eq!(n.frame(), m.frame());
    }

    #[test]
    fn nilpotent_approximation_detects_bad_charts() {
        let x1 = PolyVecField::from_literals(&["1", "0", "0"]).unwrap();
        let x2 = PolyVecField::from_literals(&["0", "1", "z1"]).unwrap();
        let s = SRStructure::new("h", vec![x1.clone(), x2.clone()], Some(vec![1, 1, 3])).unwrap();
        assert!(matches!(nilpotent_approximation(&s), Err(Error::NotPrivileged(_))));
        let x2 = PolyVecField::from_literals(&["0", "1", "z1^3"]).unwrap();
        let s = SRStructure::new("h", vec![x1, x2], Some(vec![1, 1, 3])).unwrap();
        assert!(matches!(nilpotent_approximation(&s), Err(Error::NotPrivileged(_))));
    }

    #[test]
    fn blowup_examples() {
        let v = vec![0.6, 0.8];
        let c = ControlSignal::new(vec![0.0, 0.5, 2.0], vec![v.clone(), v.clone(), v.clone()]).unwrap();
        let b = blowup_control(&c, 0.25, 1.0).unwrap();
        assert!(b.samples.iter().all(|s| s == &v));
        let full = blowup_control(&c, 0.0, 2.0).unwrap();
        assert_eq!(full.times, vec![0.0, 0.25, 1.0]);
        let step = ControlSignal::new(vec![0.0, 1.5, 3.0], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let s = blowup_control(&step, 1.0, 2.0).unwrap();
        assert_eq!(s.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.at(0.49), &[1.0, 0.0]);
        assert_eq!(s.at(0.5), &[0.0, 1.0]);
        assert!(matches!(blowup_control(&c, 1.0, 1.0), Err(Error::EmptyInterval { .. })));
    }

    #[test]
    fn exact_powers() {
        assert_eq!(rational_pow(&ratio(1, 2), -3), ratio(8, 1));
        assert_eq!(rational_pow(&ratio(2, 3), 2), ratio(4, 9));
    }
}
