//! Polynomial vector fields on R^n, Lie brackets and fast evaluators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_rational::BigRational;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::poly::{parse_poly, Poly};

/// A vector field `sum_i c_i(z) d/dz_i` with exact polynomial components.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PolyVecField {
    components: Vec<Poly>,
}

impl PolyVecField {
    pub fn new(components: Vec<Poly>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidStructure("vector field of dimension 0".into()));
        }
        for c in &components {
            if c.nvars() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.nvars() });
            }
        }
        Ok(PolyVecField { components })
    }

    /// Parses one polynomial literal per component.
    pub fn from_literals<S: AsRef<str>>(literals: &[S]) -> Result<Self> {
        let dim = literals.len();
        let comps = literals.iter().map(|s| parse_poly(s.as_ref(), dim)).collect::<Result<Vec<_>>>()?;
        PolyVecField::new(comps)
    }

    pub fn zero(dim: usize) -> Self {
        PolyVecField { components: vec![Poly::zero(dim); dim] }
    }

    /// The coordinate field `d/dz_{i+1}`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut f = PolyVecField::zero(dim);
        f.components[i] = Poly::one(dim);
        f
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    fn check_dim(&self, other: &PolyVecField) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyVecField) -> Result<PolyVecField> {
        self.check_dim(other)?;
        Ok(PolyVecField { components: self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect() })
    }

    pub fn sub(&self, other: &PolyVecField) -> Result<PolyVecField> {
        self.check_dim(other)?;
        Ok(PolyVecField { components: self.components.iter().zip(&other.components).map(|(a, b)| a.sub(b)).collect() })
    }

    pub fn scale(&self, k: &BigRational) -> PolyVecField {
        PolyVecField { components: self.components.iter().map(|c| c.scale(k)).collect() }
    }

    /// Directional derivative `X(f) = sum_j X_j df/dz_j` of a polynomial.
    pub fn apply(&self, f: &Poly) -> Poly {
        let mut out = Poly::zero(self.dim());
        for (j, xj) in self.components.iter().enumerate() {
            if xj.is_zero() {
                continue;
            }
            let d = f.derivative(j);
            if !d.is_zero() {
                out = out.add(&xj.mul(&d));
            }
        }
        out
    }

    /// Exact Jacobian, `jac[i][j] = d c_i / d z_j`.
    pub fn jacobian(&self) -> Vec<Vec<Poly>> {
        let n = self.dim();
        self.components.iter().map(|c| (0..n).map(|j| c.derivative(j)).collect()).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Maps each component polynomial through `f(index, poly)`.
    pub fn map_components(&self, mut f: impl FnMut(usize, &Poly) -> Poly) -> PolyVecField {
        PolyVecField { components: self.components.iter().enumerate().map(|(i, c)| f(i, c)).collect() }
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField::new(self)
    }
}

impl fmt::Debug for PolyVecField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.components.iter().map(|c| format!("{c}"))).finish()
    }
}

impl fmt::Display for PolyVecField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "({c}) d{}", i + 1)?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// `[X, Y] = DY X - DX Y`.
pub fn lie_bracket(x: &PolyVecField, y: &PolyVecField) -> Result<PolyVecField> {
    x.check_dim(y)?;
    let comps = (0..x.dim()).map(|i| x.apply(y.component(i)).sub(&y.apply(x.component(i)))).collect();
    Ok(PolyVecField { components: comps })
}

/// A nonempty word over `{1, ..., m}` naming a right-nested bracket.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BracketWord {
    letters: Vec<usize>,
}

impl BracketWord {
    pub fn new(letters: Vec<usize>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::EmptyWord);
        }
        if let Some(&bad) = letters.iter().find(|&&l| l == 0) {
            return Err(Error::LetterOutOfRange { letter: bad, frame_len: 0 });
        }
        Ok(BracketWord { letters })
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The word `letter` followed by `self`, i.e. `[X_letter, X_self]`.
    pub fn prepend(&self, letter: usize) -> BracketWord {
        let mut l = Vec::with_capacity(self.letters.len() + 1);
        l.push(letter);
        l.extend_from_slice(&self.letters);
        BracketWord { letters: l }
    }

    /// Every word of length `len` over `m` letters, in lexicographic order.
    pub fn all_of_length(m: usize, len: usize) -> Vec<BracketWord> {
        let mut out = Vec::new();
        let mut cur = vec![1usize; len];
        if len == 0 || m == 0 {
            return out;
        }
        loop {
            out.push(BracketWord { letters: cur.clone() });
            let mut k = len;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < m {
                    cur[k] += 1;
                    for c in cur.iter_mut().skip(k + 1) {
                        *c = 1;
                    }
                    break;
                }
            }
        }
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.letters.iter().map(|l| format!("{l}")).collect::<Vec<_>>().join(",");
        f.write_str(&s)
    }
}

impl core::str::FromStr for BracketWord {
    type Err = Error;

    /// Accepts `1,1,2`, `1 1 2` or, for single-digit letters, `112`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let letters: Vec<usize> = if s.contains(',') || s.contains(' ') {
            s.split(|c| c == ',' || c == ' ')
                .filter(|t| !t.is_empty())
                .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad letter {t:?}"))))
                .collect::<Result<_>>()?
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| Error::Parse(format!("bad letter {c:?}"))))
                .collect::<Result<_>>()?
        };
        BracketWord::new(letters)
    }
}

/// Right-nested bracket `[X_{i1}, [..., [X_{i(k-1)}, X_{ik}]]]`.
pub fn bracket_of_word(frame: &[PolyVecField], w: &BracketWord) -> Result<PolyVecField> {
    let m = frame.len();
    for &l in w.letters() {
        if l == 0 || l > m {
            return Err(Error::LetterOutOfRange { letter: l, frame_len: m });
        }
    }
    let letters = w.letters();
    let mut acc = frame[letters[letters.len() - 1] - 1].clone();
    for &l in letters[..letters.len() - 1].iter().rev() {
        acc = lie_bracket(&frame[l - 1], &acc)?;
    }
    Ok(acc)
}

pub fn evaluate(x: &PolyVecField, point: &[f64]) -> Result<Vec<f64>> {
    if point.len() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: point.len() });
    }
    Ok(x.components.iter().map(|c| c.eval(point)).collect())
}

/// A single polynomial flattened to `f64` terms for allocation-free evaluation.
#[derive(Clone, Debug, Default)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    pub fn new(p: &Poly) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| {
                let factors = e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(j, &k)| (j, k)).collect();
                (c.to_f64().unwrap_or(f64::NAN), factors)
            })
            .collect();
        CompiledPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut m = *c;
            for &(j, k) in factors {
                let xj = x[j];
                let mut pw = xj;
                for _ in 1..k {
                    pw *= xj;
                }
                m *= pw;
            }
            acc += m;
        }
        acc
    }
}

/// Floating-point evaluator for a field and its Jacobian.
#[derive(Clone, Debug)]
pub struct CompiledField {
    dim: usize,
    comps: Vec<CompiledPoly>,
    /// Nonzero Jacobian entries `(i, j, d c_i / d z_j)`.
    jac: Vec<(usize, usize, CompiledPoly)>,
}

impl CompiledField {
    pub fn new(f: &PolyVecField) -> Self {
        let dim = f.dim();
        let comps = f.components.iter().map(CompiledPoly::new).collect();
        let mut jac = Vec::new();
        for (i, c) in f.components.iter().enumerate() {
            for j in 0..dim {
                let d = c.derivative(j);
                if !d.is_zero() {
                    jac.push((i, j, CompiledPoly::new(&d)));
                }
            }
        }
        CompiledField { dim, comps, jac }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// `<p, X(x)>`.
    #[inline]
    pub fn pair(&self, x: &[f64], p: &[f64]) -> f64 {
        self.comps.iter().zip(p).filter(|(_, pi)| **pi != 0.0).map(|(c, pi)| pi * c.eval(x)).sum()
    }

    /// Accumulates `scale * DX(x)^T p` into `out` (the x-gradient of `<p, X(x)>`).
    #[inline]
    pub fn add_pullback(&self, x: &[f64], p: &[f64], scale: f64, out: &mut [f64]) {
        for (i, j, d) in &self.jac {
            out[*j] += scale * p[*i] * d.eval(x);
        }
    }

    /// Accumulates `scale * DX(x) v` into `out`.
    #[inline]
    pub fn add_jvp(&self, x: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        for (i, j, d) in &self.jac {
            out[*i] += scale * v[*j] * d.eval(x);
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, d) in &self.jac {
            m[(*i, *j)] = d.eval(x);
        }
        m
    }
}

fn one_sided_commutator(x: &CompiledField, y: &CompiledField, q: &[f64], r: f64, steps: usize) -> Vec<f64> {
    let flow = |f: &CompiledField, p: &[f64], time: f64| crate::ode::rk4(|z, out| f.eval_into(z, out), p, time, steps);
    let p = flow(x, q, r);
    let p = flow(y, &p, r);
    let p = flow(x, &p, -r);
    let p = flow(y, &p, -r);
    p.iter().zip(q).map(|(a, b)| (a - b) / (r * r)).collect()
}

/// Flow-commutator quotient `(Phi^Y_{-r} Phi^X_{-r} Phi^Y_r Phi^X_r q - q) / t` with `r = sqrt t`,
/// averaged over `r` and `-r`, then extrapolated from `t` and `t/4`; approximates `[X, Y](q)` to `O(t^2)`.
///
/// Each flow takes `steps` RK4 steps.
pub fn flow_commutator(x: &CompiledField, y: &CompiledField, q: &[f64], t: f64, steps: usize) -> Result<Vec<f64>> {
    if q.len() != x.dim() || q.len() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: q.len() });
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("commutator time must be positive, got {t}")));
    }
    let symmetric = |r: f64| -> Vec<f64> {
        let plus = one_sided_commutator(x, y, q, r, steps);
        let minus = one_sided_commutator(x, y, q, -r, steps);
        plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let r = t.sqrt();
    let coarse = symmetric(r);
    let fine = symmetric(0.5 * r);
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ratio;

    fn lit(v: &[&str]) -> PolyVecField {
        PolyVecField::from_literals(v).unwrap()
    }

    fn heisenberg() -> (PolyVecField, PolyVecField) {
        (lit(&["1", "0", "-1/2 * z2"]), lit(&["0", "1", "1/2 * z1"]))
    }

    fn martinet() -> (PolyVecField, PolyVecField) {
        (lit(&["1", "0", "0"]), lit(&["0", "1", "1/2 * z1^2"]))
    }

    #[test]
    fn bracket_of_d1_and_z1_d2() {
        let x = lit(&["1", "0"]);
        let y = lit(&["0", "z1"]);
        assert_eq!(lie_bracket(&x, &y).unwrap(), PolyVecField::coordinate(2, 1));
    }

    #[test]
    fn heisenberg_bracket_is_dz() {
        let (x1, x2) = heisenberg();
        assert_eq!(lie_bracket(&x1, &x2).unwrap(), PolyVecField::coordinate(3, 2));
    }

    #[test]
    fn martinet_brackets() {
        let (x1, x2) = martinet();
        assert_eq!(lie_bracket(&x1, &x2).unwrap(), lit(&["0", "0", "z1"]));
        let frame = [x1, x2];
        let w = |s: &str| s.parse::<BracketWord>().unwrap();
        assert_eq!(bracket_of_word(&frame, &w("112")).unwrap(), PolyVecField::coordinate(3, 2));
        assert!(bracket_of_word(&frame, &w("212")).unwrap().is_zero());
        assert_eq!(bracket_of_word(&frame, &w("2")).unwrap(), frame[1]);
    }

    #[test]
    fn bracket_errors() {
        let (x1, x2) = martinet();
        assert!(matches!(BracketWord::new(vec![]), Err(Error::EmptyWord)));
        let w = BracketWord::new(vec![1, 3]).unwrap();
        assert!(matches!(bracket_of_word(&[x1.clone(), x2], &w), Err(Error::LetterOutOfRange { letter: 3, frame_len: 2 })));
        let y = lit(&["1", "0"]);
        assert!(matches!(lie_bracket(&x1, &y), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn evaluation() {
        let (x1, x2) = martinet();
        assert_eq!(evaluate(&x1, &[3.0, -1.0, 2.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let b = lie_bracket(&x1, &x2).unwrap();
        assert_eq!(evaluate(&b, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(evaluate(&b, &[2.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 2.0]);
        assert!(evaluate(&b, &[2.0, 0.0]).is_err());
    }

    #[test]
    fn compiled_matches_exact() {
        let f = lit(&["1/3 * z1^3 * z2 - z2^2", "z1 * z2 + 7", "0"]);
        let c = f.compile();
        let x = [0.7, -1.3, 2.0];
        let a = evaluate(&f, &x).unwrap();
        let b = c.eval(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
        let j = c.jacobian(&x);
        assert!((j[(0, 0)] - 0.7f64.powi(2) * -1.3).abs() < 1e-14);
        assert!((j[(0, 1)] - (0.7f64.powi(3) / 3.0 + 2.6)).abs() < 1e-14);
        let p = [1.0, 2.0, -1.0];
        assert!((c.pair(&x, &p) - (a[0] + 2.0 * a[1])).abs() < 1e-14);
    }

    #[test]
    fn words_enumeration() {
        let w = BracketWord::all_of_length(2, 3);
        assert_eq!(w.len(), 8);
        assert_eq!(w[0].letters(), &[1, 1, 1]);
        assert_eq!(w[7].letters(), &[2, 2, 2]);
        assert_eq!(format!("{}", w[3]), "1,2,2");
    }

    #[test]
    fn scaling_is_exact() {
        let (x1, _) = heisenberg();
        let h = x1.scale(&ratio(2, 1));
        assert_eq!(h, lit(&["2", "0", "-1 * z2"]));
    }
}
