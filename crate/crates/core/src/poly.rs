//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Monomials are keyed by their exponent multi-index in a `BTreeMap`, so two
//! polynomials are equal exactly when their term maps are equal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exponent multi-index of a monomial `z1^a1 * ... * zn^an`.
pub type Exponents = Vec<u32>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, BigRational::one())
    }

    /// The coordinate function `z_{var+1}` (0-based `var`).
    pub fn var(nvars: usize, var: usize) -> Self {
        assert!(var < nvars, "variable index out of range");
        let mut e = vec![0; nvars];
        e[var] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn monomial(c: BigRational, exps: Exponents) -> Self {
        let mut p = Poly::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, exps: &[u32]) -> BigRational {
        self.terms.get(exps).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, exps: Exponents, c: BigRational) {
        assert_eq!(exps.len(), self.nvars, "monomial arity");
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            alloc::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars, "polynomial arity");
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars, "polynomial arity");
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect() }
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars, "polynomial arity");
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Partial derivative with respect to `z_{var+1}`.
    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            let k = e[var];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c * BigRational::from_integer(BigInt::from(k)));
        }
        out
    }

    /// Applies `f(exponents, coefficient) -> new coefficient` to every term.
    pub fn map_terms(&self, mut f: impl FnMut(&Exponents, &BigRational) -> BigRational) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(e, c));
        }
        out
    }

    /// Keeps the terms for which `keep` returns true.
    pub fn filter_terms(&self, mut keep: impl FnMut(&Exponents) -> bool) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().filter(|(e, _)| keep(e)).map(|(e, c)| (e.clone(), c.clone())).collect() }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = c.to_f64().unwrap_or(f64::NAN);
            for (x, &k) in point.iter().zip(e) {
                for _ in 0..k {
                    m *= x;
                }
            }
            acc += m;
        }
        acc
    }

    pub fn eval_exact(&self, point: &[BigRational]) -> BigRational {
        debug_assert_eq!(point.len(), self.nvars);
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (x, &k) in point.iter().zip(e) {
                for _ in 0..k {
                    m *= x;
                }
            }
            acc += m;
        }
        acc
    }

    /// Weighted degree `sum_j a_j w_j` of a monomial.
    pub fn weighted_degree(exps: &[u32], weights: &[u32]) -> i64 {
        exps.iter().zip(weights).map(|(&a, &w)| a as i64 * w as i64).sum()
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

impl fmt::Display for Poly {
    /// Canonical literal form, e.g. `1/2 * z1^2 - z2`, parseable by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let is_const = e.iter().all(|&k| k == 0);
            let mut wrote = false;
            if !mag.is_one() || is_const {
                write!(f, "{}", mag)?;
                wrote = true;
            }
            for (j, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if wrote {
                    f.write_str(" * ")?;
                }
                if k == 1 {
                    write!(f, "z{}", j + 1)?;
                } else {
                    write!(f, "z{}^{}", j + 1, k)?;
                }
                wrote = true;
            }
        }
        Ok(())
    }
}

/// Parses a polynomial literal in `nvars` variables `z1..zn`.
///
/// Grammar: a signed sum of terms, each term a `*`-separated product of
/// rational constants (`p` or `p/q`) and powers `zk` / `zk^a`.
pub fn parse_poly(src: &str, nvars: usize) -> Result<Poly> {
    Parser { s: src.as_bytes(), pos: 0, nvars }.poly()
}

impl FromStr for Poly {
    type Err = Error;

    /// Parses with the arity inferred from the highest variable index used.
    fn from_str(s: &str) -> Result<Poly> {
        let mut nvars = 0usize;
        let b = s.as_bytes();
        let mut i = 0;
        while i < b.len() {
            if b[i] == b'z' {
                let start = i + 1;
                let mut j = start;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                if let Ok(k) = s[start..j].parse::<usize>() {
                    nvars = nvars.max(k);
                }
                i = j;
            } else {
                i += 1;
            }
        }
        parse_poly(s, nvars)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected digits"));
        }
        let digits = core::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("utf8"))?;
        digits.parse::<BigInt>().map_err(|_| self.err("bad integer"))
    }

    fn poly(&mut self) -> Result<Poly> {
        let mut out = Poly::zero(self.nvars);
        let mut first = true;
        loop {
            let sign = match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    1
                }
                Some(b'-') => {
                    self.pos += 1;
                    -1
                }
                None if first => return Err(self.err("empty polynomial")),
                None => break,
                _ if first => 1,
                _ => return Err(self.err("expected '+' or '-'")),
            };
            first = false;
            let (c, e) = self.term()?;
            let c = if sign < 0 { -c } else { c };
            out.add_term(e, c);
            if self.peek().is_none() {
                break;
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(BigRational, Exponents)> {
        let mut c = BigRational::one();
        let mut e = vec![0u32; self.nvars];
        loop {
            match self.peek() {
                Some(b'z') => {
                    self.pos += 1;
                    let idx = self.number()?;
                    let idx = idx.to_usize().ok_or_else(|| self.err("bad variable index"))?;
                    if idx == 0 || idx > self.nvars {
                        return Err(self.err(&format!("variable z{idx} outside z1..z{}", self.nvars)));
                    }
                    let mut k = 1u32;
                    if self.peek() == Some(b'^') {
                        self.pos += 1;
                        k = self.number()?.to_u32().ok_or_else(|| self.err("bad exponent"))?;
                    }
                    e[idx - 1] += k;
                }
                Some(d) if d.is_ascii_digit() => {
                    let p = self.number()?;
                    let q = if self.peek() == Some(b'/') {
                        self.pos += 1;
                        self.number()?
                    } else {
                        BigInt::one()
                    };
                    if q.is_zero() {
                        return Err(self.err("zero denominator"));
                    }
                    c *= BigRational::new(p, q);
                }
                _ => return Err(self.err("expected constant or variable")),
            }
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((c, e))
    }
}

/// Exact rational from a finite `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parse_and_display() {
        let p = parse_poly("-1/2 * z2 + 3*z1^2*z3 - 4", 3).unwrap();
        assert_eq!(p.coefficient(&[0, 1, 0]), ratio(-1, 2));
        assert_eq!(p.coefficient(&[2, 0, 1]), ratio(3, 1));
        assert_eq!(p.coefficient(&[0, 0, 0]), ratio(-4, 1));
        let q = parse_poly(&p.to_string(), 3).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_literal_and_cancellation() {
        assert!(parse_poly("0", 2).unwrap().is_zero());
        assert!(parse_poly("z1 - z1", 2).unwrap().is_zero());
        assert_eq!(parse_poly("0", 2).unwrap().to_string(), "0");
    }

    #[test]
    fn parse_errors() {
        assert!(parse_poly("z4", 3).is_err());
        assert!(parse_poly("1/0", 1).is_err());
        assert!(parse_poly("", 1).is_err());
        assert!(parse_poly("z1 z2", 2).is_err());
        assert!(parse_poly("2 * * z1", 2).is_err());
    }

    #[test]
    fn derivative_and_eval() {
        let p = parse_poly("1/6 * z1^3 + z1 * z2", 2).unwrap();
        let d = p.derivative(0);
        assert_eq!(d, parse_poly("1/2 * z1^2 + z2", 2).unwrap());
        assert!((p.eval(&[2.0, 3.0]) - (8.0 / 6.0 + 6.0)).abs() < 1e-15);
        let exact = p.eval_exact(&[ratio(2, 1), ratio(3, 1)]);
        assert_eq!(exact, ratio(22, 3));
    }

    #[test]
    fn from_str_infers_arity() {
        let p: Poly = "z3^2 + 1".parse().unwrap();
        assert_eq!(p.nvars(), 3);
    }

    #[test]
    fn product_is_exact() {
        let a = parse_poly("z1 + 1/3", 1).unwrap();
        let b = parse_poly("z1 - 1/3", 1).unwrap();
        assert_eq!(a.mul(&b), parse_poly("z1^2 - 1/9", 1).unwrap());
    }
}
