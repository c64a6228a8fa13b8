use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::structures::ControlSignal;

#[derive(Clone, Debug, PartialEq)]
pub enum SignVerdict {
    ConstantPositive,
    ConstantNegative,
    /// Times at which the sign of `<v, u>` flips.
    SignChange(Vec<f64>),
}

/// Sign of `<v, u(t_k)>` along a control that is samplewise parallel to the unit vector `v`.
pub fn constant_sign_check(u: &ControlSignal, v: [f64; 2], tol: f64) -> Result<SignVerdict> {
    let vn = v[0].hypot(v[1]);
    if (vn - 1.0).abs() > tol {
        return Err(Error::Precondition("reference direction must be a unit vector".into()));
    }
    let mut signs = Vec::with_capacity(u.samples.len());
    for (k, s) in u.samples.iter().enumerate() {
        if s.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: s.len() });
        }
        let n = s[0].hypot(s[1]);
        if (n - 1.0).abs() > tol {
            return Err(Error::Precondition(alloc::format!("|u| = {n} at node {k}")));
        }
        let cross = (v[0] * s[1] - v[1] * s[0]) / n;
        let angle = cross.abs().min(1.0).asin();
        if angle > tol {
            return Err(Error::NotParallel { node: k, angle });
        }
        signs.push(v[0] * s[0] + v[1] * s[1] > 0.0);
    }
    if signs.iter().all(|&p| p) {
        return Ok(SignVerdict::ConstantPositive);
    }
    if signs.iter().all(|&p| !p) {
        return Ok(SignVerdict::ConstantNegative);
    }
    let times = (1..signs.len()).filter(|&k| signs[k] != signs[k - 1]).map(|k| u.times[k]).collect();
    Ok(SignVerdict::SignChange(times))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn signal(samples: Vec<Vec<f64>>) -> ControlSignal {
        let n = samples.len();
        ControlSignal::new((0..n).map(|k| k as f64 / n as f64).collect(), samples).unwrap()
    }

    #[test]
    fn verdicts() {
        let v = [0.6, 0.8];
        let pos = signal(vec![vec![0.6, 0.8]; 4]);
        assert_eq!(constant_sign_check(&pos, v, 1e-9).unwrap(), SignVerdict::ConstantPositive);
        let neg = signal(vec![vec![-0.6, -0.8]; 4]);
        assert_eq!(constant_sign_check(&neg, v, 1e-9).unwrap(), SignVerdict::ConstantNegative);
        let mixed = signal(vec![vec![0.6, 0.8], vec![0.6, 0.8], vec![-0.6, -0.8], vec![-0.6, -0.8]]);
        assert_eq!(constant_sign_check(&mixed, v, 1e-9).unwrap(), SignVerdict::SignChange(vec![0.5]));
    }

    #[test]
    fn non_parallel_node_is_named() {
        let u = signal(vec![vec![0.6, 0.8], vec![1.0, 0.0]]);
        assert!(matches!(constant_sign_check(&u, [0.6, 0.8], 1e-6), Err(Error::NotParallel { node: 1, .. })));
    }
}
