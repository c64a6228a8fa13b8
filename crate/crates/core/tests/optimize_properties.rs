use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rank2sr_core::optimize::{
    constant_sign_check, corner_test, minimize_length, shoot, shoot_jacobian, shoot_jacobian_fd, DiscretizedControl, MinimizeOptions,
    SignVerdict,
};
use rank2sr_core::structures::SRStructure;

#[test]
fn perpendicular_corners_are_never_minimizing() {
    for name in ["heisenberg", "engel", "free4"] {
        let s = SRStructure::builtin(name).unwrap();
        let x0 = vec![0.0; s.dim()];
        let c = corner_test(&s, &x0, [1.0, 0.0], [0.0, 1.0], 0.5, 64, &MinimizeOptions::default()).unwrap();
        println!("{name}: corner margin {:.6} after {} outer iterations", c.margin, c.result.outer_iterations);
        assert!(c.margin >= 1e-3, "{name} margin {}", c.margin);
        assert!(c.result.endpoint_error <= 1e-6);
    }
}

#[test]
fn refinement_never_lengthens() {
    let s = SRStructure::heisenberg();
    let x0 = [0.0; 3];
    let target = shoot(&s, &x0, &DiscretizedControl::corner([1.0, 0.0], [0.0, 1.0], 8), 1.0).unwrap();
    let opt = MinimizeOptions::default();
    let mut init = DiscretizedControl::corner([1.0, 0.0], [0.0, 1.0], 8);
    let mut speed = 1.0;
    let mut prev = f64::INFINITY;
    for n in [8, 16, 32, 64] {
        let r = minimize_length(&s, &x0, &target, &init, speed, &opt).unwrap();
        assert!(r.converged);
        println!("N = {n}: length {:.12}", r.length);
        assert!(r.length <= prev + 1e-8, "N = {n}: {} > {prev}", r.length);
        prev = r.length;
        init = r.control.refine(2);
        speed = r.speed;
    }
}

#[test]
fn martinet_abnormal_segment_is_minimizing() {
    let s = SRStructure::martinet();
    let l = 0.2;
    let init = DiscretizedControl::new((0..16).map(|k| PI / 2.0 + 0.2 * ((k as f64) * 0.7).sin()).collect()).unwrap();
    let r = minimize_length(&s, &[0.0; 3], &[0.0, l, 0.0], &init, 1.2 * l, &MinimizeOptions::default()).unwrap();
    assert!(r.converged, "{r:?}");
    assert!((r.length - l).abs() < 1e-4, "{}", r.length);
    let v = if r.speed > 0.0 { [0.0, 1.0] } else { [0.0, -1.0] };
    assert_eq!(constant_sign_check(&r.control.to_signal(), v, 1e-2).unwrap(), SignVerdict::ConstantPositive);
}

#[test]
fn heisenberg_minimizer_has_constant_sign() {
    let s = SRStructure::heisenberg();
    let init = DiscretizedControl::constant(0.2, 16);
    let r = minimize_length(&s, &[0.0; 3], &[0.8, 0.0, 0.0], &init, 1.0, &MinimizeOptions::default()).unwrap();
    assert!(r.converged && (r.length - 0.8).abs() < 1e-4);
    let v = if r.speed > 0.0 { [1.0, 0.0] } else { [-1.0, 0.0] };
    assert_eq!(constant_sign_check(&r.control.to_signal(), v, 1e-3).unwrap(), SignVerdict::ConstantPositive);
}

#[test]
fn sensitivity_and_finite_difference_gradients_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for name in ["heisenberg", "martinet", "engel", "free4"] {
        let s = SRStructure::builtin(name).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let n = rng.random_range(2..12);
            let c = DiscretizedControl::new((0..n).map(|_| rng.random_range(-PI..PI)).collect()).unwrap();
            let x0: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = rng.random_range(0.1..2.0);
            let (_, j) = shoot_jacobian(&s, &x0, &c, v).unwrap();
            let jf = shoot_jacobian_fd(&s, &x0, &c, v, 1e-6).unwrap();
            worst = worst.max((&j - &jf).norm() / j.norm());
        }
        println!("{name}: worst relative gradient mismatch {worst:e}");
        assert!(worst < 1e-4);
    }
}
