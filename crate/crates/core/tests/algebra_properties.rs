use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rank2sr_core::structures::{
    blowup_control, dilate, free_nilpotent_frame, nilpotent_approximation, pushforward_rescaled, sup_distance_on_ball, ControlSignal,
    Dilation, SRStructure,
};
use rank2sr_core::vfield::flow_commutator;
use rank2sr_core::{evaluate, lie_bracket, BracketWord, Poly, PolyVecField};

fn poly_strategy(dim: usize) -> impl Strategy<Value = Poly> {
    let term = (-4i64..=4, 1i64..=3, prop::collection::vec(0..dim, 0..=3));
    prop::collection::vec(term, 0..=4).prop_map(move |terms| {
        let mut p = Poly::zero(dim);
        for (num, den, vars) in terms {
            let mut e = vec![0u32; dim];
            for v in vars {
                e[v] += 1;
            }
            p = p.add(&Poly::monomial(BigRational::new(BigInt::from(num), BigInt::from(den)), e));
        }
        p
    })
}

fn field_strategy(dim: usize) -> impl Strategy<Value = PolyVecField> {
    prop::collection::vec(poly_strategy(dim), dim).prop_map(|c| PolyVecField::new(c).unwrap())
}

fn triple() -> impl Strategy<Value = (PolyVecField, PolyVecField, PolyVecField)> {
    (1usize..=5).prop_flat_map(|d| (field_strategy(d), field_strategy(d), field_strategy(d)))
}

fn pair_and_point() -> impl Strategy<Value = (PolyVecField, PolyVecField, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|d| (field_strategy(d), field_strategy(d), prop::collection::vec(-1.0f64..1.0, d)))
}

proptest! {
    #[test]
    fn bracket_is_antisymmetric((x, y, _) in triple()) {
        let xy = lie_bracket(&x, &y).unwrap();
        let yx = lie_bracket(&y, &x).unwrap();
        prop_assert!(xy.add(&yx).unwrap().is_zero());
        prop_assert!(lie_bracket(&x, &x).unwrap().is_zero());
    }

    #[test]
    fn jacobi_identity_holds_exactly((x, y, z) in triple()) {
        let a = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap();
        let b = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap();
        let c = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn flow_commutator_matches_bracket((x, y, q) in pair_and_point()) {
        let b = evaluate(&lie_bracket(&x, &y).unwrap(), &q).unwrap();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(bn > 0.1);
        let c = flow_commutator(&x.compile(), &y.compile(), &q, 1e-6, 4).unwrap();
        let err = c.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / bn;
        prop_assert!(err <= 1e-4, "relative error {err:e}");
    }
}

#[test]
fn nilpotent_approximation_is_idempotent() {
    for name in SRStructure::BUILTIN_NAMES {
        let s = SRStructure::builtin(name).unwrap();
        let n = nilpotent_approximation(&s).unwrap();
        let nn = nilpotent_approximation(&n).unwrap();
        assert_eq!(n.frame(), nn.frame(), "{name}");
        assert_eq!(pushforward_rescaled(&n, 0.375).unwrap().frame(), n.frame(), "{name}");
    }
}

#[test]
fn nonhomogeneous_families_converge_at_first_order() {
    for (s, limit) in [(SRStructure::martinet_cubic(), SRStructure::martinet()), (SRStructure::engel_perturbed(), SRStructure::engel())] {
        let n = nilpotent_approximation(&s).unwrap();
        assert_eq!(n.frame(), limit.frame());
        let d: Vec<f64> =
            [0.1, 0.05, 0.025].iter().map(|&e| sup_distance_on_ball(&pushforward_rescaled(&s, e).unwrap(), &n, 21).unwrap()).collect();
        for w in d.windows(2) {
            let order = (w[0] / w[1]).log2();
            println!("{}: distances {d:?}, order {order:.4}", s.name);
            assert!((order - 1.0).abs() <= 0.3);
        }
    }
}

#[test]
fn free_frames_have_vanishing_long_brackets() {
    for step in 2..=4u32 {
        let s = free_nilpotent_frame(step).unwrap();
        for w in BracketWord::all_of_length(2, step as usize + 1) {
            assert!(s.bracket(&w).unwrap().is_zero(), "step {step} word {w}");
        }
    }
}

proptest! {
    #[test]
    fn dilations_compose(weights in prop::collection::vec(1u32..=4, 1..=8), a in 0.1f64..3.0, b in 0.1f64..3.0, seed in prop::collection::vec(-2.0f64..2.0, 8)) {
        let z = &seed[..weights.len()];
        let da = Dilation { weights: weights.clone(), nu: a };
        let db = Dilation { weights: weights.clone(), nu: b };
        let dab = Dilation { weights: weights.clone(), nu: a * b };
        let lhs = dilate(&da, &dilate(&db, z).unwrap()).unwrap();
        let rhs = dilate(&dab, z).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }

    #[test]
    fn rescaling_is_a_group_action(k in 1i32..6, l in 1i32..6, name in prop::sample::select(SRStructure::BUILTIN_NAMES.to_vec())) {
        let s = SRStructure::builtin(name).unwrap();
        let (a, b) = (0.5f64.powi(k), 0.5f64.powi(l));
        let two = pushforward_rescaled(&pushforward_rescaled(&s, a).unwrap(), b).unwrap();
        let one = pushforward_rescaled(&s, a * b).unwrap();
        prop_assert_eq!(two.frame(), one.frame());
    }

    #[test]
    fn blowup_keeps_the_range_of_the_control_norm(
        angles in prop::collection::vec(-3.2f64..3.2, 1..20),
        scales in prop::collection::vec(0.5f64..2.0, 20),
        a in 0.0f64..1.0,
        len in 0.01f64..1.0,
    ) {
        let n = angles.len();
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64 * 2.0).collect();
        let mut samples: Vec<Vec<f64>> = angles.iter().zip(&scales).map(|(t, r)| vec![r * t.cos(), r * t.sin()]).collect();
        samples.push(samples[n - 1].clone());
        let u = ControlSignal::new(times, samples.clone()).unwrap();
        let b = (a + len).min(u.horizon());
        let v = blowup_control(&u, a, b).unwrap();
        prop_assert_eq!(v.times[0], 0.0);
        prop_assert_eq!(v.horizon(), 1.0);
        for s in &v.samples {
            prop_assert!(samples.contains(s));
        }
        let norm = |s: &Vec<f64>| s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (lo, hi) = samples.iter().map(norm).fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(x), h.max(x)));
        for s in &v.samples {
            prop_assert!(norm(s) >= lo && norm(s) <= hi);
        }
    }
}
