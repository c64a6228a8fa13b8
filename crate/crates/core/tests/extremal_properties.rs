use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rank2sr_core::extremals::{
    abnormal_feedback_flow, aim_along_eigenline, classify_zero, limit_control_direction, sample_abnormal_covector, shoot_to_zero,
    FeedbackOptions, Termination, ZeroClass,
};
use rank2sr_core::linalg::saddle_eigen;
use rank2sr_core::structures::{free_nilpotent_frame, SRStructure};

#[test]
fn goh_functions_stay_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["martinet", "engel", "free3", "free4"] {
        let s = SRStructure::builtin(name).unwrap();
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..5 {
            let st = sample_abnormal_covector(&s, &vec![0.0; s.dim()], &mut rng, 1e-3).unwrap();
            let tr = abnormal_feedback_flow(&s, &st, 5.0, 1.0).unwrap();
            worst = (worst.0.max(tr.max_goh()), worst.1.max(tr.max_projection()), worst.2.max(tr.max_jacobi()));
        }
        println!("{name}: goh {:e}, projection {:e}, jacobi {:e}", worst.0, worst.1, worst.2);
        assert!(worst.0 <= 1e-8 && worst.1 <= 1e-8 && worst.2 <= 1e-10);
    }
}

#[test]
fn zeros_never_have_positive_determinant() {
    let f4 = free_nilpotent_frame(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut zeros, mut elliptic) = (0, 0);
    while zeros < 30 {
        let st = sample_abnormal_covector(&f4, &[0.0; 8], &mut rng, 1e-3).unwrap();
        let runs = match aim_along_eigenline(&f4, &st, 1.0) {
            Ok(aimed) => vec![st, aimed],
            Err(_) => {
                elliptic += 1;
                vec![st]
            }
        };
        for st in runs {
            let tr = abnormal_feedback_flow(&f4, &st, 5.0, 1.0).unwrap();
            let a0 = tr.trace.a[0];
            assert!(tr.trace.a.iter().all(|a| a.sub(&a0).norm() <= 1e-9));
            if tr.trace.termination == Termination::Zero {
                zeros += 1;
                let class = classify_zero(tr.trace.a.last().unwrap(), 1e-8);
                assert_ne!(class, ZeroClass::PositiveDetViolation);
            }
        }
    }
    println!("{zeros} zeros, {elliptic} samples without real eigenlines");
}

#[test]
fn limit_direction_is_the_attracting_eigenline() {
    let s = SRStructure::free4_perturbed();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut done = 0;
    let mut tried = 0;
    while done < 5 {
        tried += 1;
        assert!(tried < 200);
        let st = sample_abnormal_covector(&s, &[0.0; 8], &mut rng, 1e-3).unwrap();
        let a0 = rank2sr_core::extremals::Rank2Brackets::new(&s).unwrap().a(&st.x, &st.p);
        if a0.det() >= -0.15 {
            continue;
        }
        let shot = shoot_to_zero(&s, &st, 5.0, 1.0, &FeedbackOptions::default()).unwrap();
        let tr = &shot.trajectory.trace;
        let t1 = tr.zeros[0];
        let a1 = *tr.a.last().unwrap();
        if a1.det() >= -0.1 {
            continue;
        }
        assert!(a1.sub(&tr.a[0]).norm() > 1e-6, "A should vary");
        let lim = limit_control_direction(tr, t1).unwrap();
        let (lm, ..) = saddle_eigen(&a1.matrix()).unwrap();
        println!(
            "t1 {t1:.4}, det {:.4}, residual {:e}, eigenvalue {:.4} ({lm:.4}), runs {}",
            a1.det(),
            lim.residual,
            lim.eigenvalue,
            shot.runs
        );
        assert!(lim.residual <= 1e-3 && lim.eigenvalue < 0.0);
        done += 1;
    }
}
