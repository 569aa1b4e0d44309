use frfkit_core::baselines::separate_se_fit;
use frfkit_core::bench::f_rat;
use frfkit_core::interpolate::{fit_kernel, predict_widely_linear, validate_training};
use frfkit_core::{
    Complex64, ComplexSample, KernelPair, KernelParams, LaplacePoint, Pseudo, TrainingSet,
};
use proptest::prelude::*;

/// Distinct positive frequencies with spacing at least 0.1.
fn omegas(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..0.4f64, 1..=max_n).prop_map(|steps| {
        let mut w = 0.0;
        steps
            .iter()
            .map(|d| {
                w += d;
                w
            })
            .collect()
    })
}

fn values(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| Complex64::new(a, b)),
        n,
    )
}

fn instance(max_n: usize) -> impl Strategy<Value = (Vec<ComplexSample>, f64)> {
    omegas(max_n)
        .prop_flat_map(|w| {
            let n = w.len();
            // α up to the spacing keeps the systems well conditioned.
            (Just(w), values(n), 0.02..0.1f64)
        })
        .prop_map(|(w, y, alpha)| {
            (
                w.into_iter()
                    .zip(y)
                    .map(|(w, y)| ComplexSample::new(w, y))
                    .collect(),
                alpha,
            )
        })
}

fn pseudo() -> impl Strategy<Value = Pseudo> {
    prop_oneof![Just(Pseudo::Symmetric), Just(Pseudo::Circular)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn augmented_solve_matches_widely_linear_formula(
        (samples, alpha) in instance(6),
        pseudo in pseudo(),
        probe in (-0.5..2.5f64, 0.0..0.5f64),
    ) {
        let ts = TrainingSet::new(samples.clone()).unwrap();
        let pair = KernelPair::szego(pseudo, KernelParams::new(alpha, 1.0).unwrap());
        // All ω > 0, so no augmented row is dropped in either mode.
        let vt = validate_training(ts, false).unwrap();
        let model = fit_kernel(&vt, pair).unwrap();
        let s = LaplacePoint::new(Complex64::new(probe.1, probe.0));
        let a = model.predict(s).unwrap();
        let b = predict_widely_linear(&samples, &pair, s).unwrap();
        let scale = samples.iter().map(|x| x.y.norm()).fold(1.0, f64::max);
        prop_assert!((a - b).norm() <= 1e-8 * scale.max(b.norm()), "{a} vs {b}");
    }

    #[test]
    fn symmetric_models_are_hermitian(
        (samples, alpha) in instance(8),
        w in prop::collection::vec(-3.0..3.0f64, 20),
    ) {
        let ts = TrainingSet::new(samples).unwrap();
        let pair = KernelPair::szego(Pseudo::Symmetric, KernelParams::new(alpha, 1.0).unwrap());
        let model = fit_kernel(&validate_training(ts, true).unwrap(), pair).unwrap();
        for w in w {
            let g = model.predict_omega(w).unwrap();
            let h = model.predict_omega(-w).unwrap();
            prop_assert!((h - g.conj()).norm() <= 1e-12 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn interpolant_norm_grows_with_data(
        (samples, alpha) in instance(7),
        pseudo in pseudo(),
    ) {
        let pair = KernelPair::szego(pseudo, KernelParams::new(alpha, 1.0).unwrap());
        let mut last = 0.0;
        for m in 1..=samples.len() {
            let ts = TrainingSet::new(samples[..m].to_vec()).unwrap();
            let model = fit_kernel(&validate_training(ts, false).unwrap(), pair).unwrap();
            if model.is_ill_conditioned() {
                break;
            }
            let norm = model.rkhs_norm().unwrap();
            prop_assert!(norm >= last * (1.0 - 1e-8), "{norm} < {last} at m = {m}");
            last = norm;
        }
    }
}

#[test]
fn separate_se_equals_its_complex_kernel_form() {
    let w: Vec<f64> = (0..8).map(|j| j as f64 / 7.0).collect();
    let ts = TrainingSet::from_fn(&w, f_rat).unwrap();
    let direct = separate_se_fit(&ts, 3).unwrap();
    let augmented =
        fit_kernel(&validate_training(ts, false).unwrap(), direct.kernel_pair()).unwrap();
    for j in 0..=50 {
        let w = j as f64 / 50.0;
        let a = direct.predict_omega(w);
        let b = augmented.predict_omega(w).unwrap();
        assert!(
            (a - b).norm() <= 1e-6 * (1.0 + a.norm()),
            "ω = {w}: {a} vs {b}"
        );
    }
}

#[test]
fn training_points_are_reproduced() {
    let w: Vec<f64> = (0..15).map(|j| j as f64 / 14.0).collect();
    for pseudo in [Pseudo::Symmetric, Pseudo::Circular] {
        let ts = TrainingSet::from_fn(&w, f_rat).unwrap();
        let pair = KernelPair::szego(pseudo, KernelParams::new(0.1, 1.0).unwrap());
        let model = fit_kernel(
            &validate_training(ts, pseudo == Pseudo::Symmetric).unwrap(),
            pair,
        )
        .unwrap();
        assert!(model.condition() < 1e10);
        assert!(model.training_residual().unwrap() <= 1e-8);
    }
}
