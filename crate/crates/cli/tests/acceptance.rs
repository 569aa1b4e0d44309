//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the verdicts always reach the terminal; exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use frfkit_cli::model_file::ModelFile;
use frfkit_core::baselines::separate_se_fit;
use frfkit_core::bench::{
    circuit_admittance, circuit_partial_fractions, convergence_study, f_rat, f_rat_beta,
    partial_fraction_sum, sample_random_circuit, ConvergenceRow, Method, Target, CIRCUIT_OMEGA_MAX,
    CIRCUIT_OMEGA_MIN,
};
use frfkit_core::hybrid::{
    fit_hybrid, fit_kernel_tuned, init_poles, instability_grid_size, kmax_rule,
    lognormal_prior_logpdf, Bounds, LAMBDA_FACTOR, MAX_POLES, N_STARTS, REL_LOWER, SIGMA_ALPHA,
    THETA1_BOUND,
};
use frfkit_core::interpolate::{fit_kernel, predict_widely_linear, validate_training};
use frfkit_core::{
    Complex64, ComplexSample, FittedModel, Grid, HybridConfig, KernelKind, KernelPair,
    KernelParams, LaplacePoint, Pseudo, TrainingSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rmse_at(rows: &[ConvergenceRow], n: usize) -> f64 {
    rows.iter()
        .find(|r| r.n == n)
        .and_then(|r| r.rmse)
        .unwrap_or(f64::NAN)
}

fn frat_set(n: usize) -> TrainingSet {
    TrainingSet::from_fn(&frfkit_core::bench::equidistant(0.0, 1.0, n), f_rat).unwrap()
}

fn unit_grid() -> Grid {
    Grid::standard(0.0, 1.0).unwrap()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn pseudo_kernel_benefit() -> Verdict {
    let t = Instant::now();
    let ns = [5, 10, 15, 20, 25, 30];
    let study = |pseudo| {
        convergence_study(
            Method::Szego { pseudo },
            Target::Function(&f_rat),
            &ns,
            &unit_grid(),
            0,
        )
    };
    let sym = study(Pseudo::Symmetric);
    let circ = study(Pseudo::Circular);
    let elapsed = t.elapsed();
    let ratio = rmse_at(&circ, 20) / rmse_at(&sym, 20);
    let decays = |rows: &[ConvergenceRow]| rmse_at(rows, 30) <= rmse_at(rows, 5) / 100.0;
    verdict(
        ratio >= 10.0 && decays(&sym) && decays(&circ) && within(elapsed, 120),
        format!(
            "n=20 RMSE circular/symmetric = {ratio:.2} (need ≥ 10); final/initial sym {:.1e}, circ {:.1e}; {elapsed:.1?}",
            rmse_at(&sym, 30) / rmse_at(&sym, 5),
            rmse_at(&circ, 30) / rmse_at(&circ, 5),
        ),
    )
}

fn interpolation_exactness() -> Verdict {
    let mut models: Vec<FittedModel> = Vec::new();
    for n in [5, 10, 15, 20, 25, 30] {
        for (kernel, pseudo) in [
            (KernelKind::Szego, Pseudo::Symmetric),
            (KernelKind::Szego, Pseudo::Circular),
            (KernelKind::StableSpline, Pseudo::Symmetric),
            (KernelKind::StableSpline, Pseudo::Circular),
        ] {
            let cfg = HybridConfig {
                kernel,
                pseudo,
                ..Default::default()
            };
            models.push(fit_kernel_tuned(&frat_set(n), &cfg).unwrap().0);
        }
    }
    models.push(
        fit_hybrid(&frat_set(12), &HybridConfig::default())
            .unwrap()
            .0,
    );
    let checked: Vec<f64> = models
        .iter()
        .filter(|m| m.condition() < 1e10)
        .map(|m| m.training_residual().unwrap())
        .collect();
    let worst = checked.iter().copied().fold(0.0, f64::max);
    verdict(
        !checked.is_empty() && worst <= 1e-8,
        format!(
            "{} of {} models with condition < 1e10, worst relative residual {worst:.2e}",
            checked.len(),
            models.len()
        ),
    )
}

fn symmetry_enforcement() -> Verdict {
    let (model, _) = fit_kernel_tuned(&frat_set(20), &HybridConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let worst = (0..100)
        .map(|_| {
            let w = rng.random_range(-3.0..3.0);
            let g = model.predict_omega(w).unwrap();
            let h = model.predict_omega(-w).unwrap();
            (h - g.conj()).norm() / (1.0 + g.norm())
        })
        .fold(0.0, f64::max);
    verdict(
        worst <= 1e-12,
        format!("max |g(−iω) − conj g(iω)|/(1+|g|) = {worst:.2e} over 100 ω"),
    )
}

fn widely_linear_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.random_range(1..=6);
        let mut w = 0.0;
        let samples: Vec<ComplexSample> = (0..n)
            .map(|_| {
                w += rng.random_range(0.1..0.4);
                ComplexSample::new(
                    w,
                    Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                )
            })
            .collect();
        let alpha = rng.random_range(0.02..0.1);
        let pseudo = if case % 2 == 0 {
            Pseudo::Symmetric
        } else {
            Pseudo::Circular
        };
        let pair = KernelPair::szego(pseudo, KernelParams::new(alpha, 1.0).unwrap());
        let vt = validate_training(TrainingSet::new(samples.clone()).unwrap(), false).unwrap();
        let model = fit_kernel(&vt, pair).unwrap();
        let s = LaplacePoint::new(Complex64::new(
            rng.random_range(0.0..0.5),
            rng.random_range(-0.5..2.5),
        ));
        let a = model.predict(s).unwrap();
        let b = predict_widely_linear(&samples, &pair, s).unwrap();
        let scale = samples.iter().map(|x| x.y.norm()).fold(b.norm(), f64::max);
        worst = worst.max((a - b).norm() / scale);
    }
    verdict(
        worst <= 1e-8,
        format!("max relative deviation {worst:.2e} over 50 instances"),
    )
}

fn aaa_machine_accuracy() -> Verdict {
    let ns: Vec<usize> = (9..=40).collect();
    let rows = convergence_study(Method::Aaa, Target::Function(&f_rat), &ns, &unit_grid(), 0);
    let worst = rows
        .iter()
        .map(|r| r.rmse.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    verdict(
        worst <= 1e-10,
        format!("max RMSE over n = 9..40 is {worst:.2e}"),
    )
}

fn circuit_partial_fractions_match() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let spec = sample_random_circuit(1000, seed, false);
        let terms = circuit_partial_fractions(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..100 {
            let s = LaplacePoint::on_axis(rng.random_range(CIRCUIT_OMEGA_MIN..CIRCUIT_OMEGA_MAX));
            let direct = circuit_admittance(&spec, s).unwrap();
            worst = worst.max((partial_fraction_sum(&terms, s) - direct).norm() / direct.norm());
        }
    }
    let elapsed = t.elapsed();
    verdict(
        worst <= 1e-10 && within(elapsed, 60),
        format!("max relative deviation {worst:.2e} over 10 circuits × 100 ω; {elapsed:.1?}"),
    )
}

fn hybrid_beats_kernel_on_dominant_poles() -> Verdict {
    let t = Instant::now();
    let spec = sample_random_circuit(1000, 42, true);
    let f = |w: f64| spec.admittance_omega(w);
    let grid = Grid::standard(CIRCUIT_OMEGA_MIN, CIRCUIT_OMEGA_MAX).unwrap();
    let ns = [40, 45, 50];
    let pseudo = Pseudo::Symmetric;
    let kernel = convergence_study(
        Method::Szego { pseudo },
        Target::Function(&f),
        &ns,
        &grid,
        0,
    );
    let hybrid = convergence_study(
        Method::SzegoRat { pseudo },
        Target::Function(&f),
        &ns,
        &grid,
        0,
    );
    let elapsed = t.elapsed();
    let ratios: Vec<f64> = ns
        .iter()
        .map(|&n| rmse_at(&hybrid, n) / rmse_at(&kernel, n))
        .collect();
    let pass = ratios[2] <= 1.0 && ratios.iter().any(|&r| r <= 0.5) && within(elapsed, 600);
    verdict(
        pass,
        format!(
            "Sz.-Rat/Szegö RMSE at n = 40, 45, 50: {:.3}, {:.3}, {:.3} (n=50 Sz.-Rat {:.3e}); {elapsed:.1?}",
            ratios[0],
            ratios[1],
            ratios[2],
            rmse_at(&hybrid, 50)
        ),
    )
}

fn alpha_estimation() -> Verdict {
    let t = Instant::now();
    let mut pass = true;
    let mut found = Vec::new();
    for beta in [0.05, 0.1, 0.15, 0.2, 0.25] {
        let ts = TrainingSet::from_fn(&frfkit_core::bench::equidistant(0.0, 1.0, 20), |w| {
            f_rat_beta(w, beta).unwrap()
        })
        .unwrap();
        let (_, hp) = fit_kernel_tuned(&ts, &HybridConfig::default()).unwrap();
        let alpha = hp.alpha();
        pass &= (beta / 2.0..=beta * 2.0).contains(&alpha);
        found.push(format!("β={beta}: α={alpha:.4}"));
    }
    let elapsed = t.elapsed();
    verdict(
        pass && within(elapsed, 300),
        format!("{}; {elapsed:.1?}", found.join(", ")),
    )
}

fn selection_constants() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    check(MAX_POLES == 5, "K_max cap");
    check(
        [(3, 0), (4, 1), (12, 3), (19, 4), (20, 5), (50, 5)]
            .iter()
            .all(|&(n, k)| kmax_rule(n) == k),
        "K_max = min(5, ⌊n/4⌋)",
    );
    check(
        [1, 12, 50]
            .iter()
            .all(|&n| instability_grid_size(n) == 10 * n + 1),
        "M = 10n + 1",
    );
    check(LAMBDA_FACTOR == 0.2, "λ factor");
    check(SIGMA_ALPHA == 3.0, "σ_α");
    check(
        N_STARTS == 20 && HybridConfig::default().n_starts == 20,
        "multistart count",
    );
    // The prior mode e^{μ−σ²} sits at |Ω| exactly when μ = σ² + ln|Ω|.
    let span = 1.5e4;
    let at = |a: f64| lognormal_prior_logpdf(a, span).unwrap();
    check(
        at(span) > at(span * (1.0 - 1e-4)) && at(span) > at(span * (1.0 + 1e-4)),
        "μ_α = σ_α² + ln|Ω|",
    );
    let b = Bounds::new(1.5e4, 1e4, 2.5e4);
    check(
        THETA1_BOUND == 15.0 && REL_LOWER == 1e-6 && b.theta1 == (-15.0, 15.0),
        "θ₁ bounds",
    );
    check(b.alpha == (1e-6 * 1.5e4, 1.5e4), "α bounds");
    check(b.pole_re == (-1.5e4, -1e-6 * 1.5e4), "Re(p) bounds");
    check(b.pole_im == (1e4 - 5e3, 2.5e4 + 5e3), "Im(p) bounds");
    let low = Bounds::new(1.0, 0.0, 1.0);
    check(low.pole_im.0 == 1e-6, "Im(p) lower floor");
    let p = init_poles(2, 0.0, 1.0, 2);
    check(
        p.len() == 2 && (p[0].re, p[0].im, p[1].im) == (-1e-3, 0.25, 0.75),
        "initial poles",
    );
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "all constants and bounds match".to_string()
        } else {
            format!("mismatch: {}", failures.join(", "))
        },
    )
}

fn run_binary(args: &[&str]) -> (Vec<u8>, bool) {
    let out = Command::new(env!("CARGO_BIN_EXE_frfkit"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.stdout, out.status.success())
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let csv = path("frat.csv");
    let (_, ok) = run_binary(&[
        "generate",
        "--samples",
        "frat",
        "--n",
        "12",
        "--range",
        "0:1",
        "--out",
        &csv,
    ]);
    if !ok {
        return verdict(false, "could not generate training data");
    }
    let fit = |out: &str| {
        let (stdout, ok) = run_binary(&[
            "fit",
            &csv,
            "--symmetric",
            "--hybrid",
            "--seed",
            "7",
            "--out",
            out,
        ]);
        (stdout, std::fs::read(out).ok(), ok)
    };
    let (a, b) = (fit(&path("a.json")), fit(&path("b.json")));
    let fit_same = a.2 && b.2 && a == b;
    let conv = || {
        run_binary(&[
            "convergence",
            "--method",
            "szego",
            "--target",
            "frat",
            "--n",
            "5..20:5",
            "--seed",
            "7",
        ])
    };
    let (c, d) = (conv(), conv());
    let conv_same = c.1 && d.1 && c == d;
    verdict(
        fit_same && conv_same,
        format!("fit identical: {fit_same}, convergence identical: {conv_same}"),
    )
}

fn round_trip() -> Verdict {
    let grid = unit_grid().points();
    let ts = frat_set(12);
    let mut classes = Vec::new();
    let mut failures = Vec::new();
    let mut check = |name: &str, file: ModelFile, direct: &dyn Fn(f64) -> Complex64| {
        classes.push(name.to_string());
        let loaded = ModelFile::from_json(&file.to_json()).and_then(|f| f.to_model());
        let same = loaded.is_ok_and(|m| {
            grid.iter().all(|&w| {
                let (a, b) = (direct(w), m.predict_omega(w).unwrap());
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            })
        });
        if !same {
            failures.push(name.to_string());
        }
    };
    for (name, kernel, pseudo) in [
        ("szego symmetric", KernelKind::Szego, Pseudo::Symmetric),
        ("szego circular", KernelKind::Szego, Pseudo::Circular),
        (
            "stable-spline symmetric",
            KernelKind::StableSpline,
            Pseudo::Symmetric,
        ),
        (
            "stable-spline circular",
            KernelKind::StableSpline,
            Pseudo::Circular,
        ),
    ] {
        let cfg = HybridConfig {
            kernel,
            pseudo,
            ..Default::default()
        };
        let (m, _) = fit_kernel_tuned(&ts, &cfg).unwrap();
        check(name, ModelFile::from_kernel_model(&m, 0, None), &|w| {
            m.predict_omega(w).unwrap()
        });
    }
    let (m, report) = fit_hybrid(&ts, &HybridConfig::default()).unwrap();
    check(
        "hybrid",
        ModelFile::from_kernel_model(&m, 0, Some(report)),
        &|w| m.predict_omega(w).unwrap(),
    );
    let se = separate_se_fit(&ts, 0).unwrap();
    check("se-separate", ModelFile::from_se_model(&se, &ts, 0), &|w| {
        se.predict_omega(w)
    });
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "bit-identical on {} points for {}",
                grid.len(),
                classes.join(", ")
            )
        } else {
            format!("differs for {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("pseudo-kernel benefit on F_rat", pseudo_kernel_benefit),
        ("interpolation exactness", interpolation_exactness),
        ("symmetry enforcement", symmetry_enforcement),
        (
            "widely-linear oracle equivalence",
            widely_linear_equivalence,
        ),
        ("AAA machine accuracy", aaa_machine_accuracy),
        (
            "circuit partial-fraction oracle",
            circuit_partial_fractions_match,
        ),
        (
            "hybrid beats pure kernel on dominant poles",
            hybrid_beats_kernel_on_dominant_poles,
        ),
        ("alpha estimation", alpha_estimation),
        ("model-selection constants", selection_constants),
        ("determinism", determinism),
        ("serialization round-trip", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        println!(
            "{} criterion {:>2} ({name}): {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
