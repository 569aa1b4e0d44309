//! Benchmark functions, the RMSE metric and convergence studies.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{aaa_fit, chebyshev_fit, separate_se_fit, AAA_TOL};
use crate::hybrid::{fit_hybrid, fit_kernel_tuned, HybridConfig};
use crate::interpolate::TrainingSet;
use crate::kernels::{KernelKind, LaplacePoint, Pseudo};

/// Angular frequency range of the circuit studies, rad/s.
pub const CIRCUIT_OMEGA_MIN: f64 = 1e4;
pub const CIRCUIT_OMEGA_MAX: f64 = 2.5e4;
/// Points of the evaluation grid.
pub const GRID_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("evaluation at a pole of branch {branch}")]
    EvaluationAtPole { branch: usize },
    #[error("branch {0} is not underdamped")]
    NotUnderdamped(usize),
}

fn rat(omega: f64, beta: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let p1 = Complex64::new(-beta, 0.0);
    let p2 = Complex64::new(-beta, -0.5);
    let p3 = Complex64::new(-beta, 0.5);
    (s - p1).inv() + 0.5 / (s - p2) + 0.5 / (s - p3)
}

/// Third-order rational test function with poles `−0.1`, `−0.1 ± 0.5i`.
pub fn f_rat(omega: f64) -> Complex64 {
    rat(omega, 0.1)
}

/// [`f_rat`] with all pole real parts moved to `−β`.
pub fn f_rat_beta(omega: f64, beta: f64) -> Result<Complex64, BenchError> {
    if !(beta > 0.0) {
        return Err(BenchError::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(rat(omega, beta))
}

/// A series RLC branch, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub r: f64,
    pub l: f64,
    pub c: f64,
}

impl Branch {
    pub fn is_underdamped(&self) -> bool {
        0.5 * self.r * (self.c / self.l).sqrt() < 1.0
    }
}

/// Parallel connection of series RLC branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub branches: Vec<Branch>,
}

impl CircuitSpec {
    pub fn new(branches: Vec<Branch>) -> Result<Self, BenchError> {
        if let Some(i) = branches
            .iter()
            .position(|b| !(b.r > 0.0 && b.l > 0.0 && b.c > 0.0))
        {
            return Err(BenchError::InvalidInput(format!(
                "branch {i}: R, L and C must be positive"
            )));
        }
        Ok(Self { branches })
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn admittance(&self, s: LaplacePoint) -> Result<Complex64, BenchError> {
        circuit_admittance(self, s)
    }

    /// `Y(iω)`; for use as a reference function.
    pub fn admittance_omega(&self, omega: f64) -> Complex64 {
        circuit_admittance(self, LaplacePoint::on_axis(omega))
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }
}

/// `Y(s) = Σ s/(s²L + sR + 1/C)`.
pub fn circuit_admittance(spec: &CircuitSpec, s: LaplacePoint) -> Result<Complex64, BenchError> {
    let s = s.value();
    let mut y = Complex64::new(0.0, 0.0);
    for (i, b) in spec.branches.iter().enumerate() {
        let den = s * s * b.l + s * b.r + 1.0 / b.c;
        if den.norm() < 1e-300 {
            return Err(BenchError::EvaluationAtPole { branch: i });
        }
        y += s / den;
    }
    Ok(y)
}

/// Poles `a_i` (upper half-plane member) and residues `c_i`, so that
/// `Y(s) = Σ c_i/(s − a_i) + c_i*/(s − a_i*)`.
pub fn circuit_partial_fractions(
    spec: &CircuitSpec,
) -> Result<Vec<(Complex64, Complex64)>, BenchError> {
    spec.branches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if !b.is_underdamped() {
                return Err(BenchError::NotUnderdamped(i));
            }
            let d = b.r / (2.0 * b.l);
            let a = Complex64::new(-d, (1.0 / (b.l * b.c) - d * d).sqrt());
            let c = a / ((a - a.conj()) * b.l);
            Ok((a, c))
        })
        .collect()
}

pub fn partial_fraction_sum(terms: &[(Complex64, Complex64)], s: LaplacePoint) -> Complex64 {
    let s = s.value();
    terms
        .iter()
        .map(|(a, c)| c / (s - a) + c.conj() / (s - a.conj()))
        .sum()
}

/// The two lightly damped branches of the dominant-pole variant
/// (resonances near 14142 and 22361 rad/s).
pub fn dominant_branches() -> [Branch; 2] {
    [
        Branch {
            r: 0.1,
            l: 1e-3,
            c: 5e-6,
        },
        Branch {
            r: 0.1,
            l: 1e-3,
            c: 2e-6,
        },
    ]
}

/// `N` random branches with `C ~ U(1, 20) µF`, `L ~ U(0.1, 2) mH` and
/// `R = L/mH·(1 + Δ) Ω`, `Δ ~ U(−0.2, 0.2)`, drawn from ChaCha8 seeded by
/// `seed`; optionally followed by [`dominant_branches`].
pub fn sample_random_circuit(n: usize, seed: u64, with_dominant: bool) -> CircuitSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut branches: Vec<Branch> = (0..n)
        .map(|_| {
            let c_uf = rng.random_range(1.0..20.0);
            let l_mh = rng.random_range(0.1..2.0);
            let delta = rng.random_range(-0.2..0.2);
            Branch {
                r: l_mh * (1.0 + delta),
                l: l_mh * 1e-3,
                c: c_uf * 1e-6,
            }
        })
        .collect();
    if with_dominant {
        branches.extend(dominant_branches());
    }
    CircuitSpec { branches }
}

/// Equidistant evaluation grid including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(omega_min: f64, omega_max: f64, count: usize) -> Result<Self, BenchError> {
        if count < 2 || !(omega_max > omega_min) || !omega_min.is_finite() || !omega_max.is_finite()
        {
            return Err(BenchError::InvalidInput(format!(
                "bad grid {omega_min}:{omega_max}:{count}"
            )));
        }
        Ok(Self {
            omega_min,
            omega_max,
            count,
        })
    }

    /// The standard 201-point grid.
    pub fn standard(omega_min: f64, omega_max: f64) -> Result<Self, BenchError> {
        Self::new(omega_min, omega_max, GRID_POINTS)
    }

    pub fn points(&self) -> Vec<f64> {
        equidistant(self.omega_min, self.omega_max, self.count)
    }
}

/// `n` equidistant points on `[a, b]`, endpoints exact.
pub fn equidistant(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            let mut x: Vec<f64> = (0..n).map(|j| a + j as f64 * h).collect();
            x[n - 1] = b;
            x
        }
    }
}

/// `sqrt((1/M) Σ |pred(ω_j) − ref(ω_j)|²)` over the grid.
pub fn rmse(
    predictor: impl Fn(f64) -> Complex64,
    reference: impl Fn(f64) -> Complex64,
    grid: &Grid,
) -> f64 {
    let pts = grid.points();
    let s: f64 = pts
        .iter()
        .map(|&w| (predictor(w) - reference(w)).norm_sqr())
        .sum();
    (s / pts.len() as f64).sqrt()
}

/// Approximants compared in convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Tuned Szegö kernel interpolation.
    Szego {
        pseudo: Pseudo,
    },
    /// Szegö kernel with selected rational mean.
    SzegoRat {
        pseudo: Pseudo,
    },
    Aaa,
    SeSeparate,
    Chebyshev,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Szego {
                pseudo: Pseudo::Symmetric,
            } => "szego",
            Method::Szego {
                pseudo: Pseudo::Circular,
            } => "szego-circular",
            Method::SzegoRat { .. } => "szego-rat",
            Method::Aaa => "aaa",
            Method::SeSeparate => "se-separate",
            Method::Chebyshev => "chebyshev",
        }
    }

    fn min_n(&self) -> usize {
        match self {
            Method::Aaa => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `None` when the fit failed.
    pub rmse: Option<f64>,
    pub note: Option<String>,
}

/// Where the training data of a study come from.
pub enum Target<'a> {
    /// An analytic function, sampled at `n` equidistant points of the grid's
    /// range.
    Function(&'a (dyn Fn(f64) -> Complex64 + Sync)),
    /// Tabulated data: training rows are picked at equidistant indices and
    /// the error is measured over all rows.
    Table(&'a TrainingSet),
}

/// Fits `method` to `ts` and returns the predictor. `oracle` is needed only
/// by methods that choose their own nodes.
pub fn fit_method(
    method: Method,
    ts: &TrainingSet,
    oracle: Option<&(dyn Fn(f64) -> Complex64 + Sync)>,
    seed: u64,
) -> Result<Box<dyn Fn(f64) -> Complex64 + Send + Sync>, String> {
    let nan = Complex64::new(f64::NAN, f64::NAN);
    match method {
        Method::Szego { pseudo } => {
            let cfg = HybridConfig {
                kernel: KernelKind::Szego,
                pseudo,
                seed,
                ..Default::default()
            };
            let (model, _) = fit_kernel_tuned(ts, &cfg).map_err(|e| e.to_string())?;
            Ok(Box::new(move |w| model.predict_omega(w).unwrap_or(nan)))
        }
        Method::SzegoRat { pseudo } => {
            let cfg = HybridConfig {
                kernel: KernelKind::Szego,
                pseudo,
                seed,
                ..Default::default()
            };
            let (model, _) = fit_hybrid(ts, &cfg).map_err(|e| e.to_string())?;
            Ok(Box::new(move |w| model.predict_omega(w).unwrap_or(nan)))
        }
        Method::Aaa => {
            let model = aaa_fit(ts, AAA_TOL, ts.len()).map_err(|e| e.to_string())?;
            Ok(Box::new(move |w| model.eval(w)))
        }
        Method::SeSeparate => {
            let model = separate_se_fit(ts, seed).map_err(|e| e.to_string())?;
            Ok(Box::new(move |w| model.predict_omega(w)))
        }
        Method::Chebyshev => {
            let f = oracle.ok_or("chebyshev needs an analytic target")?;
            let model = chebyshev_fit(f, ts.len(), ts.omega_min(), ts.omega_max())
                .map_err(|e| e.to_string())?;
            Ok(Box::new(move |w| model.eval(w)))
        }
    }
}

/// RMSE of `method` for each training-set size in `n_list`.
pub fn convergence_study(
    method: Method,
    target: Target<'_>,
    n_list: &[usize],
    grid: &Grid,
    seed: u64,
) -> Vec<ConvergenceRow> {
    n_list
        .par_iter()
        .map(|&n| {
            if n < method.min_n() {
                return ConvergenceRow {
                    n,
                    rmse: None,
                    note: Some(format!("{} needs n ≥ {}", method.name(), method.min_n())),
                };
            }
            let result = match &target {
                Target::Function(f) => {
                    let omegas = equidistant(grid.omega_min, grid.omega_max, n);
                    TrainingSet::from_fn(&omegas, f)
                        .map_err(|e| e.to_string())
                        .and_then(|ts| {
                            let model = fit_method(method, &ts, Some(*f), seed)?;
                            Ok(rmse(&model, f, grid))
                        })
                }
                Target::Table(table) => table_rmse(method, table, n, seed),
            };
            match result {
                Ok(r) if r.is_finite() => ConvergenceRow {
                    n,
                    rmse: Some(r),
                    note: None,
                },
                Ok(_) => ConvergenceRow {
                    n,
                    rmse: None,
                    note: Some("non-finite prediction".into()),
                },
                Err(e) => ConvergenceRow {
                    n,
                    rmse: None,
                    note: Some(e),
                },
            }
        })
        .collect()
}

fn table_rmse(method: Method, table: &TrainingSet, n: usize, seed: u64) -> Result<f64, String> {
    let all = table.samples();
    if n > all.len() {
        return Err(format!("table has only {} rows", all.len()));
    }
    let idx: Vec<usize> = if n == 1 {
        vec![0]
    } else {
        (0..n)
            .map(|j| ((j * (all.len() - 1)) as f64 / (n - 1) as f64).round() as usize)
            .collect()
    };
    let ts = TrainingSet::new(idx.iter().map(|&i| all[i]).collect()).map_err(|e| e.to_string())?;
    let model = fit_method(method, &ts, None, seed)?;
    let s: f64 = all.iter().map(|s| (model(s.omega) - s.y).norm_sqr()).sum();
    Ok((s / all.len() as f64).sqrt())
}

/// Median RMSE over random circuits with seeds `seed, seed + 1, …`; the
/// training and grid seeds of each realization match its circuit seed.
/// Long-running: every realization is a full convergence study.
pub fn circuit_median_study(
    method: Method,
    branches: usize,
    dominant: bool,
    seed: u64,
    realizations: usize,
    n_list: &[usize],
    grid: &Grid,
) -> Vec<ConvergenceRow> {
    let runs: Vec<Vec<ConvergenceRow>> = (0..realizations as u64)
        .map(|r| {
            let spec = sample_random_circuit(branches, seed + r, dominant);
            let f = |w: f64| spec.admittance_omega(w);
            convergence_study(method, Target::Function(&f), n_list, grid, seed + r)
        })
        .collect();
    n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mut ok: Vec<f64> = runs.iter().filter_map(|run| run[j].rmse).collect();
            let failed = realizations - ok.len();
            let note =
                (failed > 0).then(|| format!("{failed} of {realizations} realizations failed"));
            if ok.is_empty() {
                return ConvergenceRow {
                    n,
                    rmse: None,
                    note,
                };
            }
            ok.sort_by(f64::total_cmp);
            let m = ok.len();
            let median = if m % 2 == 1 {
                ok[m / 2]
            } else {
                0.5 * (ok[m / 2 - 1] + ok[m / 2])
            };
            ConvergenceRow {
                n,
                rmse: Some(median),
                note,
            }
        })
        .collect()
}
