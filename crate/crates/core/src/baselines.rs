//! Reference approximants: AAA rational interpolation, separate
//! real/imaginary squared-exponential interpolation, and polynomial
//! interpolation on Chebyshev points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpolate::{InterpolationError, TrainingSet};
use crate::kernels::{se_kernel, ComplexKernelPair, KernelError, LaplacePoint};
use crate::linalg::{PivotedCholesky, PsdSolver};
use crate::optimize::{minimize_box, OptOptions};

pub const AAA_TOL: f64 = 1e-13;
/// Multistart size of the squared-exponential baseline.
pub const SE_STARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("interpolation system is singular")]
    SingularSystem,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
}

/// Barycentric rational interpolant `r(ω) = Σ w_j f_j/(ω−ω_j) / Σ w_j/(ω−ω_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaaModel {
    pub support: Vec<f64>,
    pub values: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    /// Whether the residual reached the tolerance.
    pub converged: bool,
    /// Max residual over the training samples at termination.
    pub residual: f64,
}

impl AaaModel {
    pub fn m(&self) -> usize {
        self.support.len()
    }

    pub fn eval(&self, omega: f64) -> Complex64 {
        aaa_eval(self, omega)
    }
}

pub fn aaa_eval(model: &AaaModel, omega: f64) -> Complex64 {
    if let Some(j) = model.support.iter().position(|&z| z == omega) {
        return model.values[j];
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for ((&z, &f), &w) in model.support.iter().zip(&model.values).zip(&model.weights) {
        let t = w / (omega - z);
        num += t * f;
        den += t;
    }
    num / den
}

/// Greedy AAA: add the sample with the largest residual to the support, take
/// the weights from the smallest right singular vector of the Loewner
/// matrix, stop at `max residual ≤ tol·max|y|` or `m = m_max`.
pub fn aaa_fit(ts: &TrainingSet, tol: f64, m_max: usize) -> Result<AaaModel, BaselineError> {
    let n = ts.len();
    if m_max == 0 || m_max > n {
        return Err(BaselineError::InvalidInput(format!(
            "m_max must be in 1..={n}"
        )));
    }
    let z: Vec<f64> = ts.samples().iter().map(|s| s.omega).collect();
    let f: Vec<Complex64> = ts.samples().iter().map(|s| s.y).collect();
    let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mean = f.iter().sum::<Complex64>() / n as f64;
    let mut approx = vec![mean; n];
    let mut in_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<Complex64> = Vec::new();
    let mut residual = f64::INFINITY;

    while support.len() < m_max {
        let j = (0..n)
            .filter(|&i| !in_support[i])
            .max_by(|&a, &b| {
                (f[a] - approx[a])
                    .norm()
                    .total_cmp(&(f[b] - approx[b]).norm())
            })
            .expect("a non-support sample remains");
        in_support[j] = true;
        support.push(j);
        let rest: Vec<usize> = (0..n).filter(|&i| !in_support[i]).collect();
        let m = support.len();
        let rows = rest.len().max(m);
        let mut loewner = DMatrix::<Complex64>::zeros(rows, m);
        for (r, &i) in rest.iter().enumerate() {
            for (c, &s) in support.iter().enumerate() {
                loewner[(r, c)] = (f[i] - f[s]) / (z[i] - z[s]);
            }
        }
        let svd = loewner.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let k = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("non-empty");
        weights = v_t.row(k).iter().map(|v| v.conj()).collect();

        let model = AaaModel {
            support: support.iter().map(|&s| z[s]).collect(),
            values: support.iter().map(|&s| f[s]).collect(),
            weights: weights.clone(),
            converged: false,
            residual: 0.0,
        };
        for i in 0..n {
            approx[i] = if in_support[i] {
                f[i]
            } else {
                aaa_eval(&model, z[i])
            };
        }
        residual = (0..n)
            .map(|i| (f[i] - approx[i]).norm())
            .fold(0.0, f64::max);
        if !(residual > tol * scale) {
            break;
        }
    }
    Ok(AaaModel {
        support: support.iter().map(|&s| z[s]).collect(),
        values: support.iter().map(|&s| f[s]).collect(),
        weights,
        converged: !(residual > tol * scale),
        residual,
    })
}

/// One real channel interpolated with a squared-exponential kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeChannel {
    pub lengthscale: f64,
    pub sigma2: f64,
    pub omegas: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl SeChannel {
    pub fn eval(&self, omega: f64) -> f64 {
        if self.sigma2 == 0.0 {
            return 0.0;
        }
        self.omegas
            .iter()
            .zip(&self.coeffs)
            .map(|(&w, &a)| {
                a * self.sigma2 * (-(omega - w).powi(2) / (2.0 * self.lengthscale.powi(2))).exp()
            })
            .sum()
    }
}

/// Independent SE interpolants of the real and the imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparateSeModel {
    pub re: SeChannel,
    pub im: SeChannel,
}

impl SeparateSeModel {
    pub fn predict_omega(&self, omega: f64) -> Complex64 {
        Complex64::new(self.re.eval(omega), self.im.eval(omega))
    }

    /// The same model viewed as a complex kernel pair.
    pub fn kernel_pair(&self) -> SeparateSePair {
        SeparateSePair {
            re: (self.re.lengthscale, self.re.sigma2),
            im: (self.im.lengthscale, self.im.sigma2),
        }
    }
}

/// `k = k_RR + k_II`, `c = k_RR − k_II` for two real SE kernels on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparateSePair {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl SeparateSePair {
    fn parts(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<(f64, f64), KernelError> {
        for p in [s, s0] {
            if !p.is_on_axis() {
                return Err(KernelError::OffAxis(p.value()));
            }
        }
        let (w, w0) = (s.value().im, s0.value().im);
        let rr = if self.re.1 > 0.0 {
            se_kernel(w, w0, self.re.0, self.re.1)?
        } else {
            0.0
        };
        let ii = if self.im.1 > 0.0 {
            se_kernel(w, w0, self.im.0, self.im.1)?
        } else {
            0.0
        };
        Ok((rr, ii))
    }
}

impl ComplexKernelPair for SeparateSePair {
    fn k(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        let (rr, ii) = self.parts(s, s0)?;
        Ok(Complex64::new(rr + ii, 0.0))
    }

    fn c(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        let (rr, ii) = self.parts(s, s0)?;
        Ok(Complex64::new(rr - ii, 0.0))
    }
}

fn se_matrix(omegas: &[f64], lengthscale: f64) -> DMatrix<f64> {
    let n = omegas.len();
    DMatrix::from_fn(n, n, |i, j| {
        (-(omegas[i] - omegas[j]).powi(2) / (2.0 * lengthscale * lengthscale)).exp()
    })
}

/// Concentrated log-likelihood (σ² profiled) of a unit-variance SE model.
fn se_profile_loglik(omegas: &[f64], y: &DVector<f64>, lengthscale: f64) -> Option<f64> {
    let chol = PivotedCholesky::new(&se_matrix(omegas, lengthscale))?;
    let n = y.len() as f64;
    let s2 = chol.whiten(y).norm_squared() / n;
    Some(-0.5 * (n * (2.0 * std::f64::consts::PI * s2).ln() + chol.log_det() + n))
}

fn fit_channel(
    omegas: &[f64],
    y: Vec<f64>,
    span: f64,
    seed: u64,
) -> Result<SeChannel, BaselineError> {
    let n = omegas.len();
    let yv = DVector::from_vec(y);
    if yv.iter().all(|&v| v == 0.0) {
        return Ok(SeChannel {
            lengthscale: span,
            sigma2: 0.0,
            omegas: omegas.to_vec(),
            coeffs: vec![0.0; n],
        });
    }
    let lo = (span / (10.0 * n as f64)).ln();
    let hi = (10.0 * span).ln();
    let (slo, shi) = ((span / n as f64).ln(), span.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..SE_STARTS {
        let x0 = slo + (shi - slo) * rng.random::<f64>();
        let r = minimize_box(
            |x: &[f64]| se_profile_loglik(omegas, &yv, x[0].exp()).map_or(f64::INFINITY, |v| -v),
            &[x0],
            &[lo],
            &[hi],
            &OptOptions::default(),
        );
        if r.f.is_finite() && best.is_none_or(|(bf, _)| r.f < bf) {
            best = Some((r.f, r.x[0]));
        }
    }
    let (_, x) = best.ok_or(BaselineError::SingularSystem)?;
    let lengthscale = x.exp();
    let unit = se_matrix(omegas, lengthscale);
    let chol = PivotedCholesky::new(&unit).ok_or(BaselineError::SingularSystem)?;
    let sigma2 = chol.whiten(&yv).norm_squared() / n as f64;
    let solver = PsdSolver::new(&(unit * sigma2));
    let coeffs = solver.solve(&yv);
    Ok(SeChannel {
        lengthscale,
        sigma2,
        omegas: omegas.to_vec(),
        coeffs: coeffs.iter().cloned().collect(),
    })
}

/// Separate maximum-likelihood SE interpolation of `Re y` and `Im y`.
pub fn separate_se_fit(ts: &TrainingSet, seed: u64) -> Result<SeparateSeModel, BaselineError> {
    let omegas: Vec<f64> = ts.samples().iter().map(|s| s.omega).collect();
    let span = if ts.span() > 0.0 { ts.span() } else { 1.0 };
    let re = fit_channel(
        &omegas,
        ts.samples().iter().map(|s| s.y.re).collect(),
        span,
        seed,
    )?;
    let im = fit_channel(
        &omegas,
        ts.samples().iter().map(|s| s.y.im).collect(),
        span,
        seed,
    )?;
    Ok(SeparateSeModel { re, im })
}

/// Barycentric polynomial interpolant on Chebyshev points of the second kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevInterpolant {
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub weights: Vec<f64>,
}

/// Chebyshev points of the second kind on `[a, b]`, ascending, with exact
/// endpoints.
pub fn chebyshev_nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    let m = (n - 1) as f64;
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            // symmetric form keeps x_j = −x_{n−1−j} exactly
            let t = (std::f64::consts::PI * (2.0 * j as f64 - m) / (2.0 * m)).sin();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect();
    x[0] = a;
    x[n - 1] = b;
    x
}

pub fn chebyshev_fit(
    f: impl Fn(f64) -> Complex64,
    n: usize,
    omega_min: f64,
    omega_max: f64,
) -> Result<ChebyshevInterpolant, BaselineError> {
    if n == 0 || !(omega_max > omega_min) {
        return Err(BaselineError::InvalidInput(
            "need n ≥ 1 and omega_max > omega_min".into(),
        ));
    }
    let nodes = chebyshev_nodes(n, omega_min, omega_max);
    let values = nodes.iter().map(|&w| f(w)).collect();
    let weights = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    Ok(ChebyshevInterpolant {
        nodes,
        values,
        weights,
    })
}

impl ChebyshevInterpolant {
    pub fn eval(&self, omega: f64) -> Complex64 {
        if let Some(j) = self.nodes.iter().position(|&x| x == omega) {
            return self.values[j];
        }
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for ((&x, &v), &w) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let t = w / (omega - x);
            num += v * t;
            den += t;
        }
        num / den
    }
}
