//! Minimum-norm interpolation in a complex/real RKHS.
//!
//! The interpolation conditions `g(iω_i) = y_i` are split into real and
//! imaginary parts and solved as a real kernel interpolation problem on the
//! augmented points `(iω_i, RE)`, `(iω_i, IM)`. An optional linear mean
//! `Σ β_ℓ h_ℓ` with real coefficients is profiled by generalized least
//! squares, and the kernel part interpolates the residual.

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::RationalBasis;
use crate::kernels::{
    augmented_entry, AugmentedPoint, ComplexKernelPair, KernelError, KernelPair, LaplacePoint, Part,
};
use crate::linalg::{solve_small_psd, PsdSolver, PINV_RTOL};

/// Condition estimate above which a fit is reported as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpolationError {
    #[error("training set is empty")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("samples {first} and {second} share the same frequency")]
    DuplicateFrequency { first: usize, second: usize },
    #[error("training data violate Hermitian symmetry at samples {indices:?}")]
    SymmetryViolation { indices: Vec<usize> },
    #[error("augmented system is singular")]
    SingularSystem,
    #[error("inconsistent model parts: {0}")]
    InvalidParts(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// One training observation `(ω, f(iω))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexSample {
    pub omega: f64,
    pub y: Complex64,
}

impl ComplexSample {
    pub fn new(omega: f64, y: Complex64) -> Self {
        Self { omega, y }
    }

    pub fn point(&self) -> LaplacePoint {
        LaplacePoint::on_axis(self.omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    samples: Vec<ComplexSample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<ComplexSample>) -> Result<Self, InterpolationError> {
        if samples.is_empty() {
            return Err(InterpolationError::Empty);
        }
        if let Some(index) = samples
            .iter()
            .position(|s| !(s.omega.is_finite() && s.y.re.is_finite() && s.y.im.is_finite()))
        {
            return Err(InterpolationError::NonFinite { index });
        }
        Ok(Self { samples })
    }

    /// Samples `f(iω)` at the given frequencies.
    pub fn from_fn(
        omegas: &[f64],
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, InterpolationError> {
        Self::new(
            omegas
                .iter()
                .map(|&w| ComplexSample::new(w, f(w)))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[ComplexSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn omega_min(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.omega)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn omega_max(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.omega)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|Ω| = ω_max − ω_min`.
    pub fn span(&self) -> f64 {
        self.omega_max() - self.omega_min()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.y.norm()).fold(0.0, f64::max)
    }

    /// The set with sample `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.remove(i);
        Self { samples }
    }
}

/// A training set checked for use with a given pseudo-kernel mode.
///
/// Augmented row `2i` is `(iω_i, RE)` and row `2i + 1` is `(iω_i, IM)`.
/// In symmetric mode the imaginary row at `ω = 0` and both rows of a
/// negative frequency whose mirror image is also present are dropped, since
/// the symmetry makes those constraints redundant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedTraining {
    set: TrainingSet,
    symmetric: bool,
    dropped: Vec<usize>,
}

impl ValidatedTraining {
    pub fn set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn samples(&self) -> &[ComplexSample] {
        self.set.samples()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Augmented rows removed during validation.
    pub fn dropped_rows(&self) -> &[usize] {
        &self.dropped
    }
}

pub fn validate_training(
    ts: TrainingSet,
    symmetric: bool,
) -> Result<ValidatedTraining, InterpolationError> {
    let samples = ts.samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].omega.total_cmp(&samples[b].omega));
    for w in order.windows(2) {
        if samples[w[0]].omega == samples[w[1]].omega {
            let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(InterpolationError::DuplicateFrequency { first, second });
        }
    }

    let mut dropped = Vec::new();
    if symmetric {
        let mut bad = Vec::new();
        for (i, si) in samples.iter().enumerate() {
            if si.omega == 0.0 {
                if si.y.im.abs() > SYMMETRY_RTOL * si.y.norm() {
                    bad.push(i);
                } else {
                    dropped.push(2 * i + 1);
                }
            } else if si.omega < 0.0 {
                if let Some(j) = samples.iter().position(|sj| sj.omega == -si.omega) {
                    let tol = SYMMETRY_RTOL * (si.y.norm() + samples[j].y.norm());
                    if (si.y - samples[j].y.conj()).norm() > tol {
                        bad.push(j.min(i));
                        bad.push(j.max(i));
                    } else {
                        dropped.push(2 * i);
                        dropped.push(2 * i + 1);
                    }
                }
            }
        }
        if !bad.is_empty() {
            bad.sort_unstable();
            bad.dedup();
            return Err(InterpolationError::SymmetryViolation { indices: bad });
        }
        dropped.sort_unstable();
    }
    Ok(ValidatedTraining {
        set: ts,
        symmetric,
        dropped,
    })
}

/// Basis functions `h_ℓ` of a linear mean model with real coefficients.
pub trait MeanBasis {
    fn dim(&self) -> usize;
    /// Writes `h_1(s), …, h_L(s)` into `out`.
    fn eval(&self, s: LaplacePoint, out: &mut [Complex64]);

    fn values(&self, s: LaplacePoint) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.eval(s, &mut out);
        out
    }
}

/// A mean basis together with its coefficients `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMeanSpec<B> {
    pub basis: B,
    pub beta: Vec<f64>,
}

impl<B: MeanBasis> LinearMeanSpec<B> {
    pub fn value(&self, s: LaplacePoint) -> Complex64 {
        self.basis
            .values(s)
            .iter()
            .zip(&self.beta)
            .map(|(h, b)| h * *b)
            .sum()
    }
}

/// The real interpolation system on the augmented training points.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Rows `Re h(s_i)` / `Im h(s_i)`, one column per basis function.
    pub basis_matrix: Option<DMatrix<f64>>,
    /// Kept augmented rows, as indices `2i` / `2i + 1`.
    pub rows: Vec<usize>,
    pub dropped: Vec<usize>,
}

fn row_point(samples: &[ComplexSample], row: usize) -> AugmentedPoint {
    let part = if row.is_multiple_of(2) {
        Part::Re
    } else {
        Part::Im
    };
    AugmentedPoint::new(samples[row / 2].point(), part)
}

fn row_value(samples: &[ComplexSample], row: usize) -> f64 {
    let y = samples[row / 2].y;
    if row.is_multiple_of(2) {
        y.re
    } else {
        y.im
    }
}

/// Augmented rows kept after validation and after dropping rows whose prior
/// variance is negligible.
pub(crate) fn kept_rows<P: ComplexKernelPair>(
    vt: &ValidatedTraining,
    pair: &P,
) -> Result<(Vec<usize>, Vec<usize>), KernelError> {
    let samples = vt.samples();
    let candidates: Vec<usize> = (0..2 * samples.len())
        .filter(|r| vt.dropped.binary_search(r).is_err())
        .collect();
    let mut diag = Vec::with_capacity(candidates.len());
    for &r in &candidates {
        let u = row_point(samples, r);
        diag.push(pair.augmented(u, u)?);
    }
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    let mut rows = Vec::with_capacity(candidates.len());
    let mut dropped = vt.dropped.clone();
    for (&r, &d) in candidates.iter().zip(&diag) {
        if d > PINV_RTOL * max {
            rows.push(r);
        } else {
            dropped.push(r);
        }
    }
    dropped.sort_unstable();
    Ok((rows, dropped))
}

/// Kernel matrix over the given augmented rows. Exactly symmetric.
pub(crate) fn kernel_matrix<P: ComplexKernelPair>(
    samples: &[ComplexSample],
    rows: &[usize],
    pair: &P,
) -> Result<DMatrix<f64>, KernelError> {
    let m = rows.len();
    let mut a = DMatrix::zeros(m, m);
    let mut cache: Option<(usize, usize, Complex64, Complex64)> = None;
    for jb in 0..m {
        for ia in 0..=jb {
            let (ra, rb) = (rows[ia], rows[jb]);
            let (si, sj) = (ra / 2, rb / 2);
            let (k, c) = match cache {
                Some((ci, cj, k, c)) if ci == si && cj == sj => (k, c),
                _ => {
                    let (k, c) = pair.kc(samples[si].point(), samples[sj].point())?;
                    cache = Some((si, sj, k, c));
                    (k, c)
                }
            };
            let pa = if ra % 2 == 0 { Part::Re } else { Part::Im };
            let pb = if rb % 2 == 0 { Part::Re } else { Part::Im };
            let v = augmented_entry(k, c, pa, pb);
            a[(ia, jb)] = v;
            a[(jb, ia)] = v;
        }
    }
    Ok(a)
}

pub(crate) fn basis_matrix<B: MeanBasis>(
    samples: &[ComplexSample],
    rows: &[usize],
    basis: &B,
) -> DMatrix<f64> {
    let l = basis.dim();
    let mut h = DMatrix::zeros(rows.len(), l);
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (i, &r) in rows.iter().enumerate() {
        basis.eval(samples[r / 2].point(), &mut buf);
        for (j, v) in buf.iter().enumerate() {
            h[(i, j)] = if r % 2 == 0 { v.re } else { v.im };
        }
    }
    h
}

pub fn assemble_system<P: ComplexKernelPair, B: MeanBasis>(
    vt: &ValidatedTraining,
    pair: &P,
    mean: Option<&B>,
) -> Result<AugmentedSystem, InterpolationError> {
    let samples = vt.samples();
    let (rows, dropped) = kept_rows(vt, pair)?;
    let matrix = kernel_matrix(samples, &rows, pair)?;
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&r| row_value(samples, r)));
    let basis_matrix = mean.map(|b| basis_matrix(samples, &rows, b));
    Ok(AugmentedSystem {
        matrix,
        rhs,
        basis_matrix,
        rows,
        dropped,
    })
}

/// A frozen predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<P = KernelPair, B = RationalBasis> {
    pair: P,
    mean: Option<LinearMeanSpec<B>>,
    training: ValidatedTraining,
    rows: Vec<usize>,
    coeffs: Vec<f64>,
    dropped: Vec<usize>,
    condition: f64,
}

/// Minimum-norm interpolant of the validated data.
pub fn fit<P: ComplexKernelPair, B: MeanBasis>(
    vt: &ValidatedTraining,
    pair: P,
    mean: Option<B>,
) -> Result<FittedModel<P, B>, InterpolationError> {
    fit_with_nugget(vt, pair, mean, 0.0)
}

/// [`fit`] without a mean.
pub fn fit_kernel<P: ComplexKernelPair>(
    vt: &ValidatedTraining,
    pair: P,
) -> Result<FittedModel<P>, InterpolationError> {
    fit(vt, pair, None)
}

/// Like [`fit`], with `nugget` added to the diagonal of the augmented matrix.
pub fn fit_with_nugget<P: ComplexKernelPair, B: MeanBasis>(
    vt: &ValidatedTraining,
    pair: P,
    mean: Option<B>,
    nugget: f64,
) -> Result<FittedModel<P, B>, InterpolationError> {
    let sys = assemble_system(vt, &pair, mean.as_ref())?;
    let mut a = sys.matrix;
    if !a.iter().all(|v| v.is_finite()) {
        return Err(InterpolationError::SingularSystem);
    }
    if nugget > 0.0 {
        for i in 0..a.nrows() {
            a[(i, i)] += nugget;
        }
    }
    let solver = PsdSolver::new(&a);
    let condition = solver.condition_estimate();
    if !condition.is_finite() {
        return Err(InterpolationError::SingularSystem);
    }
    // Inner loops refit many times; callers surface the flag on final models.
    if condition > ILL_CONDITIONED {
        debug!("augmented system is ill-conditioned (estimate {condition:.3e})");
    }

    let (target, mean) = match (mean, sys.basis_matrix) {
        (Some(basis), Some(h)) => {
            let ainv_h = solver.solve_mat(&h);
            let gram = h.tr_mul(&ainv_h);
            let proj = ainv_h.tr_mul(&sys.rhs);
            let beta = solve_small_psd(&gram, &proj);
            let target = &sys.rhs - &h * &beta;
            (
                target,
                Some(LinearMeanSpec {
                    basis,
                    beta: beta.iter().cloned().collect(),
                }),
            )
        }
        _ => (sys.rhs.clone(), None),
    };
    let coeffs = solver.solve(&target);
    if solver.is_fallback() {
        let resid = (&a * &coeffs - &target).amax();
        if resid > 1e-6 * target.amax().max(f64::MIN_POSITIVE) {
            return Err(InterpolationError::SingularSystem);
        }
    }
    Ok(FittedModel {
        pair,
        mean,
        training: vt.clone(),
        rows: sys.rows,
        coeffs: coeffs.iter().cloned().collect(),
        dropped: sys.dropped,
        condition,
    })
}

impl<P: ComplexKernelPair, B: MeanBasis> FittedModel<P, B> {
    /// Rebuilds a model from stored parts without solving anything.
    pub fn from_parts(
        pair: P,
        mean: Option<LinearMeanSpec<B>>,
        training: ValidatedTraining,
        coeffs: Vec<f64>,
        dropped: Vec<usize>,
    ) -> Result<Self, InterpolationError> {
        let total = 2 * training.len();
        if dropped.iter().any(|&r| r >= total) {
            return Err(InterpolationError::InvalidParts(
                "dropped row out of range".into(),
            ));
        }
        let rows: Vec<usize> = (0..total).filter(|r| !dropped.contains(r)).collect();
        if rows.len() != coeffs.len() {
            return Err(InterpolationError::InvalidParts(format!(
                "{} coefficients for {} augmented rows",
                coeffs.len(),
                rows.len()
            )));
        }
        if let Some(m) = &mean {
            if m.beta.len() != m.basis.dim() {
                return Err(InterpolationError::InvalidParts(
                    "mean coefficient count".into(),
                ));
            }
        }
        Ok(Self {
            pair,
            mean,
            training,
            rows,
            coeffs,
            dropped,
            condition: f64::NAN,
        })
    }

    pub fn pair(&self) -> &P {
        &self.pair
    }

    pub fn mean(&self) -> Option<&LinearMeanSpec<B>> {
        self.mean.as_ref()
    }

    pub fn training(&self) -> &ValidatedTraining {
        &self.training
    }

    /// Augmented coefficients, one per kept row.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dropped_rows(&self) -> &[usize] {
        &self.dropped
    }

    /// Condition estimate of the solved system (`NaN` for rebuilt models).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > ILL_CONDITIONED
    }

    pub fn predict(&self, s: LaplacePoint) -> Result<Complex64, InterpolationError> {
        let samples = self.training.samples();
        let mut re = 0.0;
        let mut im = 0.0;
        let mut cache: Option<(usize, Complex64, Complex64)> = None;
        for (&r, &a) in self.rows.iter().zip(&self.coeffs) {
            let i = r / 2;
            let (k, c) = match cache {
                Some((ci, k, c)) if ci == i => (k, c),
                _ => {
                    let (k, c) = self.pair.kc(s, samples[i].point())?;
                    cache = Some((i, k, c));
                    (k, c)
                }
            };
            let part = if r % 2 == 0 { Part::Re } else { Part::Im };
            re += a * augmented_entry(k, c, Part::Re, part);
            im += a * augmented_entry(k, c, Part::Im, part);
        }
        let mut g = Complex64::new(re, im);
        if let Some(m) = &self.mean {
            g += m.value(s);
        }
        Ok(g)
    }

    pub fn predict_omega(&self, omega: f64) -> Result<Complex64, InterpolationError> {
        self.predict(LaplacePoint::on_axis(omega))
    }

    /// Largest deviation from the training data, relative to `max |y_i|`.
    pub fn training_residual(&self) -> Result<f64, InterpolationError> {
        let mut worst = 0.0f64;
        for s in self.training.samples() {
            worst = worst.max((self.predict(s.point())? - s.y).norm());
        }
        let scale = self.training.set().max_abs();
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    /// RKHS (semi-)norm of the kernel part: `sqrt(aᵀ K̃ a)`.
    pub fn rkhs_norm(&self) -> Result<f64, InterpolationError> {
        let a = kernel_matrix(self.training.samples(), &self.rows, &self.pair)?;
        let x = DVector::from_column_slice(&self.coeffs);
        Ok(x.dot(&(&a * &x)).max(0.0).sqrt())
    }
}

/// Closed-form widely-linear posterior mean (zero-mean model), computed with
/// complex matrices `K_n`, `C_n` and `P_n = conj(K_n) − C_nᴴ K_n⁻¹ C_n`.
pub fn predict_widely_linear<P: ComplexKernelPair>(
    samples: &[ComplexSample],
    pair: &P,
    s: LaplacePoint,
) -> Result<Complex64, InterpolationError> {
    let n = samples.len();
    let mut kn = DMatrix::<Complex64>::zeros(n, n);
    let mut cn = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (k, c) = pair.kc(samples[i].point(), samples[j].point())?;
            kn[(i, j)] = k;
            cn[(i, j)] = c;
        }
    }
    let mut ks = DMatrix::<Complex64>::zeros(1, n);
    let mut cs = DMatrix::<Complex64>::zeros(1, n);
    for j in 0..n {
        let (k, c) = pair.kc(s, samples[j].point())?;
        ks[(0, j)] = k;
        cs[(0, j)] = c;
    }
    let y = DMatrix::from_iterator(n, 1, samples.iter().map(|s| s.y));
    let kinv = kn
        .clone()
        .try_inverse()
        .ok_or(InterpolationError::SingularSystem)?;
    let p = kn.map(|v| v.conj()) - cn.adjoint() * &kinv * &cn;
    let pinv = p.try_inverse().ok_or(InterpolationError::SingularSystem)?;
    let first = (&ks - &cs * kinv.map(|v| v.conj()) * cn.adjoint()) * pinv.map(|v| v.conj()) * &y;
    let second = (&cs - &ks * &kinv * &cn) * &pinv * y.map(|v| v.conj());
    Ok(first[(0, 0)] + second[(0, 0)])
}
