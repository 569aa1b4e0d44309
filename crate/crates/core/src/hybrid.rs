//! Kernel interpolation with a rational mean.
//!
//! The mean is a sum of `K` conjugate pole pairs, `m(s) = Σ r_i/(s − p_i) +
//! r_i*/(s − p_i*)`, with residues profiled by generalized least squares. The
//! kernel hyperparameters and the poles are tuned by maximizing a penalized
//! Gaussian log-likelihood (lognormal prior on α) with a multistart
//! bound-constrained optimizer. Models with `K = K_max, …, 0` poles are built
//! by backward elimination and compared with a leave-one-out criterion that
//! also penalizes unstable predictions between the samples.

use std::cmp::Ordering;
use std::rc::Rc;

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Grid;
use crate::interpolate::{
    basis_matrix, fit, kept_rows, kernel_matrix, validate_training, FittedModel,
    InterpolationError, MeanBasis, TrainingSet, ValidatedTraining, ILL_CONDITIONED,
};
use crate::kernels::{KernelKind, KernelPair, KernelParams, LaplacePoint, Pseudo};
use crate::linalg::{solve_small_psd, PivotedCholesky};
use crate::optimize::{minimize_box, OptOptions};

/// Largest number of pole pairs ever considered.
pub const MAX_POLES: usize = 5;
/// Default number of multistart local optimizations.
pub const N_STARTS: usize = 20;
/// Standard deviation of `ln α` under the prior.
pub const SIGMA_ALPHA: f64 = 3.0;
/// Weight of the instability term relative to the pure kernel model.
pub const LAMBDA_FACTOR: f64 = 0.2;
/// Real part of the initial poles, relative to `|Ω|`.
pub const INIT_POLE_DAMPING: f64 = 1e-3;
/// Relative lower bound for `α` and for `−Re p`.
pub const REL_LOWER: f64 = 1e-6;
pub const THETA1_BOUND: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HybridError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("augmented covariance is singular")]
    SingularCovariance,
    #[error("no start produced a finite objective for K = {k}")]
    OptimizationFailed { k: usize },
    #[error("leave-one-out fold {0} failed")]
    FoldFailed(usize),
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
}

impl From<crate::kernels::KernelError> for HybridError {
    fn from(e: crate::kernels::KernelError) -> Self {
        HybridError::Interpolation(e.into())
    }
}

/// A stable pole pair `p, p*`, represented by the member with `Im p > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolePair {
    pub re: f64,
    pub im: f64,
}

impl PolePair {
    pub fn new(p: Complex64) -> Result<Self, HybridError> {
        if !(p.re < 0.0 && p.im > 0.0 && p.re.is_finite() && p.im.is_finite()) {
            return Err(HybridError::InvalidInput(format!(
                "pole {p} must satisfy Re p < 0 < Im p"
            )));
        }
        Ok(Self { re: p.re, im: p.im })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.im
            .total_cmp(&other.im)
            .then(self.re.total_cmp(&other.re))
    }
}

fn cmp_pole_lists(a: &[PolePair], b: &[PolePair]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.key_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Basis `h_{2i−1} = 1/(s−p_i) + 1/(s−p_i*)`, `h_{2i} = i/(s−p_i) − i/(s−p_i*)`,
/// so that `β_{2i−1} + iβ_{2i}` is the residue at `p_i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RationalBasis {
    pub poles: Vec<PolePair>,
}

pub fn rational_basis(poles: &[PolePair]) -> RationalBasis {
    RationalBasis {
        poles: poles.to_vec(),
    }
}

impl MeanBasis for RationalBasis {
    fn dim(&self) -> usize {
        2 * self.poles.len()
    }

    fn eval(&self, s: LaplacePoint, out: &mut [Complex64]) {
        let s = s.value();
        let i = Complex64::new(0.0, 1.0);
        for (k, p) in self.poles.iter().enumerate() {
            let p = p.value();
            let a = (s - p).inv();
            let b = (s - p.conj()).inv();
            out[2 * k] = a + b;
            out[2 * k + 1] = i * (a - b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// `ln(σ²/2π)`.
    pub theta1: f64,
    /// `α`.
    pub theta2: f64,
    pub poles: Vec<PolePair>,
}

impl HyperParams {
    pub fn alpha(&self) -> f64 {
        self.theta2
    }

    pub fn sigma2(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.theta1.exp()
    }

    pub fn k(&self) -> usize {
        self.poles.len()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut x = vec![self.theta1, self.theta2];
        for p in &self.poles {
            x.push(p.re);
            x.push(p.im);
        }
        x
    }

    fn from_vec(x: &[f64]) -> Self {
        let poles = x[2..]
            .chunks(2)
            .map(|c| PolePair { re: c[0], im: c[1] })
            .collect();
        Self {
            theta1: x[0],
            theta2: x[1],
            poles,
        }
    }

    fn canonicalize(&mut self) {
        self.poles.sort_by(|a, b| a.key_cmp(b));
    }
}

/// Box constraints on the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub theta1: (f64, f64),
    pub alpha: (f64, f64),
    pub pole_re: (f64, f64),
    pub pole_im: (f64, f64),
}

impl Bounds {
    pub fn new(span: f64, omega_min: f64, omega_max: f64) -> Self {
        Self {
            theta1: (-THETA1_BOUND, THETA1_BOUND),
            alpha: (REL_LOWER * span, span),
            pole_re: (-span, -REL_LOWER * span),
            pole_im: (
                (REL_LOWER * span).max(omega_min - span / 3.0),
                omega_max + span / 3.0,
            ),
        }
    }

    /// Widens the box so that it contains `hp`.
    pub fn enlarge(&mut self, hp: &HyperParams) {
        fn widen(b: &mut (f64, f64), v: f64) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
        widen(&mut self.theta1, hp.theta1);
        widen(&mut self.alpha, hp.theta2);
        for p in &hp.poles {
            widen(&mut self.pole_re, p.re);
            widen(&mut self.pole_im, p.im);
        }
    }

    pub fn contains(&self, hp: &HyperParams) -> bool {
        let inside = |b: (f64, f64), v: f64| b.0 <= v && v <= b.1;
        inside(self.theta1, hp.theta1)
            && inside(self.alpha, hp.theta2)
            && hp
                .poles
                .iter()
                .all(|p| inside(self.pole_re, p.re) && inside(self.pole_im, p.im))
    }

    fn vectors(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.theta1.0, self.alpha.0];
        let mut hi = vec![self.theta1.1, self.alpha.1];
        for _ in 0..k {
            lo.extend([self.pole_re.0, self.pole_im.0]);
            hi.extend([self.pole_re.1, self.pole_im.1]);
        }
        (lo, hi)
    }
}

pub fn kmax_rule(n: usize) -> usize {
    MAX_POLES.min(n / 4)
}

/// `K` poles close to the axis with equidistant imaginary parts
/// `ω_min + (k − ½)|Ω|/K_max`.
pub fn init_poles(k: usize, omega_min: f64, omega_max: f64, kmax: usize) -> Vec<PolePair> {
    if k == 0 {
        return Vec::new();
    }
    let span = omega_max - omega_min;
    let step = span / kmax.max(k) as f64;
    (1..=k)
        .map(|j| PolePair {
            re: -INIT_POLE_DAMPING * span,
            im: omega_min + (j as f64 - 0.5) * step,
        })
        .collect()
}

/// Log-density of the lognormal prior on `α`, with mode at `|Ω|`.
pub fn lognormal_prior_logpdf(alpha: f64, omega_span: f64) -> Result<f64, HybridError> {
    if !(alpha > 0.0 && omega_span > 0.0) {
        return Err(HybridError::InvalidInput(
            "prior needs alpha > 0 and |Ω| > 0".into(),
        ));
    }
    let mu = SIGMA_ALPHA * SIGMA_ALPHA + omega_span.ln();
    let z = alpha.ln() - mu;
    Ok(
        -(alpha * SIGMA_ALPHA * (2.0 * std::f64::consts::PI).sqrt()).ln()
            - z * z / (2.0 * SIGMA_ALPHA * SIGMA_ALPHA),
    )
}

/// Cholesky factor of the unit-scale covariance at one value of `α`.
#[derive(Debug, Clone)]
pub struct CovFactor {
    alpha: f64,
    rows: Vec<usize>,
    chol: PivotedCholesky,
    zy: DVector<f64>,
    log_det: f64,
    prior: f64,
}

impl CovFactor {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Objective value and profiled quantities at one hyperparameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEval {
    /// Penalized log-likelihood.
    pub j: f64,
    pub beta: Vec<f64>,
    /// Maximum-likelihood `σ²` for the current `α` and poles.
    pub sigma2_gls: f64,
}

/// Penalized likelihood of one training set.
#[derive(Debug, Clone)]
pub struct LikelihoodProblem {
    vt: ValidatedTraining,
    kind: KernelKind,
    pseudo: Pseudo,
    span: f64,
    omega_min: f64,
    omega_max: f64,
    kmax: usize,
}

impl LikelihoodProblem {
    pub fn new(vt: ValidatedTraining, kind: KernelKind, pseudo: Pseudo) -> Self {
        let set = vt.set();
        let (omega_min, omega_max) = (set.omega_min(), set.omega_max());
        // A single sample has no frequency span; fall back to unit scale.
        let span = if omega_max > omega_min {
            omega_max - omega_min
        } else {
            1.0
        };
        let kmax = kmax_rule(vt.len());
        Self {
            vt,
            kind,
            pseudo,
            span,
            omega_min,
            omega_max,
            kmax,
        }
    }

    pub fn with_kmax(mut self, kmax: usize) -> Self {
        self.kmax = kmax;
        self
    }

    pub fn training(&self) -> &ValidatedTraining {
        &self.vt
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn pseudo(&self) -> Pseudo {
        self.pseudo
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.span, self.omega_min, self.omega_max)
    }

    fn pair(&self, alpha: f64, sigma2: f64) -> Result<KernelPair, HybridError> {
        Ok(KernelPair::new(
            self.kind,
            self.pseudo,
            KernelParams::new(alpha, sigma2)?,
        ))
    }

    /// Factorizes the covariance at `α` (unit `σ²`); `None` if it is not
    /// numerically positive definite.
    pub fn factor(&self, alpha: f64) -> Result<Option<CovFactor>, HybridError> {
        let pair = self.pair(alpha, 1.0)?;
        let samples = self.vt.samples();
        let (rows, _) = kept_rows(&self.vt, &pair)?;
        let a = kernel_matrix(samples, &rows, &pair)?;
        let Some(chol) = PivotedCholesky::new(&a) else {
            return Ok(None);
        };
        let y = DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&r| {
                if r % 2 == 0 {
                    samples[r / 2].y.re
                } else {
                    samples[r / 2].y.im
                }
            }),
        );
        let zy = chol.whiten(&y);
        let log_det = chol.log_det();
        let prior = lognormal_prior_logpdf(alpha, self.span)?;
        Ok(Some(CovFactor {
            alpha,
            rows,
            chol,
            zy,
            log_det,
            prior,
        }))
    }

    /// Penalized log-likelihood with residues profiled out.
    pub fn evaluate(&self, f: &CovFactor, theta1: f64, poles: &[PolePair]) -> LikelihoodEval {
        let m = f.rows.len() as f64;
        let (resid, beta) = if poles.is_empty() {
            (f.zy.clone(), Vec::new())
        } else {
            let h = basis_matrix(self.vt.samples(), &f.rows, &rational_basis(poles));
            let w = f.chol.whiten_mat(&h);
            let beta = solve_small_psd(&w.tr_mul(&w), &w.tr_mul(&f.zy));
            (&f.zy - &w * &beta, beta.iter().cloned().collect())
        };
        let q = resid.norm_squared();
        let sigma2 = 2.0 * std::f64::consts::PI * theta1.exp();
        let ll = -0.5
            * (m * (2.0 * std::f64::consts::PI).ln() + m * sigma2.ln() + f.log_det + q / sigma2);
        LikelihoodEval {
            j: ll + f.prior,
            beta,
            sigma2_gls: q / m,
        }
    }

    /// Penalized log-likelihood at `hp`, or `SingularCovariance`.
    pub fn penalized_loglik(&self, hp: &HyperParams) -> Result<LikelihoodEval, HybridError> {
        let f = self
            .factor(hp.theta2)?
            .ok_or(HybridError::SingularCovariance)?;
        Ok(self.evaluate(&f, hp.theta1, &hp.poles))
    }

    /// `θ₁` at the maximum-likelihood `σ²` for fixed `α` and poles, clamped to
    /// the bounds.
    fn profiled_theta1(&self, f: &CovFactor, poles: &[PolePair], bounds: &Bounds) -> f64 {
        let s2 = self.evaluate(f, 0.0, poles).sigma2_gls;
        let t = (s2 / (2.0 * std::f64::consts::PI)).ln();
        if t.is_nan() {
            bounds.theta1.0
        } else {
            t.clamp(bounds.theta1.0, bounds.theta1.1)
        }
    }

    /// Interpolant with the given hyperparameters.
    pub fn model(&self, hp: &HyperParams) -> Result<FittedModel, HybridError> {
        let pair = self.pair(hp.alpha(), hp.sigma2())?;
        let mean = if hp.poles.is_empty() {
            None
        } else {
            Some(rational_basis(&hp.poles))
        };
        Ok(fit(&self.vt, pair, mean)?)
    }
}

/// Objective `−J` with a small per-`α` cache of factorizations, so that
/// derivatives in `θ₁` and in the poles reuse the covariance factor.
struct Objective<'a> {
    problem: &'a LikelihoodProblem,
    cache: Vec<(u64, Option<Rc<CovFactor>>)>,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a LikelihoodProblem) -> Self {
        Self {
            problem,
            cache: Vec::with_capacity(8),
        }
    }

    fn factor(&mut self, alpha: f64) -> Option<Rc<CovFactor>> {
        let key = alpha.to_bits();
        if let Some((_, f)) = self.cache.iter().find(|(k, _)| *k == key) {
            return f.clone();
        }
        let f = self.problem.factor(alpha).ok().flatten().map(Rc::new);
        if self.cache.len() == 8 {
            self.cache.remove(0);
        }
        self.cache.push((key, f.clone()));
        f
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let hp = HyperParams::from_vec(x);
        match self.factor(hp.theta2) {
            Some(f) => -self.problem.evaluate(&f, hp.theta1, &hp.poles).j,
            None => f64::INFINITY,
        }
    }
}

/// Result of a hyperparameter optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub hp: HyperParams,
    pub j: f64,
}

fn local_optimize(
    problem: &LikelihoodProblem,
    start: &HyperParams,
    bounds: &Bounds,
) -> Option<Optimized> {
    let (lo, hi) = bounds.vectors(start.k());
    let mut obj = Objective::new(problem);
    let r = minimize_box(
        |x| obj.value(x),
        &start.to_vec(),
        &lo,
        &hi,
        &OptOptions::default(),
    );
    if !r.f.is_finite() {
        return None;
    }
    let mut hp = HyperParams::from_vec(&r.x);
    hp.canonicalize();
    Some(Optimized { hp, j: -r.f })
}

fn pick_best(results: Vec<Option<Optimized>>) -> Option<Optimized> {
    results.into_iter().flatten().reduce(|best, cand| {
        let better = match cand.j.total_cmp(&best.j) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => cmp_pole_lists(&cand.hp.poles, &best.hp.poles) == Ordering::Less,
        };
        if better {
            cand
        } else {
            best
        }
    })
}

/// Halves `alpha` until the covariance factorizes with a condition estimate
/// below [`ILL_CONDITIONED`]. Above that, rounding noise in the likelihood
/// swamps finite-difference gradients and the local search stalls.
fn usable_start(
    problem: &LikelihoodProblem,
    mut alpha: f64,
    lower: f64,
) -> Option<(f64, CovFactor)> {
    for _ in 0..64 {
        if let Some(f) = problem.factor(alpha).ok().flatten() {
            if f.chol.condition_estimate() < ILL_CONDITIONED {
                return Some((alpha, f));
            }
        }
        if alpha * 0.5 < lower {
            return problem.factor(lower).ok().flatten().map(|f| (lower, f));
        }
        alpha *= 0.5;
    }
    None
}

/// Random `α` values of the multistart; depend only on `(seed, K)`.
pub fn multistart_alphas(bounds: &Bounds, k: usize, n_starts: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let (lo, hi) = bounds.alpha;
    (0..n_starts)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// Best local maximum of the penalized likelihood over `n_starts` random
/// starts (poles from [`init_poles`], `σ²` from its GLS estimate) plus the
/// optional warm start.
pub fn optimize_hyperparams(
    problem: &LikelihoodProblem,
    k: usize,
    init: Option<&HyperParams>,
    n_starts: usize,
    seed: u64,
) -> Result<Optimized, HybridError> {
    let base = problem.bounds();
    let mut bounds = base;
    if let Some(w) = init {
        if w.k() != k {
            return Err(HybridError::InvalidInput(format!(
                "warm start has {} poles, expected {k}",
                w.k()
            )));
        }
        bounds.enlarge(w);
    }
    let poles = init_poles(k, problem.omega_min, problem.omega_max, problem.kmax.max(k));
    let mut starts: Vec<Option<HyperParams>> = multistart_alphas(&base, k, n_starts, seed)
        .into_iter()
        .map(|alpha| {
            let (alpha, f) = usable_start(problem, alpha, base.alpha.0)?;
            let theta1 = problem.profiled_theta1(&f, &poles, &bounds);
            Some(HyperParams {
                theta1,
                theta2: alpha,
                poles: poles.clone(),
            })
        })
        .collect();
    if let Some(w) = init {
        starts.push(Some(w.clone()));
    }
    let results: Vec<Option<Optimized>> = starts
        .par_iter()
        .map(|s| s.as_ref().and_then(|s| local_optimize(problem, s, &bounds)))
        .collect();
    pick_best(results).ok_or(HybridError::OptimizationFailed { k })
}

/// One level of backward elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationStep {
    pub k: usize,
    /// `None` if no start produced a finite objective at this level.
    pub optimized: Option<Optimized>,
    /// Pole removed to go from `K + 1` to `K` poles.
    pub removed: Option<PolePair>,
}

/// Models with `K = K_max, …, 0` poles. Each level removes the pole whose
/// removal (poles fixed, `σ²` and residues re-profiled) costs the least
/// likelihood, then re-optimizes from that subset.
pub fn backward_eliminate(
    problem: &LikelihoodProblem,
    kmax: usize,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<EliminationStep>, HybridError> {
    let mut steps = Vec::with_capacity(kmax + 1);
    let top = optimize_hyperparams(problem, kmax, None, n_starts, seed);
    if kmax == 0 {
        steps.push(EliminationStep {
            k: 0,
            optimized: Some(top?),
            removed: None,
        });
        return Ok(steps);
    }
    let mut current = match top {
        Ok(o) => Some(o),
        Err(HybridError::OptimizationFailed { k }) => {
            warn!("no finite likelihood with {k} poles");
            None
        }
        Err(e) => return Err(e),
    };
    steps.push(EliminationStep {
        k: kmax,
        optimized: current.clone(),
        removed: None,
    });
    for k in (0..kmax).rev() {
        let mut removed = None;
        let mut warm = None;
        if let Some(cur) = &current {
            let bounds = {
                let mut b = problem.bounds();
                b.enlarge(&cur.hp);
                b
            };
            if let Some(f) = problem.factor(cur.hp.theta2)? {
                let mut best: Option<(f64, usize, HyperParams)> = None;
                for drop in 0..cur.hp.poles.len() {
                    let mut poles = cur.hp.poles.clone();
                    poles.remove(drop);
                    let theta1 = problem.profiled_theta1(&f, &poles, &bounds);
                    let j = problem.evaluate(&f, theta1, &poles).j;
                    let cand = HyperParams {
                        theta1,
                        theta2: cur.hp.theta2,
                        poles,
                    };
                    let better = match &best {
                        None => true,
                        Some((bj, _, bhp)) => {
                            j > *bj
                                || (j == *bj
                                    && cmp_pole_lists(&cand.poles, &bhp.poles) == Ordering::Less)
                        }
                    };
                    if better && j.is_finite() {
                        best = Some((j, drop, cand));
                    }
                }
                if let Some((_, drop, hp)) = best {
                    removed = Some(cur.hp.poles[drop]);
                    warm = Some(hp);
                }
            }
        }
        let next = match optimize_hyperparams(problem, k, warm.as_ref(), n_starts, seed) {
            Ok(o) => Some(o),
            Err(HybridError::OptimizationFailed { k }) => {
                warn!("no finite likelihood with {k} poles");
                None
            }
            Err(e) => return Err(e),
        };
        steps.push(EliminationStep {
            k,
            optimized: next.clone(),
            removed,
        });
        current = next;
    }
    Ok(steps)
}

/// Held-out predictions of the leave-one-out models.
#[derive(Debug, Clone, PartialEq)]
pub struct LooFolds {
    /// `f̂_{−i}(iω_i)`.
    pub at_held_out: Vec<Complex64>,
    /// `f̂_{−i}` on the grid, one row per fold.
    pub on_grid: Vec<Vec<Complex64>>,
}

/// Refits without sample `i`, re-tuned by a single local optimization
/// started from `hp`.
pub fn loo_fold(
    problem: &LikelihoodProblem,
    hp: &HyperParams,
    i: usize,
) -> Result<FittedModel, HybridError> {
    let fail = |_| HybridError::FoldFailed(i);
    let set = problem.vt.set().without(i);
    let vt = validate_training(set, problem.vt.symmetric()).map_err(fail)?;
    let fold = LikelihoodProblem {
        kmax: problem.kmax,
        ..LikelihoodProblem::new(vt, problem.kind, problem.pseudo)
    };
    let mut bounds = fold.bounds();
    bounds.enlarge(hp);
    let tuned = local_optimize(&fold, hp, &bounds).ok_or(HybridError::FoldFailed(i))?;
    fold.model(&tuned.hp)
        .map_err(|_| HybridError::FoldFailed(i))
}

pub fn loo_folds(
    problem: &LikelihoodProblem,
    hp: &HyperParams,
    grid: &[f64],
) -> Result<LooFolds, HybridError> {
    let n = problem.vt.len();
    if n < 2 {
        return Err(HybridError::InvalidInput(
            "leave-one-out needs at least two samples".into(),
        ));
    }
    let folds: Vec<Result<(Complex64, Vec<Complex64>), HybridError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let model = loo_fold(problem, hp, i)?;
            let fail = |_| HybridError::FoldFailed(i);
            let at = model
                .predict_omega(problem.vt.samples()[i].omega)
                .map_err(fail)?;
            let g = grid
                .iter()
                .map(|&w| model.predict_omega(w))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            Ok((at, g))
        })
        .collect();
    let mut out = LooFolds {
        at_held_out: Vec::with_capacity(n),
        on_grid: Vec::with_capacity(n),
    };
    for f in folds {
        let (at, g) = f?;
        out.at_held_out.push(at);
        out.on_grid.push(g);
    }
    Ok(out)
}

fn eps_loo(problem: &LikelihoodProblem, folds: &LooFolds) -> f64 {
    let samples = problem.vt.samples();
    let n = samples.len() as f64;
    samples
        .iter()
        .zip(&folds.at_held_out)
        .map(|(s, p)| (s.y - p).norm_sqr())
        .sum::<f64>()
        / n
}

/// `ε_LOO = (1/n) Σ |f(iω_i) − f̂_{−i}(iω_i)|²` with re-tuned folds.
pub fn loo_criterion(problem: &LikelihoodProblem, hp: &HyperParams) -> Result<f64, HybridError> {
    let folds = loo_folds(problem, hp, &[])?;
    Ok(eps_loo(problem, &folds))
}

/// Criteria of one candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k: usize,
    pub hyperparams: Option<HyperParams>,
    pub loglik: Option<f64>,
    pub eps_loo: Option<f64>,
    /// `(1/(nM)) Σ_i Σ_j |f_n(iω̂_j) − f̂_{−i}(iω̂_j)|²`.
    pub instability: Option<f64>,
    pub eps_loo_stab: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// One entry per `K = 0, …, K_max`.
    pub per_k: Vec<KReport>,
    pub lambda: f64,
    pub chosen_k: usize,
    /// Poles in the order they were removed.
    pub elimination_trace: Vec<PolePair>,
    pub warnings: Vec<String>,
}

/// Number of grid points for the instability term.
pub fn instability_grid_size(n: usize) -> usize {
    10 * n + 1
}

/// Scores every level with the stabilized leave-one-out criterion
/// `ε_LOO + λ·instability`, with `λ = 0.2·ε⁰_LOO / instability⁰`, and picks
/// the minimizer (ties go to the smaller `K`).
pub fn stabilized_criterion(
    problem: &LikelihoodProblem,
    steps: &[EliminationStep],
) -> Result<SelectionReport, HybridError> {
    let n = problem.vt.len();
    let grid = Grid::new(
        problem.omega_min,
        problem.omega_max,
        instability_grid_size(n),
    )
    .map_err(|e| HybridError::InvalidInput(e.to_string()))?
    .points();
    let mut warnings = Vec::new();
    let mut ordered: Vec<&EliminationStep> = steps.iter().collect();
    ordered.sort_by_key(|s| s.k);
    let mut per_k = Vec::with_capacity(ordered.len());
    for step in ordered {
        let mut rep = KReport {
            k: step.k,
            hyperparams: step.optimized.as_ref().map(|o| o.hp.clone()),
            loglik: step.optimized.as_ref().map(|o| o.j),
            eps_loo: None,
            instability: None,
            eps_loo_stab: None,
        };
        let Some(opt) = &step.optimized else {
            warnings.push(format!("K = {} excluded: optimization failed", step.k));
            per_k.push(rep);
            continue;
        };
        let scored = problem.model(&opt.hp).and_then(|full| {
            let folds = loo_folds(problem, &opt.hp, &grid)?;
            let reference = grid
                .iter()
                .map(|&w| full.predict_omega(w))
                .collect::<Result<Vec<_>, _>>()?;
            let mut instab = 0.0;
            for row in &folds.on_grid {
                instab += row
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>();
            }
            Ok((eps_loo(problem, &folds), instab / (n * grid.len()) as f64))
        });
        match scored {
            Ok((e, s)) => {
                rep.eps_loo = Some(e);
                rep.instability = Some(s);
            }
            Err(e) => warnings.push(format!("K = {} excluded: {e}", step.k)),
        }
        per_k.push(rep);
    }

    let lambda = match per_k
        .iter()
        .find(|r| r.k == 0)
        .and_then(|r| r.eps_loo.zip(r.instability))
    {
        Some((e0, s0)) if s0 > 0.0 => LAMBDA_FACTOR * e0 / s0,
        Some(_) => {
            warnings.push("instability of the pure kernel model is zero; lambda set to 0".into());
            0.0
        }
        None => {
            warnings.push("pure kernel model unavailable; lambda set to 0".into());
            0.0
        }
    };
    for r in &mut per_k {
        r.eps_loo_stab = r.eps_loo.zip(r.instability).map(|(e, s)| e + lambda * s);
    }
    let chosen_k = per_k
        .iter()
        .filter_map(|r| r.eps_loo_stab.filter(|v| v.is_finite()).map(|v| (r.k, v)))
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k)
        .ok_or(HybridError::OptimizationFailed { k: 0 })?;
    for w in &warnings {
        warn!("{w}");
    }
    let elimination_trace = {
        let mut s: Vec<&EliminationStep> = steps.iter().collect();
        s.sort_by_key(|s| std::cmp::Reverse(s.k));
        s.iter().filter_map(|s| s.removed).collect()
    };
    Ok(SelectionReport {
        per_k,
        lambda,
        chosen_k,
        elimination_trace,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub kernel: KernelKind,
    pub pseudo: Pseudo,
    pub seed: u64,
    pub n_starts: usize,
    /// Cap on `K_max` below the default rule.
    pub max_poles: Option<usize>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Szego,
            pseudo: Pseudo::Symmetric,
            seed: 0,
            n_starts: N_STARTS,
            max_poles: None,
        }
    }
}

impl HybridConfig {
    pub fn symmetric(&self) -> bool {
        self.pseudo == Pseudo::Symmetric
    }
}

/// Tuned pure kernel model (`K = 0`).
pub fn fit_kernel_tuned(
    ts: &TrainingSet,
    cfg: &HybridConfig,
) -> Result<(FittedModel, HyperParams), HybridError> {
    let vt = validate_training(ts.clone(), cfg.symmetric())?;
    let problem = LikelihoodProblem::new(vt, cfg.kernel, cfg.pseudo);
    let opt = optimize_hyperparams(&problem, 0, None, cfg.n_starts, cfg.seed)?;
    Ok((warn_conditioning(problem.model(&opt.hp)?), opt.hp))
}

/// Full pipeline: backward elimination, stabilized leave-one-out selection
/// and the chosen model on all data.
pub fn fit_hybrid(
    ts: &TrainingSet,
    cfg: &HybridConfig,
) -> Result<(FittedModel, SelectionReport), HybridError> {
    let vt = validate_training(ts.clone(), cfg.symmetric())?;
    let n = vt.len();
    let kmax = cfg.max_poles.map_or(kmax_rule(n), |m| m.min(kmax_rule(n)));
    let problem = LikelihoodProblem::new(vt, cfg.kernel, cfg.pseudo).with_kmax(kmax);
    if n < 2 {
        let opt = optimize_hyperparams(&problem, 0, None, cfg.n_starts, cfg.seed)?;
        let report = SelectionReport {
            per_k: vec![KReport {
                k: 0,
                hyperparams: Some(opt.hp.clone()),
                loglik: Some(opt.j),
                eps_loo: None,
                instability: None,
                eps_loo_stab: None,
            }],
            lambda: 0.0,
            chosen_k: 0,
            elimination_trace: Vec::new(),
            warnings: vec!["fewer than two samples: leave-one-out skipped".into()],
        };
        return Ok((warn_conditioning(problem.model(&opt.hp)?), report));
    }
    let steps = backward_eliminate(&problem, kmax, cfg.n_starts, cfg.seed)?;
    let report = stabilized_criterion(&problem, &steps)?;
    let hp = report.per_k[report.chosen_k]
        .hyperparams
        .clone()
        .expect("chosen level has hyperparameters");
    Ok((warn_conditioning(problem.model(&hp)?), report))
}

fn warn_conditioning(model: FittedModel) -> FittedModel {
    if model.is_ill_conditioned() {
        warn!(
            "augmented system is ill-conditioned (estimate {:.3e})",
            model.condition()
        );
    }
    model
}
