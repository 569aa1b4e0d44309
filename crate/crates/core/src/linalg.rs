//! Dense symmetric positive-semidefinite solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue threshold of the pseudo-inverse fallback.
pub(crate) const PINV_RTOL: f64 = 1e-12;

/// Pivoted Cholesky factorization `P A Pᵀ = L Lᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct PivotedCholesky {
    l: DMatrix<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Fails (returns `None`) when a pivot drops below `n·ε·max(diag)`, i.e.
    /// the matrix is not numerically positive definite.
    pub(crate) fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let max_diag = (0..n).map(|i| w[(i, i)]).fold(0.0f64, f64::max);
        if n == 0 {
            return Some(Self { l: w, perm });
        }
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return None;
        }
        let tol = max_diag * f64::EPSILON * n as f64;
        for k in 0..n {
            let (mut piv, mut best) = (k, w[(k, k)]);
            for i in k + 1..n {
                if w[(i, i)] > best {
                    best = w[(i, i)];
                    piv = i;
                }
            }
            if !(best > tol) {
                return None;
            }
            if piv != k {
                w.swap_rows(k, piv);
                w.swap_columns(k, piv);
                perm.swap(k, piv);
            }
            let d = w[(k, k)].sqrt();
            w[(k, k)] = d;
            for i in k + 1..n {
                w[(i, k)] /= d;
            }
            // Full symmetric trailing update, so later pivot swaps stay valid.
            for j in k + 1..n {
                let ljk = w[(j, k)];
                if ljk != 0.0 {
                    for i in k + 1..n {
                        let v = w[(i, k)] * ljk;
                        w[(i, j)] -= v;
                    }
                }
            }
            for i in k + 1..n {
                w[(k, i)] = w[(i, k)];
            }
        }
        for j in 0..n {
            for i in 0..j {
                w[(i, j)] = 0.0;
            }
        }
        Some(Self { l: w, perm })
    }

    pub(crate) fn dim(&self) -> usize {
        self.perm.len()
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Ratio of extreme pivots, squared.
    pub(crate) fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let d: Vec<f64> = (0..n).map(|i| self.l[(i, i)]).collect();
        let hi = d.iter().cloned().fold(0.0, f64::max);
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi / lo).powi(2)
    }

    /// `L⁻¹ P b`.
    pub(crate) fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.l[(i, j)] * x[j];
            }
            x[i] = acc / self.l[(i, i)];
        }
        x
    }

    /// Column-wise [`whiten`](Self::whiten).
    pub(crate) fn whiten_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            out.set_column(c, &self.whiten(&b.column(c).into_owned()));
        }
        out
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut z = self.whiten(b);
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in i + 1..n {
                acc -= self.l[(j, i)] * z[j];
            }
            z[i] = acc / self.l[(i, i)];
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }
}

/// Eigenvalue-truncated pseudo-inverse of a symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct TruncatedPinv {
    vectors: DMatrix<f64>,
    inv_values: Vec<f64>,
    condition: f64,
}

impl TruncatedPinv {
    pub(crate) fn new(a: &DMatrix<f64>, rtol: f64) -> Self {
        let eig = SymmetricEigen::new(a.clone());
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let thr = rtol * max;
        let mut kept_min = f64::INFINITY;
        let inv_values = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                if l > thr && l > 0.0 {
                    kept_min = kept_min.min(l);
                    1.0 / l
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            vectors: eig.eigenvectors,
            inv_values,
            condition: max / kept_min,
        }
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut proj = self.vectors.tr_mul(b);
        for (p, w) in proj.iter_mut().zip(&self.inv_values) {
            *p *= w;
        }
        &self.vectors * proj
    }
}

/// Symmetric PSD solver: pivoted Cholesky with a pseudo-inverse fallback.
#[derive(Debug, Clone)]
pub(crate) enum PsdSolver {
    Cholesky(PivotedCholesky),
    Pseudo(TruncatedPinv),
}

impl PsdSolver {
    pub(crate) fn new(a: &DMatrix<f64>) -> Self {
        match PivotedCholesky::new(a) {
            Some(c) => PsdSolver::Cholesky(c),
            None => PsdSolver::Pseudo(TruncatedPinv::new(a, PINV_RTOL)),
        }
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            PsdSolver::Cholesky(c) => c.solve(b),
            PsdSolver::Pseudo(p) => p.solve(b),
        }
    }

    pub(crate) fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            out.set_column(c, &self.solve(&b.column(c).into_owned()));
        }
        out
    }

    pub(crate) fn condition_estimate(&self) -> f64 {
        match self {
            PsdSolver::Cholesky(c) => c.condition_estimate(),
            PsdSolver::Pseudo(p) => p.condition,
        }
    }

    pub(crate) fn is_fallback(&self) -> bool {
        matches!(self, PsdSolver::Pseudo(_))
    }
}

/// Least-squares solution of the (small) normal equations `G x = r`, with `G`
/// symmetric PSD.
pub(crate) fn solve_small_psd(g: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    PsdSolver::new(g).solve(r)
}
