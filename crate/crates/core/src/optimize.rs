//! Bound-constrained quasi-Newton minimization with finite-difference
//! gradients.
//!
//! Iterates live in the unit box `u ∈ [0, 1]ᵈ`, mapped affinely onto the
//! user's bounds, so coordinates with very different scales (a log-variance
//! next to a pole location in rad/s) are treated evenly. Gradients are
//! central differences in the original coordinates. Non-finite objective
//! values count as infeasible.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptOptions {
    pub max_iter: usize,
    /// Stop when `‖projected gradient‖∞ < gtol·(1 + |f|)`.
    pub gtol: f64,
    /// Stop when an accepted step lowers `f` by less than `ftol·max(|f|, 1)`.
    pub ftol: f64,
    pub rel_step: f64,
    pub abs_step: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gtol: 1e-6,
            ftol: 2.2e-9,
            rel_step: 1e-6,
            abs_step: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn to_x(u: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, &v)| lo[i] + v * (hi[i] - lo[i]))
        .collect()
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Gradient with respect to `u`.
fn gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    lo: &[f64],
    hi: &[f64],
    opts: &OptOptions,
) -> DVector<f64> {
    let d = x.len();
    let mut g = DVector::zeros(d);
    let mut xp = x.to_vec();
    for i in 0..d {
        let width = hi[i] - lo[i];
        if width <= 0.0 {
            continue;
        }
        let h = (opts.rel_step * x[i].abs())
            .max(opts.abs_step)
            .min(0.5 * width);
        let up = x[i] + h <= hi[i];
        let down = x[i] - h >= lo[i];
        let mut probe = |v: f64, xp: &mut Vec<f64>| {
            xp[i] = v;
            let r = eval(f, xp);
            xp[i] = x[i];
            r
        };
        let fp = if up {
            probe(x[i] + h, &mut xp)
        } else {
            f64::INFINITY
        };
        let fm = if down {
            probe(x[i] - h, &mut xp)
        } else {
            f64::INFINITY
        };
        let gx = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
        g[i] = gx * width;
    }
    g
}

fn projected(u: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(u.len(), |i, _| {
        if (u[i] <= 0.0 && g[i] > 0.0) || (u[i] >= 1.0 && g[i] < 0.0) {
            0.0
        } else {
            g[i]
        }
    })
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0` (clamped into the
/// box). Returns the best point found.
pub fn minimize_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptOptions,
) -> OptResult {
    let d = x0.len();
    assert!(
        lo.len() == d && hi.len() == d,
        "bounds must match the start point"
    );
    let mut u = DVector::from_fn(d, |i, _| {
        let w = hi[i] - lo[i];
        if w > 0.0 {
            ((x0[i] - lo[i]) / w).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    let mut x = to_x(&u, lo, hi);
    let mut fx = eval(&mut f, &x);
    if !fx.is_finite() || d == 0 {
        return OptResult {
            x,
            f: fx,
            iterations: 0,
            converged: d == 0 && fx.is_finite(),
        };
    }
    let mut g = gradient(&mut f, &x, fx, lo, hi, opts);
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut fresh = true;
    let mut first = true;

    for it in 0..opts.max_iter {
        let pg = projected(&u, &g);
        if pg.amax() < opts.gtol * (1.0 + fx.abs()) {
            return OptResult {
                x,
                f: fx,
                iterations: it,
                converged: true,
            };
        }
        // Variables held at a bound by the gradient are frozen this step.
        let free: Vec<bool> = (0..d)
            .map(|i| pg[i] != 0.0 || (u[i] > 0.0 && u[i] < 1.0))
            .collect();
        let mut dir = DVector::zeros(d);
        for i in 0..d {
            if free[i] {
                dir[i] = -(0..d)
                    .filter(|&j| free[j])
                    .map(|j| hinv[(i, j)] * g[j])
                    .sum::<f64>();
            }
        }
        if g.dot(&dir) >= 0.0 {
            hinv = DMatrix::identity(d, d);
            fresh = true;
            dir = -&pg;
        }
        let mut t = if first {
            (0.25 / dir.amax()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let un = (&u + &dir * t).map(|v| v.clamp(0.0, 1.0));
            let xn = to_x(&un, lo, hi);
            let fnew = eval(&mut f, &xn);
            let decrease = g.dot(&(&un - &u));
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease && fnew <= fx {
                accepted = Some((un, xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((un, xn, fnew)) = accepted else {
            if fresh {
                return OptResult {
                    x,
                    f: fx,
                    iterations: it,
                    converged: false,
                };
            }
            hinv = DMatrix::identity(d, d);
            fresh = true;
            continue;
        };
        let gn = gradient(&mut f, &xn, fnew, lo, hi, opts);
        let s = &un - &u;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if first {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        first = false;
        let stalled = fx - fnew <= opts.ftol * fx.abs().max(fnew.abs()).max(1.0);
        u = un;
        x = xn;
        fx = fnew;
        g = gn;
        if stalled {
            return OptResult {
                x,
                f: fx,
                iterations: it + 1,
                converged: true,
            };
        }
    }
    let pg = projected(&u, &g);
    let converged = pg.amax() < opts.gtol * (1.0 + fx.abs());
    OptResult {
        x,
        f: fx,
        iterations: opts.max_iter,
        converged,
    }
}
