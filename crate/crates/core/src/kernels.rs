//! Complex kernels, pseudo-kernels and the augmented real kernel.
//!
//! A complex/real RKHS of complex-valued functions is characterised by a pair
//! `(k, c)`: a Hermitian positive definite complex kernel `k` and a symmetric
//! pseudo-kernel `c`. Numerically everything is carried out on the augmented
//! input space `S × {RE, IM}`, where the pair induces the real kernel
//!
//! ```text
//! k̃((s,RE),(s0,RE)) = ½ Re[k + c]      k̃((s,RE),(s0,IM)) = ½ Im[c − k]
//! k̃((s,IM),(s0,IM)) = ½ Re[k − c]      k̃((s,IM),(s0,RE)) = ½ Im[k + c]
//! ```
//!
//! All kernel values carry the scale `σ²` from [`KernelParams`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParams(String),
    #[error("point {s} lies outside the half-plane Re(s) > -{alpha}")]
    Domain { s: Complex64, alpha: f64 },
    #[error("kernel is only defined on the frequency axis, got {0}")]
    OffAxis(Complex64),
}

/// A point of the Laplace domain, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint(pub Complex64);

impl LaplacePoint {
    pub fn new(value: Complex64) -> Self {
        Self(value)
    }

    /// The point `iω` on the frequency axis.
    pub fn on_axis(omega: f64) -> Self {
        Self(Complex64::new(0.0, omega))
    }

    #[inline]
    pub fn value(self) -> Complex64 {
        self.0
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self(self.0.conj())
    }

    pub fn is_on_axis(self) -> bool {
        self.0.re == 0.0
    }
}

impl From<Complex64> for LaplacePoint {
    fn from(value: Complex64) -> Self {
        Self(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    alpha: f64,
    sigma2: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, sigma2: f64) -> Result<Self, KernelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(KernelError::InvalidParams(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(KernelError::InvalidParams(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(Self { alpha, sigma2 })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Real or imaginary channel of the augmented input space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPoint {
    pub s: LaplacePoint,
    pub part: Part,
}

impl AugmentedPoint {
    pub fn new(s: LaplacePoint, part: Part) -> Self {
        Self { s, part }
    }
}

fn check_half_plane(s: Complex64, alpha: f64) -> Result<(), KernelError> {
    if s.re > -alpha {
        Ok(())
    } else {
        Err(KernelError::Domain { s, alpha })
    }
}

/// Szegö kernel of the Hardy space on `Re(s) > -α`:
/// `σ² / (2π (2α + s + conj(s0)))`.
pub fn szego_k(
    s: LaplacePoint,
    s0: LaplacePoint,
    p: &KernelParams,
) -> Result<Complex64, KernelError> {
    check_half_plane(s.0, p.alpha)?;
    check_half_plane(s0.0, p.alpha)?;
    Ok(szego_unchecked(s.0, s0.0.conj(), p))
}

/// Symmetry pseudo-kernel of the Szegö kernel: `σ² / (2π (2α + s + s0))`.
pub fn szego_c(
    s: LaplacePoint,
    s0: LaplacePoint,
    p: &KernelParams,
) -> Result<Complex64, KernelError> {
    check_half_plane(s.0, p.alpha)?;
    check_half_plane(s0.0, p.alpha)?;
    Ok(szego_unchecked(s.0, s0.0, p))
}

#[inline]
fn szego_unchecked(a: Complex64, b: Complex64, p: &KernelParams) -> Complex64 {
    let den = 2.0 * PI * (2.0 * p.alpha + (a + b));
    Complex64::new(p.sigma2, 0.0) / den
}

/// Frequency-domain stable-spline kernel evaluated at `(iω, iω0)`.
pub fn stable_spline_k(w: f64, w0: f64, p: &KernelParams) -> Result<Complex64, KernelError> {
    Ok(stable_spline_unchecked(
        Complex64::new(0.0, w),
        Complex64::new(0.0, -w0),
        p,
    ))
}

// `a` is the first argument, `b` the conjugate of the second one.
#[inline]
fn stable_spline_unchecked(a: Complex64, b: Complex64, p: &KernelParams) -> Complex64 {
    let al = p.alpha;
    let one = Complex64::new(1.0, 0.0);
    let bracket = one / (2.0 * al + a) + one / (2.0 * al + b)
        - one / (3.0 * (3.0 * al + a))
        - one / (3.0 * (3.0 * al + b));
    0.5 * p.sigma2 * bracket / (3.0 * al + a + b)
}

/// Squared-exponential kernel `σ² exp(-(w - w0)² / (2ℓ²))`.
pub fn se_kernel(w: f64, w0: f64, lengthscale: f64, sigma2: f64) -> Result<f64, KernelError> {
    if !(lengthscale > 0.0) || !(sigma2 > 0.0) {
        return Err(KernelError::InvalidParams(format!(
            "lengthscale and sigma2 must be positive, got {lengthscale} and {sigma2}"
        )));
    }
    let d = (w - w0) / lengthscale;
    Ok(sigma2 * (-0.5 * d * d).exp())
}

/// Pseudo-kernel enforcing `f(conj(s)) = conj(f(s))`: `c(s, s0) = k(s, conj(s0))`.
pub fn pseudo_from_symmetry<F>(k: F) -> impl Fn(LaplacePoint, LaplacePoint) -> Complex64
where
    F: Fn(LaplacePoint, LaplacePoint) -> Complex64,
{
    move |s, s0| k(s, s0.conj())
}

/// One entry of the augmented real kernel from the values `k(s,s0)` and `c(s,s0)`.
#[inline]
pub fn augmented_entry(k: Complex64, c: Complex64, a: Part, b: Part) -> f64 {
    match (a, b) {
        (Part::Re, Part::Re) => 0.5 * (k.re + c.re),
        (Part::Im, Part::Im) => 0.5 * (k.re - c.re),
        (Part::Re, Part::Im) => 0.5 * (c.im - k.im),
        (Part::Im, Part::Re) => 0.5 * (k.im + c.im),
    }
}

/// The 2×2 block `[[RR, RI], [IR, II]]` of the augmented kernel.
#[inline]
pub fn augmented_block(k: Complex64, c: Complex64) -> [[f64; 2]; 2] {
    [
        [
            augmented_entry(k, c, Part::Re, Part::Re),
            augmented_entry(k, c, Part::Re, Part::Im),
        ],
        [
            augmented_entry(k, c, Part::Im, Part::Re),
            augmented_entry(k, c, Part::Im, Part::Im),
        ],
    ]
}

/// Recover `(k, c)` from an augmented block.
pub fn reconstruct_pair(block: [[f64; 2]; 2]) -> (Complex64, Complex64) {
    let [[rr, ri], [ir, ii]] = block;
    (
        Complex64::new(rr + ii, ir - ri),
        Complex64::new(rr - ii, ir + ri),
    )
}

/// A complex kernel together with its pseudo-kernel.
pub trait ComplexKernelPair {
    fn k(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError>;
    fn c(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError>;

    /// Both values at once; implementations may share work.
    fn kc(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<(Complex64, Complex64), KernelError> {
        Ok((self.k(s, s0)?, self.c(s, s0)?))
    }

    fn augmented(&self, u: AugmentedPoint, v: AugmentedPoint) -> Result<f64, KernelError> {
        let (k, c) = self.kc(u.s, v.s)?;
        Ok(augmented_entry(k, c, u.part, v.part))
    }
}

impl<T: ComplexKernelPair + ?Sized> ComplexKernelPair for &T {
    fn k(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        (**self).k(s, s0)
    }
    fn c(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        (**self).c(s, s0)
    }
    fn kc(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<(Complex64, Complex64), KernelError> {
        (**self).kc(s, s0)
    }
}

/// The augmented real kernel induced by a pair.
pub fn augmented_kernel<P: ComplexKernelPair>(
    pair: P,
) -> impl Fn(AugmentedPoint, AugmentedPoint) -> Result<f64, KernelError> {
    move |u, v| pair.augmented(u, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Szego,
    StableSpline,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Szego => "szego",
            KernelKind::StableSpline => "stable-spline",
        }
    }
}

/// Choice of pseudo-kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pseudo {
    /// `c ≡ 0`.
    Circular,
    /// `c(s, s0) = k(s, conj(s0))`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub kind: KernelKind,
    pub pseudo: Pseudo,
    pub params: KernelParams,
}

impl KernelPair {
    pub fn new(kind: KernelKind, pseudo: Pseudo, params: KernelParams) -> Self {
        Self {
            kind,
            pseudo,
            params,
        }
    }

    pub fn szego(pseudo: Pseudo, params: KernelParams) -> Self {
        Self::new(KernelKind::Szego, pseudo, params)
    }

    pub fn with_params(self, params: KernelParams) -> Self {
        Self { params, ..self }
    }

    pub fn is_symmetric(&self) -> bool {
        self.pseudo == Pseudo::Symmetric
    }

    fn check(&self, s: LaplacePoint) -> Result<(), KernelError> {
        match self.kind {
            KernelKind::Szego => check_half_plane(s.0, self.params.alpha),
            KernelKind::StableSpline if s.is_on_axis() => Ok(()),
            KernelKind::StableSpline => Err(KernelError::OffAxis(s.0)),
        }
    }

    // Both kernels depend on (s, conj(s0)) only through an analytic function
    // g(a, b); k = g(s, conj(s0)) and the symmetry pseudo-kernel is g(s, s0).
    #[inline]
    fn raw(&self, a: Complex64, b: Complex64) -> Complex64 {
        match self.kind {
            KernelKind::Szego => szego_unchecked(a, b, &self.params),
            KernelKind::StableSpline => stable_spline_unchecked(a, b, &self.params),
        }
    }
}

impl ComplexKernelPair for KernelPair {
    fn k(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        self.check(s)?;
        self.check(s0)?;
        Ok(self.raw(s.0, s0.0.conj()))
    }

    fn c(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<Complex64, KernelError> {
        self.check(s)?;
        self.check(s0)?;
        Ok(match self.pseudo {
            Pseudo::Circular => Complex64::new(0.0, 0.0),
            Pseudo::Symmetric => self.raw(s.0, s0.0),
        })
    }

    fn kc(&self, s: LaplacePoint, s0: LaplacePoint) -> Result<(Complex64, Complex64), KernelError> {
        self.check(s)?;
        self.check(s0)?;
        let k = self.raw(s.0, s0.0.conj());
        let c = match self.pseudo {
            Pseudo::Circular => Complex64::new(0.0, 0.0),
            Pseudo::Symmetric => self.raw(s.0, s0.0),
        };
        Ok((k, c))
    }
}
