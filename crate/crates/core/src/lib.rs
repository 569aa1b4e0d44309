//! Kernel interpolation of complex-valued frequency response functions.
//!
//! The crate is organised in layers:
//!
//! - [`kernels`]: the Szegö kernel of the shifted right half-plane, the
//!   frequency-domain stable-spline kernel, their symmetry pseudo-kernels and
//!   the real-valued kernel they induce on the augmented input space
//!   `points × {RE, IM}`.
//! - [`interpolate`]: minimum-norm interpolation in a complex/real RKHS via the
//!   augmented real formulation, with an optional linear mean profiled by
//!   generalized least squares, plus a closed-form widely-linear predictor
//!   used as an independent cross-check.
//! - [`hybrid`]: Gaussian-process model with a rational mean made of
//!   conjugate pole pairs, penalized likelihood tuning, backward pole
//!   elimination and the stabilized leave-one-out selection criterion.
//! - [`baselines`]: AAA, separate real/imaginary squared-exponential
//!   interpolation and Chebyshev polynomial interpolation.
//! - [`bench`]: analytic test systems (low-order rational functions, random
//!   RLC circuits), the RMSE metric and convergence studies.
//!
//! ```
//! use frfkit_core::bench::f_rat;
//! use frfkit_core::interpolate::{fit_kernel, validate_training, ComplexSample, TrainingSet};
//! use frfkit_core::kernels::{KernelKind, KernelPair, KernelParams, LaplacePoint, Pseudo};
//!
//! let samples = (0..20)
//!     .map(|i| {
//!         let w = i as f64 / 19.0;
//!         ComplexSample::new(w, f_rat(w))
//!     })
//!     .collect();
//! let ts = validate_training(TrainingSet::new(samples).unwrap(), true).unwrap();
//! let pair = KernelPair::new(KernelKind::Szego, Pseudo::Symmetric, KernelParams::new(0.1, 1.0).unwrap());
//! let model = fit_kernel(&ts, pair).unwrap();
//! let g = model.predict(LaplacePoint::on_axis(0.5)).unwrap();
//! assert!((g - f_rat(0.5)).norm() < 1e-3);
//! ```

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod hybrid;
pub mod interpolate;
pub mod kernels;
mod linalg;
pub mod optimize;

pub use num_complex::Complex64;

pub use baselines::{AaaModel, ChebyshevInterpolant, SeparateSeModel};
pub use bench::{CircuitSpec, Grid};
pub use hybrid::{HybridConfig, HyperParams, PolePair, SelectionReport};
pub use interpolate::{ComplexSample, FittedModel, TrainingSet, ValidatedTraining};
pub use kernels::{KernelKind, KernelPair, KernelParams, LaplacePoint, Pseudo};
