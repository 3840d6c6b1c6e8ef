//! Generalized multiresolution analyses built from expansive maps of the circle.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: the circle map `σ(e^{2πix}) = e^{2πiF(x)}`, `F = ∫φ`, its roots,
//!   standard roots and backward orbits.
//! * [`transfer`]: potentials, transfer operators, filters, invariant measures and
//!   conditional expectations.
//! * [`scaling`]: QMF hypotheses and scaling functions as convergent infinite products.
//! * [`path_measure`]: the Markov path measures on the solenoid, cylinder by cylinder.
//! * [`cascade`]: the Hilbert-space layer (isometry, projections, solenoid model,
//!   proto-MRA and the embedding into `L²(ℝ)`).
//! * [`groupoid`]: exact sparse convolution calculus for power maps on rational points.
//!
//! Functions on the circle are represented as callables of an angle `x ∈ ℝ`
//! (period 1); grids appear only when something is integrated.

// `!(a < b)` is used on purpose so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod dynamics;
mod error;
pub mod groupoid;
pub mod path_measure;
pub mod scaling;
pub mod transfer;
pub mod trig;
pub mod verify;

use std::sync::Arc;

pub use num_complex::Complex64;

pub use error::{Error, Result};

/// Complex-valued function of an angle (period 1).
pub type CircleFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Real-valued function of an angle (period 1).
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub(crate) const TAU: f64 = std::f64::consts::TAU;

/// `e^{2πix}`.
#[inline]
pub fn circle_point(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x)
}

/// Reduce an angle to `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduce an angle to `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r >= 0.5 {
        -0.5
    } else {
        r
    }
}

/// Wrap a closure into a [`CircleFn`].
pub fn circle_fn<F>(f: F) -> CircleFn
where
    F: Fn(f64) -> Complex64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Wrap a closure into a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// The constant function `c` on the circle.
pub fn constant_fn(c: Complex64) -> CircleFn {
    Arc::new(move |_| c)
}
