//! QMF hypotheses and scaling functions as infinite products along backward orbits.
//!
//! `φ̃(x) = ∏_{n≥1} u(x_n)` with `F(x_{n+1}) = x_n`. Truncation after `d` factors
//! is controlled by `|ln u(x)| ≤ C_u |x|` near 0 and `|x_{n+1}| ≤ |x_n|/φ_min`,
//! which bound the log of the tail by `C_u |x_d| φ_min/(φ_min - 1)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::transfer::FilterSystem;
use crate::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 200;
pub const DEFAULT_TAIL: f64 = 1e-14;
/// Samples per side used to estimate the slope constants.
const SLOPE_SAMPLES: usize = 4096;

/// Outcome of the three QMF hypotheses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QmfReport {
    /// `||u(0)| - 1|`.
    pub mall1_deviation: f64,
    pub mall1: bool,
    /// `min |u|` over `|x| < r - 1/M`.
    pub mall2_min: f64,
    pub mall2: bool,
    /// Estimated `sup |ln D(x)|/|x|` over `1/M ≤ |x| ≤ r/2`.
    pub mall3_constant: f64,
    pub mall3: bool,
    pub expansive: bool,
    pub pass: bool,
}

/// Check the QMF hypotheses on an `M`-point window grid.
pub fn qmf_check(fs: &FilterSystem, grid: usize, tol: f64) -> QmfReport {
    let map = fs.map();
    let r = map.r_gap();
    let h = 1.0 / grid as f64;
    let mall1_deviation = (fs.u(0.0).norm() - 1.0).abs();
    let kmax = ((r - h) / h).ceil() as i64 - 1;
    let mall2_min = (-kmax..=kmax)
        .into_par_iter()
        .map(|k| fs.u(k as f64 * h).norm())
        .reduce(|| f64::INFINITY, f64::min);
    let mall3_constant = slope_sup(grid, r / 2.0, |x| fs.d(x).ln().abs());
    let mall1 = mall1_deviation < tol;
    let mall2 = mall2_min > 0.0;
    let mall3 = mall3_constant.is_finite();
    let expansive = map.is_expansive();
    QmfReport {
        mall1_deviation,
        mall1,
        mall2_min,
        mall2,
        mall3_constant,
        mall3,
        expansive,
        pass: mall1 && mall2 && mall3 && expansive,
    }
}

/// `sup g(x)/|x|` over `1/M ≤ |x| ≤ window`.
fn slope_sup<G>(grid: usize, window: f64, g: G) -> f64
where
    G: Fn(f64) -> f64 + Sync,
{
    let lo = 1.0 / grid as f64;
    if window <= lo {
        return 0.0;
    }
    (0..=SLOPE_SAMPLES)
        .into_par_iter()
        .flat_map_iter(|k| {
            let x = lo + (window - lo) * k as f64 / SLOPE_SAMPLES as f64;
            [x, -x]
        })
        .map(|x| {
            let v = g(x) / x.abs();
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// A scaling-function value with a bound on `|exact - value|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingValue {
    pub value: Complex64,
    pub error_bound: f64,
    /// Number of factors actually multiplied.
    pub depth: usize,
}

/// Evaluator for `φ̃` with adaptive truncation.
#[derive(Clone, Debug)]
pub struct ScalingEvaluator {
    fs: FilterSystem,
    max_depth: usize,
    tail_tol: f64,
    window: f64,
    c_u: f64,
    c3: f64,
    phi_min: f64,
    qmf: QmfReport,
}

impl ScalingEvaluator {
    /// Fails with [`Error::NoScalingFunction`] unless the QMF hypotheses hold.
    pub fn new(fs: FilterSystem, grid: usize, max_depth: usize, tail_tol: f64) -> Result<Self> {
        let qmf = qmf_check(&fs, grid, 1e-10);
        if !qmf.pass {
            return Err(Error::NoScalingFunction(format!(
                "QMF hypotheses fail: mall1 {} (||u(0)|-1| = {:e}), mall2 {}, mall3 {}, expansive {}",
                qmf.mall1, qmf.mall1_deviation, qmf.mall2, qmf.mall3, qmf.expansive
            )));
        }
        if (fs.u(0.0) - 1.0).norm() > 1e-10 {
            return Err(Error::NoScalingFunction(format!(
                "u(0) = {} has a nontrivial phase",
                fs.u(0.0)
            )));
        }
        let window = fs.map().r_gap() / 2.0;
        let c_u = slope_sup(grid, window, |x| fs.u(x).ln().norm());
        let phi_min = fs.map().phi_min();
        Ok(Self {
            max_depth,
            tail_tol,
            window,
            c_u,
            c3: qmf.mall3_constant,
            phi_min,
            qmf,
            fs,
        })
    }

    pub fn with_defaults(fs: FilterSystem) -> Result<Self> {
        Self::new(fs, crate::transfer::DEFAULT_GRID, DEFAULT_MAX_DEPTH, DEFAULT_TAIL)
    }

    pub fn filter_system(&self) -> &FilterSystem {
        &self.fs
    }

    pub fn qmf(&self) -> &QmfReport {
        &self.qmf
    }

    /// Estimated `sup |ln D(x)|/|x|` near 0.
    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// Estimated `sup |ln u(x)|/|x|` near 0.
    pub fn c_u(&self) -> f64 {
        self.c_u
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Bound on `|ln ∏_{i>d} u(x_i)|` given `x_d`, or infinity outside the window.
    pub fn log_tail_bound(&self, x_d: f64) -> f64 {
        self.slope_tail(self.c_u, x_d)
    }

    /// Bound on `|ln ∏_{i>d} D(x_i)|` given `x_d`.
    pub fn log_tail_bound_d(&self, x_d: f64) -> f64 {
        self.slope_tail(self.c3, x_d)
    }

    fn slope_tail(&self, c: f64, x_d: f64) -> f64 {
        if x_d.abs() > self.window {
            return f64::INFINITY;
        }
        c * x_d.abs() * self.phi_min / (self.phi_min - 1.0)
    }

    fn truncation_error(&self, partial: Complex64, x_d: f64) -> f64 {
        let b = self.log_tail_bound(x_d);
        partial.norm() * (b.exp_m1()).min(2.0)
    }

    /// `φ̃(x)` on `ℝ`, stopping once the tail bound drops below the tolerance.
    pub fn phi_tilde(&self, x: f64) -> ScalingValue {
        let map = self.fs.map();
        let mut partial = Complex64::new(1.0, 0.0);
        let mut current = x;
        let mut depth = 0;
        while depth < self.max_depth {
            if partial == Complex64::new(0.0, 0.0) {
                break;
            }
            if self.log_tail_bound(current) < self.tail_tol {
                break;
            }
            current = map.lift_inverse(current);
            partial *= self.fs.u(current);
            depth += 1;
        }
        ScalingValue {
            value: partial,
            error_bound: self.truncation_error(partial, current),
            depth,
        }
    }

    /// Exactly `d` factors of the product.
    pub fn phi_tilde_depth(&self, x: f64, d: usize) -> ScalingValue {
        let map = self.fs.map();
        let mut partial = Complex64::new(1.0, 0.0);
        let mut current = x;
        for _ in 0..d {
            current = map.lift_inverse(current);
            partial *= self.fs.u(current);
        }
        ScalingValue {
            value: partial,
            error_bound: self.truncation_error(partial, current),
            depth: d,
        }
    }

    /// `φ` on the circle, parametrized by `x ∈ [-1/2, 1/2)`.
    pub fn phi(&self, x: f64) -> Result<ScalingValue> {
        if !(-0.5..0.5).contains(&x) {
            return Err(Error::InvalidParameter(format!(
                "phi needs x in [-1/2, 1/2), got {x}"
            )));
        }
        Ok(self.phi_tilde(x))
    }

    /// Backward orbit `x_0..x_n` together with `φ̃(x_k)` for `k = 0..=n`, all
    /// sharing one truncation point.
    pub fn orbit_values(&self, x: f64, n: usize) -> (Vec<f64>, Vec<ScalingValue>) {
        let map = self.fs.map();
        let mut orbit = Vec::with_capacity(n + 1);
        orbit.push(x);
        for k in 0..n {
            orbit.push(map.lift_inverse(orbit[k]));
        }
        let last = self.phi_tilde(orbit[n]);
        let mut values = vec![last; n + 1];
        for k in (0..n).rev() {
            let u = self.fs.u(orbit[k + 1]);
            let next = values[k + 1];
            values[k] = ScalingValue {
                value: u * next.value,
                error_bound: u.norm() * next.error_bound,
                depth: next.depth + 1,
            };
        }
        (orbit, values)
    }
}

/// `I_m = ∫_{-N^m/2}^{N^m/2} |∏_{i=1}^m u(x_i)|² dx`, by the trapezoid rule over
/// one period of the (`N^m`-periodic) integrand with `per_unit` nodes per unit length.
pub fn truncated_im(fs: &FilterSystem, m: u32, per_unit: usize) -> f64 {
    let map = fs.map();
    let period = (map.degree() as f64).powi(m as i32);
    let nodes = (period * per_unit as f64) as usize;
    let h = period / nodes as f64;
    let total: f64 = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let mut x = -period / 2.0 + k as f64 * h;
            let mut prod = 1.0;
            for _ in 0..m {
                x = map.lift_inverse(x);
                prod *= fs.d(x);
            }
            prod
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    total * h
}

/// `∑_{|j|≤J} |φ̃(x + j)|²`.
pub fn partition_of_unity(ev: &ScalingEvaluator, x: f64, big_j: i64) -> f64 {
    (-big_j..=big_j)
        .into_par_iter()
        .map(|j| ev.phi_tilde(x + j as f64).value.norm_sqr())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// `∫_{-X}^{X} |φ̃|²` by the trapezoid rule with step `h`.
pub fn l2_norm_sq(ev: &ScalingEvaluator, x_max: f64, h: f64) -> f64 {
    let n = (2.0 * x_max / h).round() as i64;
    let step = 2.0 * x_max / n as f64;
    let inner: f64 = (0..=n)
        .into_par_iter()
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * ev.phi_tilde(-x_max + k as f64 * step).value.norm_sqr()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    inner * step
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BlaschkeParams;
    use crate::transfer::FilterSystem;
    use std::f64::consts::PI;

    fn sinc(x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        }
    }

    fn blaschke() -> FilterSystem {
        let a = Complex64::new(0.2, 0.0);
        FilterSystem::blaschke_admissible(BlaschkeParams::new(Complex64::new(1.0, 0.0), vec![a, a]), 1024).unwrap()
    }

    #[test]
    fn qmf_dichotomy() {
        let haar = qmf_check(&FilterSystem::haar(), 4096, 1e-10);
        assert!(haar.pass, "{haar:?}");
        let frac = qmf_check(&FilterSystem::fractal(), 4096, 1e-10);
        assert!(!frac.mall1 && !frac.pass);
        assert!((frac.mall1_deviation - (1.0 - (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
        let b = qmf_check(&blaschke(), 4096, 1e-10);
        assert!(b.pass, "{b:?}");
    }

    #[test]
    fn haar_closed_form_u() {
        let fs = FilterSystem::haar();
        for k in 0..50 {
            let x = -0.5 + k as f64 / 50.0;
            let expected = Complex64::from_polar((PI * x).cos(), PI * x);
            assert!((fs.u(x) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn fractal_has_no_scaling_function() {
        let err = ScalingEvaluator::with_defaults(FilterSystem::fractal()).unwrap_err();
        assert!(matches!(err, Error::NoScalingFunction(_)));
    }

    #[test]
    fn haar_matches_sinc() {
        let ev = ScalingEvaluator::with_defaults(FilterSystem::haar()).unwrap();
        assert_eq!(ev.phi(0.0).unwrap().value, Complex64::new(1.0, 0.0));
        let v = ev.phi(0.3).unwrap();
        assert!((v.value.norm_sqr() - sinc(0.3).powi(2)).abs() < 1e-12);
        assert!((v.value.norm_sqr() - 0.73684).abs() < 1e-5);
        for k in 0..=200 {
            let x = -8.0 + k as f64 * 0.08;
            let v = ev.phi_tilde_depth(x, 40);
            assert!((v.value.norm() - sinc(x).abs()).abs() < 1e-9, "x = {x}");
        }
        for j in [1.0, -1.0, 2.0, 5.0, -7.0] {
            assert!(ev.phi_tilde(j).value.norm() < 1e-15);
        }
    }

    #[test]
    fn error_bounds_cover_sinc_and_shrink_with_depth() {
        let ev = ScalingEvaluator::new(FilterSystem::haar(), 4096, 12, 1e-14).unwrap();
        for x in [0.1, -0.37, 2.4] {
            let v = ev.phi_tilde(x);
            assert!((v.value.norm() - sinc(x).abs()).abs() <= v.error_bound + 1e-15);
        }
        let mut last = f64::INFINITY;
        for d in [2, 4, 8, 16, 32, 64] {
            let ev = ScalingEvaluator::new(FilterSystem::haar(), 4096, d, 1e-14).unwrap();
            let b = ev.phi_tilde(0.41).error_bound;
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn scaling_relations() {
        for fs in [FilterSystem::haar(), blaschke()] {
            let ev = ScalingEvaluator::with_defaults(fs.clone()).unwrap();
            let map = fs.map();
            for k in 0..64 {
                let x = -3.0 + k as f64 * 0.0937;
                let lhs = ev.phi_tilde(map.antiderivative(x));
                let rhs = ev.phi_tilde(x);
                let resid = (lhs.value - fs.u(x) * rhs.value).norm();
                assert!(resid <= 2.0 * (lhs.error_bound + rhs.error_bound) + 1e-13, "x = {x}: {resid}");
            }
            // on the circle where σ(x) stays in the standard window
            for k in 0..64 {
                let x = -0.5 + k as f64 / 64.0;
                let fx = map.antiderivative(x);
                if fx.abs() < 0.5 {
                    let lhs = ev.phi(fx).unwrap().value;
                    assert!((lhs - fs.u(x) * ev.phi(x).unwrap().value).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn blaschke_scaling_function_vanishes_at_nonzero_integers() {
        let ev = ScalingEvaluator::with_defaults(blaschke()).unwrap();
        assert!((ev.phi_tilde(0.0).value - 1.0).norm() < 1e-15);
        for j in [1.0, 2.0, -1.0, 3.0] {
            assert!(ev.phi_tilde(j).value.norm() < 1e-12, "j = {j}");
        }
    }

    #[test]
    fn truncated_im_is_one() {
        let haar = FilterSystem::haar();
        assert!((truncated_im(&haar, 0, 64) - 1.0).abs() < 1e-15);
        for m in 1..=6 {
            assert!((truncated_im(&haar, m, 64) - 1.0).abs() < 1e-12);
        }
        let b = blaschke();
        for m in 1..=3 {
            assert!((truncated_im(&b, m, 256) - 1.0).abs() < 1e-8, "m = {m}");
        }
    }

    #[test]
    fn partition_and_norm() {
        let ev = ScalingEvaluator::with_defaults(FilterSystem::haar()).unwrap();
        assert!((partition_of_unity(&ev, 0.0, 0) - 1.0).abs() < 1e-15);
        assert!((partition_of_unity(&ev, 0.0, 50) - 1.0).abs() < 1e-15);
        let p = partition_of_unity(&ev, 0.3, 1000);
        assert!((p - 1.0).abs() < 5e-3);
        let n1 = l2_norm_sq(&ev, 20.0, 1.0 / 64.0);
        let n2 = l2_norm_sq(&ev, 100.0, 1.0 / 64.0);
        assert!(n1 <= n2 && n2 <= 1.0 + 1e-9);
        assert!((1.0 - n2) < 2.0 / (PI * PI * 100.0) * 1.1);
    }

    #[test]
    fn orbit_values_are_consistent() {
        let ev = ScalingEvaluator::with_defaults(blaschke()).unwrap();
        let (orbit, values) = ev.orbit_values(5.3, 4);
        for k in 0..=4 {
            let direct = ev.phi_tilde(orbit[k]);
            assert!((direct.value - values[k].value).norm() < 1e-12);
        }
    }
}
