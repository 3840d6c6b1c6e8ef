//! Potentials, transfer operators, filters and invariant measures.
//!
//! `L_ψ f(x) = ∑_{σ(y)=x} ψ(y) f(y)`. Quadrature grids use the cell midpoints
//! `x_j = (j + 1/2)/M - 1/2` of the partition of `[-1/2, 1/2)` into `M` cells.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{BlaschkeParams, CircleMap};
use crate::{circle_fn, circle_point, real_fn, wrap_centered, CircleFn, Error, RealFn, Result};

/// Grid size used when none is given.
pub const DEFAULT_GRID: usize = 1 << 12;

/// Threshold below which `L_ψ 1` or `ξ` counts as vanishing.
const VANISHING: f64 = 1e-14;

/// Midpoints of the `M` equal cells of `[-1/2, 1/2)`.
pub fn grid_points(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| (j as f64 + 0.5) / m as f64 - 0.5)
        .collect()
}

/// A nonnegative function on the circle used as a transfer-operator weight.
#[derive(Clone)]
pub struct Potential {
    f: RealFn,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential").finish_non_exhaustive()
    }
}

impl Potential {
    pub fn new(f: RealFn) -> Self {
        Self { f }
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(real_fn(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(move |_| c)
    }

    /// `ψ = 1/φ`, for which arc length is invariant under the dual of `L_ψ`.
    pub fn reciprocal_density(map: Arc<CircleMap>) -> Self {
        Self::from_fn(move |x| 1.0 / map.phi(x))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn as_fn(&self) -> RealFn {
        self.f.clone()
    }

    /// Minimum over the `M`-point grid.
    pub fn grid_min(&self, grid: usize) -> f64 {
        grid_points(grid)
            .into_par_iter()
            .map(|x| self.eval(x))
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn is_full(&self, grid: usize) -> bool {
        self.grid_min(grid) > 0.0
    }

    /// `max |L_ψ 1 - 1|` over the grid.
    pub fn unital_deviation(&self, map: &CircleMap, grid: usize) -> f64 {
        grid_points(grid)
            .into_par_iter()
            .map(|x| (transfer_real(self, map, &|_| 1.0, x) - 1.0).abs())
            .reduce(|| 0.0, f64::max)
    }

    pub fn is_unital(&self, map: &CircleMap, grid: usize) -> bool {
        self.unital_deviation(map, grid) < 1e-9
    }
}

/// `L_ψ f(x)`.
pub fn transfer_apply<F>(psi: &Potential, map: &CircleMap, f: &F, x: f64) -> Complex64
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    map.fiber(x).into_iter().map(|y| psi.eval(y) * f(y)).sum()
}

/// `L_ψ f(x)` for real `f`.
pub fn transfer_real<F>(psi: &Potential, map: &CircleMap, f: &F, x: f64) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    map.fiber(x).into_iter().map(|y| psi.eval(y) * f(y)).sum()
}

/// `L_ψ^n f(x) = ∑_{σ^n(y)=x} ψ(y)ψ(σy)⋯ψ(σ^{n-1}y) f(y)`.
pub fn transfer_pow<F>(psi: &Potential, map: &CircleMap, f: &F, n: usize, x: f64) -> Complex64
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if n == 0 {
        return f(x);
    }
    map.fiber(x)
        .into_iter()
        .map(|y| {
            let w = psi.eval(y);
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                w * transfer_pow(psi, map, f, n - 1, y)
            }
        })
        .sum()
}

/// Real version of [`transfer_pow`].
pub fn transfer_pow_real<F>(psi: &Potential, map: &CircleMap, f: &F, n: usize, x: f64) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if n == 0 {
        return f(x);
    }
    map.fiber(x)
        .into_iter()
        .map(|y| {
            let w = psi.eval(y);
            if w == 0.0 {
                0.0
            } else {
                w * transfer_pow_real(psi, map, f, n - 1, y)
            }
        })
        .sum()
}

/// `D₀ = ψ / (L_ψ 1 ∘ σ)`, which satisfies `L_{D₀} 1 = 1`.
pub fn normalize_potential(psi: &Potential, map: Arc<CircleMap>, grid: usize) -> Result<Potential> {
    let bad = grid_points(grid)
        .into_par_iter()
        .map(|x| (x, transfer_real(psi, &map, &|_| 1.0, x)))
        .find_any(|&(_, v)| !(v > VANISHING));
    if let Some((x, _)) = bad {
        return Err(Error::ImproperPotential { x });
    }
    let psi = psi.clone();
    Ok(Potential::from_fn(move |x| {
        let denom = transfer_real(&psi, &map, &|_| 1.0, map.sigma(x));
        psi.eval(x) / denom
    }))
}

/// `D₀ = 1/|σ^{-1}(σ(x))| = 1/N`.
pub fn fundamental_potential(map: &CircleMap) -> Potential {
    Potential::constant(1.0 / map.degree() as f64)
}

/// Result of checking `L_ψ(|m|²) = 1` on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterReport {
    pub max_deviation: f64,
    pub argmax: f64,
    pub pass: bool,
}

/// Check the filter identity `L_ψ(|m|²) ≡ 1` on the `M`-point grid.
pub fn is_filter(psi: &Potential, m: &CircleFn, map: &CircleMap, grid: usize, tol: f64) -> FilterReport {
    let (argmax, max_deviation) = grid_points(grid)
        .into_par_iter()
        .map(|x| {
            let v = transfer_real(psi, map, &|y| m(y).norm_sqr(), x);
            (x, (v - 1.0).abs())
        })
        .reduce(
            || (0.0, 0.0),
            |a, b| if b.1 > a.1 || b.1.is_nan() || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );
    FilterReport {
        max_deviation,
        argmax,
        pass: max_deviation < tol,
    }
}

/// A map together with a potential `ψ` and a `ψ`-filter `m`.
///
/// `u = √ψ·m` and `D = |u|² = ψ|m|²`.
#[derive(Clone)]
pub struct FilterSystem {
    map: Arc<CircleMap>,
    psi: Potential,
    m: CircleFn,
}

impl std::fmt::Debug for FilterSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterSystem")
            .field("map", &self.map)
            .finish_non_exhaustive()
    }
}

impl FilterSystem {
    /// Assemble without checking the filter identity.
    pub fn new_unchecked(map: Arc<CircleMap>, psi: Potential, m: CircleFn) -> Self {
        Self { map, psi, m }
    }

    /// Assemble and require `L_ψ(|m|²) = 1` within `tol` on the grid.
    pub fn new(map: Arc<CircleMap>, psi: Potential, m: CircleFn, grid: usize, tol: f64) -> Result<Self> {
        let report = is_filter(&psi, &m, &map, grid, tol);
        if !report.pass {
            return Err(Error::InvalidParameter(format!(
                "not a filter: max |L_psi(|m|^2) - 1| = {:e} at x = {}",
                report.max_deviation, report.argmax
            )));
        }
        Ok(Self { map, psi, m })
    }

    /// `σ(z) = z²`, `ψ = 1/2`, `m(z) = (1 + z)/√2`.
    pub fn haar() -> Self {
        let map = Arc::new(CircleMap::constant(2).expect("degree 2"));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = circle_fn(move |x| (1.0 + circle_point(x)) * s);
        Self::new_unchecked(map, Potential::constant(0.5), m)
    }

    /// `σ(z) = z³`, `ψ = 1/3`, `m(z) = (1 + z²)/√2`.
    pub fn fractal() -> Self {
        let map = Arc::new(CircleMap::constant(3).expect("degree 3"));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = circle_fn(move |x| (1.0 + circle_point(2.0 * x)) * s);
        Self::new_unchecked(map, Potential::constant(1.0 / 3.0), m)
    }

    /// Filter `m(z) = z` for `σ(z) = z²`, `ψ = 1/2`; `|m| ≡ 1`.
    pub fn unimodular_shift() -> Self {
        let map = Arc::new(CircleMap::constant(2).expect("degree 2"));
        Self::new_unchecked(map, Potential::constant(0.5), circle_fn(circle_point))
    }

    /// Blaschke dynamics with `ψ = 1/φ` and the filter obtained by normalizing
    /// `m_raw(z) = ∏_{k≥1} (z - e^{2πi r_k})`.
    pub fn blaschke_admissible(params: BlaschkeParams, grid: usize) -> Result<Self> {
        let map = Arc::new(CircleMap::blaschke(params)?);
        let psi = Potential::reciprocal_density(map.clone());
        let m_raw = root_filter(&map);
        make_filter(&psi, &m_raw, map, grid)
    }

    pub fn map(&self) -> &Arc<CircleMap> {
        &self.map
    }

    pub fn psi(&self) -> &Potential {
        &self.psi
    }

    pub fn filter_fn(&self) -> &CircleFn {
        &self.m
    }

    #[inline]
    pub fn m(&self, x: f64) -> Complex64 {
        (self.m)(x)
    }

    #[inline]
    pub fn u(&self, x: f64) -> Complex64 {
        self.psi.eval(x).sqrt() * self.m(x)
    }

    #[inline]
    pub fn d(&self, x: f64) -> f64 {
        self.psi.eval(x) * self.m(x).norm_sqr()
    }

    /// `D = ψ|m|²` as a potential.
    pub fn d_potential(&self) -> Potential {
        let psi = self.psi.clone();
        let m = self.m.clone();
        Potential::from_fn(move |x| psi.eval(x) * m(x).norm_sqr())
    }

    /// `u` as a callable.
    pub fn u_fn(&self) -> CircleFn {
        let psi = self.psi.clone();
        let m = self.m.clone();
        circle_fn(move |x| psi.eval(x).sqrt() * m(x))
    }

    pub fn filter_report(&self, grid: usize, tol: f64) -> FilterReport {
        is_filter(&self.psi, &self.m, &self.map, grid, tol)
    }
}

/// `m(z) = ∏_{k=1}^{N-1} (z - e^{2πi r_k})` over the nonzero roots of zero.
pub fn root_filter(map: &CircleMap) -> CircleFn {
    let zeros: Vec<Complex64> = map.zero_roots()[1..].iter().map(|&r| circle_point(r)).collect();
    circle_fn(move |x| {
        let z = circle_point(x);
        zeros.iter().map(|&w| z - w).product()
    })
}

/// `m = m_raw / √(ξ∘σ)` with `ξ = L_ψ(|m_raw|²)`.
pub fn make_filter(psi: &Potential, m_raw: &CircleFn, map: Arc<CircleMap>, grid: usize) -> Result<FilterSystem> {
    let xi = {
        let psi = psi.clone();
        let m_raw = m_raw.clone();
        let map = map.clone();
        move |x: f64| transfer_real(&psi, &map, &|y| m_raw(y).norm_sqr(), x)
    };
    let bad = grid_points(grid)
        .into_par_iter()
        .map(|x| (x, xi(x)))
        .find_any(|&(_, v)| !(v > VANISHING));
    if let Some((x, _)) = bad {
        return Err(Error::CannotNormalize { x });
    }
    let m = {
        let m_raw = m_raw.clone();
        let map = map.clone();
        circle_fn(move |x| m_raw(x) / xi(map.sigma(x)).sqrt())
    };
    FilterSystem::new(map, psi.clone(), m, grid, 1e-10)
}

/// Probability weights on the `M` midpoint cells of `[-1/2, 1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn uniform(m: usize) -> Self {
        Self {
            weights: vec![1.0 / m as f64; m],
        }
    }

    /// Weights must be nonnegative; they are rescaled to total mass 1.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights have zero mass".into()));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> Vec<f64> {
        grid_points(self.len())
    }

    /// `∑ w_j f(x_j)`.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        let m = self.len();
        self.weights
            .par_iter()
            .enumerate()
            .map(|(j, &w)| {
                if w == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    w * f((j as f64 + 0.5) / m as f64 - 0.5)
                }
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    pub fn integrate_real<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let m = self.len();
        self.weights
            .par_iter()
            .enumerate()
            .map(|(j, &w)| {
                if w == 0.0 {
                    0.0
                } else {
                    w * f((j as f64 + 0.5) / m as f64 - 0.5)
                }
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    /// `½ ∑ |w_j - v_j|`.
    pub fn tv_distance(&self, other: &GridMeasure) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Fixed point of the dual of `L_ψ`, by power iteration of an Ulam-type
/// discretization: cell `j` draws mass from the cells covered by `σ(C_j)`,
/// in proportion to the overlap, weighted by `ψ` at the cell midpoint.
pub fn invariant_measure(
    psi: &Potential,
    map: &CircleMap,
    grid: usize,
    max_iter: usize,
    tol: f64,
) -> Result<GridMeasure> {
    let points = grid_points(grid);
    if let Some(&x) = points.iter().find(|&&x| !(psi.eval(x) > 0.0)) {
        return Err(Error::NotFull {
            min: psi.eval(x),
            x,
        });
    }
    let h = 1.0 / grid as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..grid)
        .into_par_iter()
        .map(|j| {
            let a = j as f64 * h - 0.5;
            let (fa, fb) = (map.antiderivative(a), map.antiderivative(a + h));
            let w = psi.eval(points[j]);
            let first = ((fa + 0.5) * grid as f64).floor() as i64;
            let last = ((fb + 0.5) * grid as f64).ceil() as i64 - 1;
            (first..=last)
                .filter_map(|i| {
                    let lo = fa.max(i as f64 * h - 0.5);
                    let hi = fb.min((i + 1) as f64 * h - 0.5);
                    (hi > lo).then(|| (i.rem_euclid(grid as i64) as usize, w * (hi - lo) * grid as f64))
                })
                .collect()
        })
        .collect();
    let mut current = vec![h; grid];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next: Vec<f64> = rows
            .par_iter()
            .map(|row| row.iter().map(|&(i, w)| w * current[i]).sum())
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = 0.5 * next.iter().zip(&current).map(|(a, b)| (a - b).abs()).sum::<f64>();
        current = next;
        if residual < tol {
            return GridMeasure::from_weights(current);
        }
    }
    Err(Error::NoConvergence {
        what: "invariant measure power iteration",
        iterations: max_iter,
        residual,
    })
}

/// `|∫ L_ψ f dμ - ∫ f dμ|` for each test function.
pub fn check_invariance(mu: &GridMeasure, psi: &Potential, map: &CircleMap, tests: &[CircleFn]) -> Vec<f64> {
    tests
        .iter()
        .map(|f| {
            let lhs = mu.integrate(|x| transfer_apply(psi, map, &**f, x));
            let rhs = mu.integrate(|x| f(x));
            (lhs - rhs).norm()
        })
        .collect()
}

/// `𝐄_n f = (L_ψ^n f) ∘ σ^n`.
pub fn cond_expectation(psi: &Potential, map: Arc<CircleMap>, f: CircleFn, n: usize) -> CircleFn {
    if n == 0 {
        return f;
    }
    let psi = psi.clone();
    circle_fn(move |x| transfer_pow(&psi, &map, &*f, n, map.sigma_pow(x, n)))
}

/// Residuals of `∫ L^n(f) g dμ = ∫ f·(g∘σ^n) dμ` and of the symmetry
/// `∫ (L^n f ∘ σ^n) g dμ = ∫ f (L^n g ∘ σ^n) dμ`.
pub fn byparts_check(
    psi: &Potential,
    map: &CircleMap,
    mu: &GridMeasure,
    f: &CircleFn,
    g: &CircleFn,
    n: usize,
) -> (f64, f64) {
    let lhs1 = mu.integrate(|x| transfer_pow(psi, map, &**f, n, x) * g(x));
    let rhs1 = mu.integrate(|x| f(x) * g(map.sigma_pow(x, n)));
    let lhs2 = mu.integrate(|x| transfer_pow(psi, map, &**f, n, map.sigma_pow(x, n)) * g(x));
    let rhs2 = mu.integrate(|x| f(x) * transfer_pow(psi, map, &**g, n, map.sigma_pow(x, n)));
    ((lhs1 - rhs1).norm(), (lhs2 - rhs2).norm())
}

/// `Δ_ψ(x, k-l, y) = ψ(x)⋯ψ(σ^{k-1}x) / ψ(y)⋯ψ(σ^{l-1}y)`.
pub fn modular_cocycle(psi: &Potential, map: &CircleMap, x: f64, k: usize, l: usize, y: f64) -> Result<f64> {
    let (sx, sy) = (map.sigma_pow(x, k), map.sigma_pow(y, l));
    if wrap_centered(sx - sy).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "({x}, {k}, {l}, {y}) is not a groupoid element: σ^k x = {sx}, σ^l y = {sy}"
        )));
    }
    let prod = |mut z: f64, steps: usize| {
        let mut acc = 1.0;
        for _ in 0..steps {
            acc *= psi.eval(z);
            z = map.sigma(z);
        }
        acc
    };
    Ok(prod(x, k) / prod(y, l))
}
