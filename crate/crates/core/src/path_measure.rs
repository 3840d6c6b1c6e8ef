//! Markov path measures `ν^D_x` on the solenoid, through cylinder functions.
//!
//! A path is `x_0 = x, x_1, x_2, …` with `σ(x_{i+1}) = x_i`; the branch from
//! `x_i` to `x_{i+1}` carries weight `D(x_{i+1})`. The solenoid itself is never
//! stored.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::CircleMap;
use crate::scaling::ScalingEvaluator;
use crate::transfer::{FilterSystem, GridMeasure, Potential};
use crate::{constant_fn, CircleFn, Error, Result};

/// Branches whose total weight falls below this are treated as dead ends.
const DEGENERATE: f64 = 1e-15;

/// `f(x̲) = f_0(x_0) f_1(x_1) ⋯ f_d(x_d)`.
#[derive(Clone)]
pub struct CylinderFunction {
    factors: Vec<CircleFn>,
}

impl std::fmt::Debug for CylinderFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("depth", &self.depth())
            .finish_non_exhaustive()
    }
}

impl CylinderFunction {
    pub fn new(factors: Vec<CircleFn>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("a cylinder needs at least f_0".into()));
        }
        Ok(Self { factors })
    }

    /// The constant 1 at depth `d`.
    pub fn ones(d: usize) -> Self {
        Self {
            factors: vec![constant_fn(Complex64::new(1.0, 0.0)); d + 1],
        }
    }

    pub fn depth(&self) -> usize {
        self.factors.len() - 1
    }

    pub fn factors(&self) -> &[CircleFn] {
        &self.factors
    }

    /// Same function, one coordinate deeper.
    pub fn extended(&self) -> Self {
        let mut factors = self.factors.clone();
        factors.push(constant_fn(Complex64::new(1.0, 0.0)));
        Self { factors }
    }

    /// `∏ f_i(path_i)` over the first `depth + 1` coordinates.
    pub fn eval_path(&self, path: &[f64]) -> Complex64 {
        self.factors
            .iter()
            .zip(path)
            .map(|(f, &x)| f(x))
            .product()
    }

    /// `f ∘ σ_∞`: `g_0 = (f_0∘σ)·f_1`, `g_i = f_{i+1}`.
    pub fn shifted(&self, map: std::sync::Arc<CircleMap>) -> Self {
        let f0 = self.factors[0].clone();
        let head: CircleFn = if self.factors.len() > 1 {
            let f1 = self.factors[1].clone();
            crate::circle_fn(move |x| f0(map.sigma(x)) * f1(x))
        } else {
            crate::circle_fn(move |x| f0(map.sigma(x)))
        };
        let mut factors = vec![head];
        factors.extend(self.factors.iter().skip(2).cloned());
        Self { factors }
    }
}

/// `ν^D_x(f) = f_0 L_D(f_1 L_D(f_2 ⋯ L_D(f_d)))(x)`.
pub fn nu_cylinder(d: &Potential, map: &CircleMap, x: f64, f: &CylinderFunction) -> Complex64 {
    nested(d, map, x, f.factors())
}

fn nested(d: &Potential, map: &CircleMap, x: f64, factors: &[CircleFn]) -> Complex64 {
    let head = factors[0](x);
    if factors.len() == 1 || head == Complex64::new(0.0, 0.0) {
        return head;
    }
    let tail: Complex64 = map
        .fiber(x)
        .into_iter()
        .map(|y| {
            let w = d.eval(y);
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                w * nested(d, map, y, &factors[1..])
            }
        })
        .sum();
    head * tail
}

/// `μ∘ν^D` on a cylinder.
pub fn mu_infinity(mu: &GridMeasure, d: &Potential, map: &CircleMap, f: &CylinderFunction) -> Complex64 {
    mu.integrate(|x| nu_cylinder(d, map, x, f))
}

/// `∑_{σ(z)=x} D(z) ν_z(f∘σ_∞) - ν_x(f)`, in modulus.
pub fn check_muinfty_shift(
    d: &Potential,
    map: std::sync::Arc<CircleMap>,
    x: f64,
    f: &CylinderFunction,
) -> f64 {
    let g = f.shifted(map.clone());
    let lhs: Complex64 = map
        .fiber(x)
        .into_iter()
        .map(|z| d.eval(z) * nu_cylinder(d, &map, z, &g))
        .sum();
    (lhs - nu_cylinder(d, &map, x, f)).norm()
}

/// A sampled backward path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub path: Vec<f64>,
    /// `∑ ln D(x_i)`, `i ≥ 1`: the log-probability of the chosen branches.
    pub log_weight: f64,
    pub seed: u64,
    pub index: u64,
}

impl PathSample {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Random generator for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One backward path of length `depth`, choosing root `y` with probability `D(y)`.
pub fn sample_backward(d: &Potential, map: &CircleMap, x: f64, depth: usize, seed: u64) -> Result<PathSample> {
    sample_indexed(d, map, x, depth, seed, 0)
}

fn sample_indexed(d: &Potential, map: &CircleMap, x: f64, depth: usize, seed: u64, index: u64) -> Result<PathSample> {
    let mut rng = path_rng(seed, index);
    let mut path = Vec::with_capacity(depth + 1);
    path.push(x);
    let mut log_weight = 0.0;
    let mut current = x;
    for _ in 0..depth {
        let roots = map.fiber(current);
        let weights: Vec<f64> = roots.iter().map(|&y| d.eval(y).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > DEGENERATE) {
            return Err(Error::DegenerateFiber { x: current });
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w;
            pick = Some(k);
            if target < acc {
                break;
            }
        }
        let k = pick.expect("positive total weight has a positive branch");
        log_weight += weights[k].ln();
        current = roots[k];
        path.push(current);
    }
    Ok(PathSample {
        path,
        log_weight,
        seed,
        index,
    })
}

/// `count` independent paths; path `i` uses stream `i` of the seed, so the
/// result does not depend on the thread count.
pub fn sample_paths(
    d: &Potential,
    map: &CircleMap,
    x: f64,
    depth: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<PathSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_indexed(d, map, x, depth, seed, i))
        .collect()
}

/// Sample mean of `f` over `count` paths and its standard error.
pub fn monte_carlo_cylinder(
    d: &Potential,
    map: &CircleMap,
    x: f64,
    f: &CylinderFunction,
    count: usize,
    seed: u64,
) -> Result<(Complex64, f64)> {
    let values: Vec<Complex64> = sample_paths(d, map, x, f.depth(), seed, count)?
        .iter()
        .map(|p| f.eval_path(&p.path))
        .collect();
    let n = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Smallest branch weight `D(y)` over the fibers of the given points.
pub fn min_branch_weight(d: &Potential, map: &CircleMap, xs: &[f64]) -> f64 {
    xs.par_iter()
        .map(|&x| map.fiber(x).into_iter().map(|y| d.eval(y)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// `ν_x` of the point on the standard section: `∏_{i≥1} D(x_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomMass {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `∏_{i=1}^d D(x_i)` along the standard-root orbit, without a tail bound.
pub fn atom_mass_product(fs: &FilterSystem, x: f64, depth: usize) -> f64 {
    let map = fs.map();
    let mut current = x;
    let mut prod = 1.0;
    for _ in 0..depth {
        current = map.lift_inverse(current);
        prod *= fs.d(current);
    }
    prod
}

/// Atom mass with bounds: `D ≤ 1` gives the upper bound, the `ln D` slope
/// constant gives the lower one. Both are widened by the accumulated rounding.
pub fn atom_mass(ev: &ScalingEvaluator, x: f64, depth: usize) -> Result<AtomMass> {
    if !(-0.5..0.5).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "atom mass needs x in [-1/2, 1/2), got {x}"
        )));
    }
    let fs = ev.filter_system();
    let map = fs.map();
    let mut current = x;
    let mut prod = 1.0;
    for _ in 0..depth {
        current = map.lift_inverse(current);
        prod *= fs.d(current);
    }
    // one rounding per factor and per product step
    let rounding = 4.0 * depth as f64 * f64::EPSILON * prod;
    let lower = prod * (-ev.log_tail_bound_d(current)).exp() - rounding;
    Ok(AtomMass {
        value: prod,
        lower,
        upper: prod + rounding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_fn;
    use crate::transfer::{fundamental_potential, grid_points};
    use crate::trig::TrigPoly;
    use crate::TAU;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn haar() -> (FilterSystem, Potential) {
        let fs = FilterSystem::haar();
        let d = fs.d_potential();
        (fs, d)
    }

    fn trig_cylinder(seed: u64, depth: usize) -> CylinderFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CylinderFunction::new((0..=depth).map(|_| TrigPoly::random(&mut rng, 3).to_fn()).collect()).unwrap()
    }

    #[test]
    fn probability_and_trivial_depth() {
        let (fs, d) = haar();
        for x in [0.0, 0.21, -0.4] {
            assert!((nu_cylinder(&d, fs.map(), x, &CylinderFunction::ones(4)) - 1.0).norm() < 1e-14);
        }
        let f0 = TrigPoly::monomial(3).to_fn();
        let f = CylinderFunction::new(vec![f0.clone()]).unwrap();
        assert_eq!(nu_cylinder(&d, fs.map(), 0.3, &f), f0(0.3));
    }

    #[test]
    fn depth_one_matches_branch_sum() {
        let (fs, d) = haar();
        let bump = circle_fn(|y: f64| Complex64::new(if (y - 0.0).abs() < 0.05 || y > 0.95 { 1.0 } else { 0.0 }, 0.0));
        let f = CylinderFunction::new(vec![constant_fn(Complex64::new(1.0, 0.0)), bump.clone()]).unwrap();
        let brute: Complex64 = [0.0, 0.5].iter().map(|&y| (TAU * y / 2.0).cos().powi(2) * bump(y)).sum();
        assert!((nu_cylinder(&d, fs.map(), 0.0, &f) - brute).norm() < 1e-15);
        assert!((brute - 1.0).norm() < 1e-15);
    }

    #[test]
    fn depth_consistency() {
        let (fs, d) = haar();
        let f = trig_cylinder(1, 3);
        let a = nu_cylinder(&d, fs.map(), 0.17, &f);
        let b = nu_cylinder(&d, fs.map(), 0.17, &f.extended());
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn sampler_examples() {
        let (fs, d) = haar();
        let p = sample_backward(&d, fs.map(), 0.0, 12, 7).unwrap();
        assert!(p.path.iter().all(|&x| x == 0.0));
        assert!((p.weight() - 1.0).abs() < 1e-14);
        let again = sample_backward(&d, fs.map(), 0.0, 12, 7).unwrap();
        assert_eq!(p, again);
        let map = CircleMap::constant(3).unwrap();
        let uniform = fundamental_potential(&map);
        let paths = sample_paths(&uniform, &map, 0.3, 1, 99, 30_000).unwrap();
        let roots = map.fiber(0.3);
        for r in roots {
            let hits = paths.iter().filter(|p| p.path[1] == r).count() as f64 / 30_000.0;
            assert!((hits - 1.0 / 3.0).abs() < 4.0 * (2.0f64 / 9.0 / 30_000.0).sqrt());
        }
        for p in &paths {
            assert!((map.sigma(p.path[1]) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_never_takes_dead_branches() {
        let (fs, d) = haar();
        // over x = 0 the branch 1/2 has weight cos²(π/2) = 0
        let paths = sample_paths(&d, fs.map(), 0.0, 1, 3, 2000).unwrap();
        assert!(paths.iter().all(|p| p.path[1] == 0.0));
        let zero = Potential::constant(0.0);
        assert!(matches!(
            sample_backward(&zero, fs.map(), 0.1, 2, 0),
            Err(Error::DegenerateFiber { .. })
        ));
    }

    #[test]
    fn branch_frequencies_match_weights() {
        let (fs, d) = haar();
        let x = 0.3;
        let n = 100_000;
        let paths = sample_paths(&d, fs.map(), x, 1, 2024, n).unwrap();
        for y in fs.map().fiber(x) {
            let p = d.eval(y);
            let freq = paths.iter().filter(|s| s.path[1] == y).count() as f64 / n as f64;
            assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq} vs {p}");
        }
    }

    #[test]
    fn monte_carlo_matches_nested_transfer() {
        let (fs, d) = haar();
        let f = trig_cylinder(4, 3);
        let exact = nu_cylinder(&d, fs.map(), 0.3, &f);
        let (mean, se) = monte_carlo_cylinder(&d, fs.map(), 0.3, &f, 100_000, 77).unwrap();
        assert!((mean - exact).norm() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn sample_paths_is_thread_independent() {
        let (fs, d) = haar();
        let a = sample_paths(&d, fs.map(), 0.2, 5, 11, 64).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample_paths(&d, fs.map(), 0.2, 5, 11, 64).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn atom_masses() {
        let (fs, _) = haar();
        let ev = ScalingEvaluator::with_defaults(fs.clone()).unwrap();
        let at0 = atom_mass(&ev, 0.0, 30).unwrap();
        assert!((at0.value - 1.0).abs() < 1e-14);
        let a = atom_mass(&ev, 0.3, 40).unwrap();
        let s = (std::f64::consts::PI * 0.3).sin() / (std::f64::consts::PI * 0.3);
        assert!(a.lower <= s * s + 1e-15 && s * s <= a.upper + 1e-15);
        assert!((a.value - 0.73684).abs() < 1e-5);
        for x in grid_points(256) {
            let a = atom_mass(&ev, x, 60).unwrap();
            let p = ev.phi(x).unwrap();
            assert!((a.value - p.value.norm_sqr()).abs() <= 2.0 * p.error_bound + (a.upper - a.lower) + 1e-14);
        }
        let frac = FilterSystem::fractal();
        assert!(atom_mass_product(&frac, 0.2, 60) < 1e-10);
    }

    #[test]
    fn mu_infinity_examples() {
        let (fs, d) = haar();
        let mu = GridMeasure::uniform(256);
        assert!((mu_infinity(&mu, &d, fs.map(), &CylinderFunction::ones(3)) - 1.0).norm() < 1e-14);
        let f0 = TrigPoly::new(vec![(0, Complex64::new(0.5, 0.0)), (2, Complex64::new(1.0, 0.0))]).to_fn();
        let f = CylinderFunction::new(vec![f0.clone()]).unwrap();
        assert!((mu_infinity(&mu, &d, fs.map(), &f) - 0.5).norm() < 1e-14);
        // depth 1, f_1 = |m|²: ∫ L_D(|m|²) dμ by direct double quadrature
        let m = fs.filter_fn().clone();
        let m2 = circle_fn(move |x| Complex64::new(m(x).norm_sqr(), 0.0));
        let f = CylinderFunction::new(vec![constant_fn(Complex64::new(1.0, 0.0)), m2.clone()]).unwrap();
        let direct: f64 = grid_points(256)
            .iter()
            .map(|&x| {
                let (y0, y1) = (x / 2.0, x / 2.0 + 0.5);
                (fs.d(y0) * m2(y0).re + fs.d(y1) * m2(y1).re) / 256.0
            })
            .sum();
        assert!((mu_infinity(&mu, &d, fs.map(), &f).re - direct).abs() < 1e-10);
    }

    #[test]
    fn fullness_criterion() {
        let (fs, d) = haar();
        assert!(min_branch_weight(&d, fs.map(), &[0.0]) < 1e-30);
        let near_half = circle_fn(|y: f64| Complex64::new(if (y - 0.5).abs() < 0.01 { 1.0 } else { 0.0 }, 0.0));
        let f = CylinderFunction::new(vec![constant_fn(Complex64::new(1.0, 0.0)), near_half]).unwrap();
        assert!(nu_cylinder(&d, fs.map(), 0.0, &f).norm() < 1e-30);
        let full = fundamental_potential(fs.map());
        assert!(min_branch_weight(&full, fs.map(), &grid_points(64)) > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn shift_invariance(seed in 0u64..1000, x in -0.5f64..0.5, depth in 1usize..4) {
            let (fs, d) = haar();
            let f = trig_cylinder(seed, depth);
            prop_assert!(check_muinfty_shift(&d, fs.map().clone(), x, &f) < 1e-10);
        }

        #[test]
        fn nonnegative_and_monotone(c in prop::collection::vec(0.0f64..1.0, 3), x in -0.5f64..0.5) {
            let fs = FilterSystem::fractal();
            let d = fs.d_potential();
            let mk = |a: f64| circle_fn(move |y: f64| Complex64::new(a * (1.0 + (TAU * y).cos()), 0.0));
            let f = CylinderFunction::new(vec![mk(c[0]), mk(c[1]), mk(c[2])]).unwrap();
            let g = CylinderFunction::new(vec![mk(c[0]), mk(c[1] + 0.5), mk(c[2])]).unwrap();
            let vf = nu_cylinder(&d, fs.map(), x, &f).re;
            let vg = nu_cylinder(&d, fs.map(), x, &g).re;
            prop_assert!(vf >= 0.0);
            prop_assert!(vg >= vf - 1e-15);
        }
    }

    #[test]
    fn shift_on_blaschke_system() {
        let a = Complex64::new(0.2, 0.0);
        let fs = FilterSystem::blaschke_admissible(
            crate::dynamics::BlaschkeParams::new(Complex64::new(1.0, 0.0), vec![a, a]),
            512,
        )
        .unwrap();
        let d = fs.d_potential();
        let f = trig_cylinder(8, 2);
        let map: Arc<CircleMap> = fs.map().clone();
        assert!(check_muinfty_shift(&d, map, 0.31, &f) < 1e-12);
    }
}
