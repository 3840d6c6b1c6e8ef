//! Hilbert-space layer: the isometry `S̃`, its range projections `Ẽ_n`, the
//! solenoid model with the unitary `Ũ` and the projections `𝔼_j`, and the
//! embedding `R_n` into `L²(ℝ)`.
//!
//! Solenoid vectors are pairs `(d, g)` standing for `ξ(x̲) = g(x_d)`, with
//! `‖(d, g)‖² = ∫ L_D^d(|g|²) dμ_ψ`. In these coordinates
//!
//! * `(d, g) ≅ (d + 1, g∘σ)`,
//! * `Ũ(d, g) = (d - 1, (m∘σ^{d-1})·g)` for `d ≥ 1` (embed first when `d = 0`),
//! * `Ũ⁻¹(d, g) = (d + 1, g/(m∘σ^d))`, zero where `|m∘σ^d|` is below the null threshold,
//! * `𝔼₀(d, g) = (0, L_D^d g)`, the orthogonal projection onto depth-0 vectors:
//!   `⟨(d, g), (0, h)⟩ = ∫ L_D^d(g·h̄∘σ^d) dμ = ∫ L_D^d(g)·h̄ dμ`.
//!
//! `Ũ` preserves norms because `∫ L_D^k(h) dμ = ∫ |m_k|² h dμ` with
//! `m_k = ∏_{i<k} m∘σ^i`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::CircleMap;
use crate::scaling::ScalingEvaluator;
use crate::transfer::{transfer_pow, FilterSystem, GridMeasure, Potential};
use crate::{circle_fn, CircleFn};

/// Values of `|m|` below this are treated as zeros when dividing.
pub const NULL_EPS: f64 = 1e-13;

/// `L²(𝕋, μ)` through a grid measure.
#[derive(Clone, Debug)]
pub struct HilbertGridSpace {
    mu: GridMeasure,
}

impl HilbertGridSpace {
    pub fn new(mu: GridMeasure) -> Self {
        Self { mu }
    }

    pub fn uniform(m: usize) -> Self {
        Self::new(GridMeasure::uniform(m))
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.mu
    }

    /// `∑ w_j f(x_j) conj(g(x_j))`.
    pub fn inner(&self, f: &CircleFn, g: &CircleFn) -> Complex64 {
        self.mu.integrate(|x| f(x) * g(x).conj())
    }

    pub fn norm(&self, f: &CircleFn) -> f64 {
        self.mu.integrate_real(|x| f(x).norm_sqr()).sqrt()
    }

    /// `‖f - g‖`.
    pub fn distance(&self, f: &CircleFn, g: &CircleFn) -> f64 {
        self.mu.integrate_real(|x| (f(x) - g(x)).norm_sqr()).sqrt()
    }
}

/// `m_n(x) = ∏_{i<n} m(σ^i x)`.
pub fn m_n(fs: &FilterSystem, x: f64, n: usize) -> Complex64 {
    let map = fs.map();
    let mut acc = Complex64::new(1.0, 0.0);
    let mut y = x;
    for _ in 0..n {
        acc *= fs.m(y);
        y = map.sigma(y);
    }
    acc
}

/// `S̃f(z) = m(z) f(σ(z))`.
pub fn s_apply(fs: &FilterSystem, f: CircleFn) -> CircleFn {
    let fs = fs.clone();
    circle_fn(move |x| fs.m(x) * f(fs.map().sigma(x)))
}

/// `S̃*g = L_ψ(m̄ g)`.
pub fn s_adjoint(fs: &FilterSystem, g: CircleFn) -> CircleFn {
    s_adjoint_pow(fs, g, 1)
}

/// `(S̃*)^n g`, evaluated as `n` nested fiber sums.
pub fn s_adjoint_pow(fs: &FilterSystem, g: CircleFn, n: usize) -> CircleFn {
    if n == 0 {
        return g;
    }
    let fs = fs.clone();
    circle_fn(move |x| adjoint_nested(&fs, &*g, n, x))
}

fn adjoint_nested(fs: &FilterSystem, g: &dyn Fn(f64) -> Complex64, n: usize, x: f64) -> Complex64 {
    if n == 0 {
        return g(x);
    }
    fs.map()
        .fiber(x)
        .into_iter()
        .map(|y| {
            let w = fs.psi().eval(y) * fs.m(y).conj();
            if w == Complex64::new(0.0, 0.0) {
                w
            } else {
                w * adjoint_nested(fs, g, n - 1, y)
            }
        })
        .sum()
}

/// `S̃^n f(x) = m_n(x) f(σ^n x)`.
pub fn s_pow(fs: &FilterSystem, f: CircleFn, n: usize) -> CircleFn {
    if n == 0 {
        return f;
    }
    let fs = fs.clone();
    circle_fn(move |x| m_n(&fs, x, n) * f(fs.map().sigma_pow(x, n)))
}

/// `Ẽ_n f = S̃^n (S̃*)^n f`.
pub fn e_n_apply(fs: &FilterSystem, f: CircleFn, n: usize) -> CircleFn {
    s_pow(fs, s_adjoint_pow(fs, f, n), n)
}

/// `Ẽ_n f(x) = m_n(x) L_ψ^n(m̄_n f)(σ^n x)`, the kernel form.
pub fn e_n_closed(fs: &FilterSystem, f: CircleFn, n: usize) -> CircleFn {
    if n == 0 {
        return f;
    }
    let fs = fs.clone();
    circle_fn(move |x| {
        let h = |y: f64| m_n(&fs, y, n).conj() * f(y);
        m_n(&fs, x, n) * transfer_pow(fs.psi(), fs.map(), &h, n, fs.map().sigma_pow(x, n))
    })
}

/// `𝐄_n^D a = (L_D^n a) ∘ σ^n`.
pub fn d_expectation(fs: &FilterSystem, a: CircleFn, n: usize) -> CircleFn {
    crate::transfer::cond_expectation(&fs.d_potential(), fs.map().clone(), a, n)
}

/// The sequence `‖Ẽ_n f‖`, `n = 0..=n_max`, with purity indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct PurenessReport {
    pub norms: Vec<f64>,
    pub nonincreasing: bool,
    /// Least-squares slope of `ln ‖Ẽ_n f‖` against `n` over the nonzero terms.
    pub decay_rate: Option<f64>,
    pub crossed_threshold: bool,
    /// `μ({x : |m(x)| ≠ 1})` on the grid.
    pub non_unimodular_mass: f64,
    /// Whether the sufficient condition for purity holds.
    pub pure: bool,
}

/// `‖Ẽ_n f‖ = ‖(S̃*)^n f‖`, since `S̃^n` is isometric.
pub fn pureness_diagnostic(
    fs: &FilterSystem,
    space: &HilbertGridSpace,
    f: &CircleFn,
    n_max: usize,
    threshold: f64,
) -> PurenessReport {
    let norms: Vec<f64> = (0..=n_max)
        .map(|n| space.norm(&s_adjoint_pow(fs, f.clone(), n)))
        .collect();
    let nonincreasing = norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-300)
        .map(|(n, &v)| (n as f64, v.ln()))
        .collect();
    let decay_rate = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let non_unimodular_mass = space
        .measure()
        .integrate_real(|x| if (fs.m(x).norm() - 1.0).abs() > 1e-9 { 1.0 } else { 0.0 });
    PurenessReport {
        crossed_threshold: norms.iter().any(|&v| v < threshold),
        nonincreasing,
        decay_rate,
        pure: non_unimodular_mass > 0.0,
        non_unimodular_mass,
        norms,
    }
}

/// Cache values by the exact bits of the argument. Nested projections are
/// evaluated on the same finite set of grid points and fiber points over and
/// over, so this turns an exponential cost into a linear one.
fn memoize<F>(f: F) -> CircleFn
where
    F: Fn(f64) -> Complex64 + Send + Sync + 'static,
{
    let cache: Mutex<HashMap<u64, Complex64>> = Mutex::new(HashMap::new());
    circle_fn(move |x| {
        if let Some(v) = cache.lock().expect("cache lock").get(&x.to_bits()) {
            return *v;
        }
        let v = f(x);
        cache.lock().expect("cache lock").insert(x.to_bits(), v);
        v
    })
}

/// `ξ(x̲) = g(x_depth)`.
#[derive(Clone)]
pub struct SolenoidVector {
    pub depth: usize,
    pub g: CircleFn,
}

impl std::fmt::Debug for SolenoidVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolenoidVector")
            .field("depth", &self.depth)
            .finish_non_exhaustive()
    }
}

impl SolenoidVector {
    pub fn new(depth: usize, g: CircleFn) -> Self {
        Self { depth, g }
    }
}

/// `L²(𝕋_∞, μ_∞)` as the inductive limit of depth-`d` copies of `L²(𝕋, μ)`.
#[derive(Clone, Debug)]
pub struct SolenoidSpace {
    fs: FilterSystem,
    d: Potential,
    mu: GridMeasure,
}

impl SolenoidSpace {
    /// `μ` must be invariant for the dual of `L_ψ`.
    pub fn new(fs: FilterSystem, mu: GridMeasure) -> Self {
        let d = fs.d_potential();
        Self { fs, d, mu }
    }

    pub fn filter_system(&self) -> &FilterSystem {
        &self.fs
    }

    fn map(&self) -> &Arc<CircleMap> {
        self.fs.map()
    }

    /// `(d, g) ↦ (d + 1, g∘σ)`.
    pub fn embed(&self, v: &SolenoidVector) -> SolenoidVector {
        let map = self.map().clone();
        let g = v.g.clone();
        SolenoidVector::new(v.depth + 1, circle_fn(move |x| g(map.sigma(x))))
    }

    /// Same vector at depth `target ≥ v.depth`.
    pub fn lift_to(&self, v: &SolenoidVector, target: usize) -> SolenoidVector {
        assert!(target >= v.depth, "cannot lower depth {} to {target}", v.depth);
        let k = target - v.depth;
        if k == 0 {
            return v.clone();
        }
        let map = self.map().clone();
        let g = v.g.clone();
        SolenoidVector::new(target, circle_fn(move |x| g(map.sigma_pow(x, k))))
    }

    pub fn inner(&self, a: &SolenoidVector, b: &SolenoidVector) -> Complex64 {
        let depth = a.depth.max(b.depth);
        let (a, b) = (self.lift_to(a, depth), self.lift_to(b, depth));
        let h = |y: f64| (a.g)(y) * (b.g)(y).conj();
        self.mu.integrate(|x| transfer_pow(&self.d, self.map(), &h, depth, x))
    }

    pub fn norm(&self, v: &SolenoidVector) -> f64 {
        self.inner(v, v).re.max(0.0).sqrt()
    }

    pub fn sub(&self, a: &SolenoidVector, b: &SolenoidVector) -> SolenoidVector {
        let depth = a.depth.max(b.depth);
        let (a, b) = (self.lift_to(a, depth), self.lift_to(b, depth));
        SolenoidVector::new(depth, circle_fn(move |x| (a.g)(x) - (b.g)(x)))
    }

    pub fn distance(&self, a: &SolenoidVector, b: &SolenoidVector) -> f64 {
        self.norm(&self.sub(a, b))
    }

    /// `Ũ(d, g) = (d - 1, (m∘σ^{d-1})·g)`.
    pub fn u_apply(&self, v: &SolenoidVector) -> SolenoidVector {
        let v = if v.depth == 0 { self.embed(v) } else { v.clone() };
        let k = v.depth - 1;
        let fs = self.fs.clone();
        let g = v.g;
        SolenoidVector::new(k, circle_fn(move |x| fs.m(fs.map().sigma_pow(x, k)) * g(x)))
    }

    /// `Ũ⁻¹(d, g) = (d + 1, g/(m∘σ^d))`, masked on the zeros of `m∘σ^d`.
    pub fn u_inverse(&self, v: &SolenoidVector) -> SolenoidVector {
        let k = v.depth;
        let fs = self.fs.clone();
        let g = v.g.clone();
        SolenoidVector::new(
            k + 1,
            circle_fn(move |x| {
                let m = fs.m(fs.map().sigma_pow(x, k));
                if m.norm() <= NULL_EPS {
                    Complex64::new(0.0, 0.0)
                } else {
                    g(x) / m
                }
            }),
        )
    }

    /// `Ũ^k` for `k ∈ ℤ`.
    pub fn u_pow(&self, v: &SolenoidVector, k: i64) -> SolenoidVector {
        let mut out = v.clone();
        for _ in 0..k.unsigned_abs() {
            out = if k > 0 { self.u_apply(&out) } else { self.u_inverse(&out) };
        }
        out
    }

    /// `𝔼₀(d, g) = (0, L_D^d g)`.
    pub fn e0(&self, v: &SolenoidVector) -> SolenoidVector {
        if v.depth == 0 {
            return v.clone();
        }
        let (d, map, g, k) = (self.d.clone(), self.map().clone(), v.g.clone(), v.depth);
        SolenoidVector::new(0, memoize(move |x| transfer_pow(&d, &map, &*g, k, x)))
    }

    /// `𝔼_j = Ũ^j 𝔼₀ Ũ^{-j}`.
    pub fn proto_projection(&self, j: i64, v: &SolenoidVector) -> SolenoidVector {
        self.u_pow(&self.e0(&self.u_pow(v, -j)), j)
    }
}

/// Residuals of the proto-MRA relations on one vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtoResiduals {
    /// `max ‖𝔼_i𝔼_j v - 𝔼_{max(i,j)} v‖` and the same for `𝔼_j𝔼_i`.
    pub nesting: f64,
    /// `max ‖Ũ*𝔼_jŨ v - 𝔼_{j-1} v‖`.
    pub conjugation: f64,
    /// `|‖Ũv‖ - ‖v‖|`.
    pub unitarity: f64,
    /// `‖v - 𝔼_{-d} v‖` for `v` of depth `d`.
    pub exhaustion: f64,
}

/// Check the proto-MRA relations for `j` in `js` on the vector `v`.
pub fn proto_mra_residuals(space: &SolenoidSpace, v: &SolenoidVector, js: &[i64]) -> ProtoResiduals {
    let mut nesting: f64 = 0.0;
    let mut conjugation: f64 = 0.0;
    for &i in js {
        let ei = space.proto_projection(i, v);
        for &j in js {
            let e_max = space.proto_projection(i.max(j), v);
            let eji = space.proto_projection(j, &ei);
            nesting = nesting.max(space.distance(&eji, &e_max));
        }
        let lhs = space.u_inverse(&space.proto_projection(i, &space.u_apply(v)));
        let rhs = space.proto_projection(i - 1, v);
        conjugation = conjugation.max(space.distance(&lhs, &rhs));
    }
    let unitarity = (space.norm(&space.u_apply(v)) - space.norm(v)).abs();
    let exhaustion = space.distance(v, &space.proto_projection(-(v.depth as i64), v));
    ProtoResiduals {
        nesting,
        conjugation,
        unitarity,
        exhaustion,
    }
}

/// Summary of the generalized-MRA structure with `V_j = range 𝔼_{-j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmraReport {
    /// `max ‖𝔼_{-j}𝔼_{-j-1} v - 𝔼_{-j} v‖`: `V_j ⊂ V_{j+1}`.
    pub increasing: f64,
    /// `max ‖v - 𝔼_{-j} v‖` over `j ≥ depth(v)`.
    pub exhaustion: f64,
    /// `‖Ẽ_n 1‖` sequence; decay to 0 witnesses `⋂ V_j = {0}`.
    pub intersection: PurenessReport,
    pub pass: bool,
}

pub fn gmra_check(
    space: &SolenoidSpace,
    hilbert: &HilbertGridSpace,
    vectors: &[SolenoidVector],
    levels: i64,
    n_max: usize,
    tol: f64,
) -> GmraReport {
    let mut increasing: f64 = 0.0;
    let mut exhaustion: f64 = 0.0;
    for v in vectors {
        for j in -levels..levels {
            let inner = space.proto_projection(-j, v);
            let both = space.proto_projection(-j, &space.proto_projection(-j - 1, v));
            increasing = increasing.max(space.distance(&both, &inner));
        }
        for j in v.depth as i64..=v.depth as i64 + 1 {
            exhaustion = exhaustion.max(space.distance(v, &space.proto_projection(-j, v)));
        }
    }
    let one = crate::constant_fn(Complex64::new(1.0, 0.0));
    let intersection = pureness_diagnostic(space.filter_system(), hilbert, &one, n_max, 1e-3);
    let pass = increasing < tol && exhaustion < tol && intersection.pure;
    GmraReport {
        increasing,
        exhaustion,
        intersection,
        pass,
    }
}

/// Trapezoid rule on `[-X, X]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealLineGrid {
    pub x_max: f64,
    pub h: f64,
    intervals: usize,
}

impl RealLineGrid {
    /// The step is adjusted so that `2X` is an integer number of steps.
    pub fn new(x_max: f64, h: f64) -> Self {
        let intervals = (2.0 * x_max / h).round().max(1.0) as usize;
        Self {
            x_max,
            h: 2.0 * x_max / intervals as f64,
            intervals,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|k| -self.x_max + k as f64 * self.h)
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|k| if k == 0 || k == self.intervals { 0.5 * self.h } else { self.h })
            .collect()
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let w = self.weights();
        self.points()
            .par_iter()
            .zip(w.par_iter())
            .map(|(&x, &w)| w * f(x))
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }
}

/// `𝔘ξ(x) = √φ(x) ξ(F(x))`.
pub fn u_real_apply<F>(map: &CircleMap, xi: &F, x: f64) -> Complex64
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    map.phi(x).sqrt() * xi(map.antiderivative(x))
}

/// Backward orbit of a real point with the scaling function along it.
#[derive(Clone, Debug)]
pub struct OrbitTable {
    pub orbit: Vec<f64>,
    pub phi_tilde: Vec<Complex64>,
    /// `c_n = (φ(x_1)⋯φ(x_n))^{-1/2}`.
    pub scale: Vec<f64>,
}

/// The isometries `R_n : L²(𝕋, μ_ψ) → L²(ℝ)`,
/// `R_n f(x) = (φ(x_1)⋯φ(x_n))^{-1/2} f(x_n) φ̃(x_n)`.
#[derive(Clone, Debug)]
pub struct MallatEmbedding {
    ev: ScalingEvaluator,
}

impl MallatEmbedding {
    pub fn new(ev: ScalingEvaluator) -> Self {
        Self { ev }
    }

    pub fn evaluator(&self) -> &ScalingEvaluator {
        &self.ev
    }

    pub fn table(&self, x: f64, n_max: usize) -> OrbitTable {
        let (orbit, values) = self.ev.orbit_values(x, n_max);
        let map = self.ev.filter_system().map();
        let mut scale = vec![1.0; n_max + 1];
        for k in 1..=n_max {
            scale[k] = scale[k - 1] / map.phi(orbit[k]).sqrt();
        }
        OrbitTable {
            orbit,
            phi_tilde: values.iter().map(|v| v.value).collect(),
            scale,
        }
    }

    pub fn r_n_from_table<F>(table: &OrbitTable, f: &F, n: usize) -> Complex64
    where
        F: Fn(f64) -> Complex64 + ?Sized,
    {
        table.scale[n] * f(table.orbit[n]) * table.phi_tilde[n]
    }

    pub fn r_n_apply<F>(&self, f: &F, n: usize, x: f64) -> Complex64
    where
        F: Fn(f64) -> Complex64 + ?Sized,
    {
        Self::r_n_from_table(&self.table(x, n), f, n)
    }

    /// `‖R_n f‖²` for every `f` and `n ≤ n_max`, indexed `[n][f]`.
    pub fn norms_sq(&self, fs: &[CircleFn], n_max: usize, grid: &RealLineGrid) -> Vec<Vec<f64>> {
        let points = grid.points();
        let weights = grid.weights();
        let partial: Vec<Vec<f64>> = points
            .par_iter()
            .zip(weights.par_iter())
            .map(|(&x, &w)| {
                let t = self.table(x, n_max);
                (0..=n_max)
                    .flat_map(|n| {
                        let t = &t;
                        fs.iter().map(move |f| w * Self::r_n_from_table(t, &**f, n).norm_sqr())
                    })
                    .collect()
            })
            .collect();
        let k = fs.len();
        (0..=n_max)
            .map(|n| {
                (0..k)
                    .map(|i| partial.iter().map(|row| row[n * k + i]).sum())
                    .collect()
            })
            .collect()
    }

    /// `‖R_n f‖²` with the window scaled to level `n`: `[-X N^n, X N^n]` with
    /// step `h φ_min^n`. Since `‖R_n f‖² = ∫ |f φ̃|²` after substituting the
    /// `n`-th standard root, this keeps the truncation in the argument of `φ̃`
    /// at roughly `[-X, X]` and its step below `h`. Indexed `[n][f]`.
    pub fn norms_sq_scaled(&self, fs: &[CircleFn], n_max: usize, x_max: f64, h: f64) -> Vec<Vec<f64>> {
        let map = self.ev.filter_system().map();
        let big_n = map.degree() as f64;
        (0..=n_max)
            .map(|n| {
                let grid = RealLineGrid::new(x_max * big_n.powi(n as i32), h * map.phi_min().powi(n as i32));
                let points = grid.points();
                let weights = grid.weights();
                let rows: Vec<Vec<f64>> = points
                    .par_iter()
                    .zip(weights.par_iter())
                    .map(|(&x, &w)| {
                        let t = self.table(x, n);
                        fs.iter().map(|f| w * Self::r_n_from_table(&t, &**f, n).norm_sqr()).collect()
                    })
                    .collect();
                (0..fs.len()).map(|i| rows.iter().map(|r| r[i]).sum()).collect()
            })
            .collect()
    }

    /// `max_x |R_{n+1}(S̃f)(x) - R_n f(x)|`.
    pub fn intertwining_residual(&self, f: &CircleFn, n: usize, xs: &[f64]) -> f64 {
        let sf = s_apply(self.ev.filter_system(), f.clone());
        xs.par_iter()
            .map(|&x| {
                let t = self.table(x, n + 1);
                (Self::r_n_from_table(&t, &*sf, n + 1) - Self::r_n_from_table(&t, &**f, n)).norm()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max_x |𝔘(R_{n+1} f)(x) - R_n f(x)|`.
    pub fn dilation_residual(&self, f: &CircleFn, n: usize, xs: &[f64]) -> f64 {
        let map = self.ev.filter_system().map();
        xs.par_iter()
            .map(|&x| {
                let lhs = u_real_apply(map, &|y| self.r_n_apply(&**f, n + 1, y), x);
                (lhs - self.r_n_apply(&**f, n, x)).norm()
            })
            .reduce(|| 0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BlaschkeParams;
    use crate::transfer::grid_points;
    use crate::trig::TrigPoly;
    use crate::{constant_fn, TAU};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randoms(seed: u64, count: usize, degree: i64) -> Vec<CircleFn> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| TrigPoly::random(&mut rng, degree).to_fn()).collect()
    }

    fn blaschke() -> FilterSystem {
        let a = Complex64::new(0.2, 0.0);
        FilterSystem::blaschke_admissible(BlaschkeParams::new(Complex64::new(1.0, 0.0), vec![a, a]), 1024).unwrap()
    }

    #[test]
    fn s_is_isometric() {
        let space = HilbertGridSpace::uniform(1024);
        for fs in [FilterSystem::haar(), FilterSystem::fractal()] {
            for f in randoms(1, 10, 4) {
                let sf = s_apply(&fs, f.clone());
                assert!((space.norm(&sf) - space.norm(&f)).abs() < 1e-10);
            }
        }
        let one = constant_fn(Complex64::new(1.0, 0.0));
        let s1 = s_apply(&FilterSystem::haar(), one);
        assert!((s1(0.2) - FilterSystem::haar().m(0.2)).norm() < 1e-15);
    }

    #[test]
    fn s_on_blaschke_is_isometric_for_lebesgue() {
        let fs = blaschke();
        let space = HilbertGridSpace::uniform(2048);
        for f in randoms(2, 4, 3) {
            let sf = s_apply(&fs, f.clone());
            assert!((space.norm(&sf) - space.norm(&f)).abs() < 1e-10);
        }
    }

    #[test]
    fn adjoint_examples() {
        let one = constant_fn(Complex64::new(1.0, 0.0));
        for fs in [FilterSystem::haar(), FilterSystem::fractal()] {
            let s1 = s_adjoint(&fs, one.clone());
            for x in grid_points(16) {
                assert!((s1(x) - std::f64::consts::FRAC_1_SQRT_2).norm() < 1e-14);
            }
        }
        let fs = FilterSystem::haar();
        let space = HilbertGridSpace::uniform(512);
        let fsv = randoms(3, 20, 4);
        for pair in fsv.chunks(2) {
            let (f, g) = (&pair[0], &pair[1]);
            let lhs = space.inner(&s_apply(&fs, f.clone()), g);
            let rhs = space.inner(f, &s_adjoint(&fs, g.clone()));
            assert!((lhs - rhs).norm() < 1e-10);
            let back = s_adjoint(&fs, s_apply(&fs, f.clone()));
            assert!(space.distance(&back, f) < 1e-10);
        }
    }

    #[test]
    fn covariance() {
        let fs = FilterSystem::fractal();
        let map = fs.map().clone();
        for f in randoms(4, 3, 3) {
            let a = TrigPoly::monomial(2).to_fn();
            let af = {
                let (a, f) = (a.clone(), f.clone());
                circle_fn(move |x| a(x) * f(x))
            };
            let lhs = s_apply(&fs, af);
            let sf = s_apply(&fs, f.clone());
            for x in grid_points(32) {
                let rhs = a(map.sigma(x)) * sf(x);
                assert!((lhs(x) - rhs).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn projections() {
        let fs = FilterSystem::haar();
        let space = HilbertGridSpace::uniform(512);
        let vs = randoms(5, 6, 4);
        for n in 0..=3 {
            for f in &vs {
                let e = e_n_apply(&fs, f.clone(), n);
                let closed = e_n_closed(&fs, f.clone(), n);
                assert!(space.distance(&e, &closed) < 1e-10);
                let ee = e_n_apply(&fs, e.clone(), n);
                assert!(space.distance(&ee, &e) < 1e-10);
                let g = &vs[0];
                let lhs = space.inner(&e, g);
                let rhs = space.inner(f, &e_n_apply(&fs, g.clone(), n));
                assert!((lhs - rhs).norm() < 1e-10);
                let next = e_n_apply(&fs, e.clone(), n + 1);
                assert!(space.distance(&next, &e_n_apply(&fs, f.clone(), n + 1)) < 1e-10);
            }
        }
        let f = &vs[1];
        assert!(space.distance(&e_n_apply(&fs, f.clone(), 0), f) < 1e-15);
    }

    #[test]
    fn compression_identity() {
        let fs = FilterSystem::fractal();
        let space = HilbertGridSpace::uniform(512);
        let fsv = randoms(6, 4, 3);
        for n in 1..=2 {
            for pair in fsv.chunks(2) {
                let (a, f) = (pair[0].clone(), pair[1].clone());
                let ef = e_n_apply(&fs, f.clone(), n);
                let a_ef = {
                    let (a, ef) = (a.clone(), ef.clone());
                    circle_fn(move |x| a(x) * ef(x))
                };
                let lhs = e_n_apply(&fs, a_ef, n);
                let ea = d_expectation(&fs, a, n);
                let rhs = circle_fn(move |x| ea(x) * ef(x));
                assert!(space.distance(&lhs, &rhs) < 1e-10);
            }
        }
    }

    #[test]
    fn pureness_sequences() {
        let space = HilbertGridSpace::uniform(64);
        let one = constant_fn(Complex64::new(1.0, 0.0));
        for fs in [FilterSystem::haar(), FilterSystem::fractal()] {
            let r = pureness_diagnostic(&fs, &space, &one, 8, 0.1);
            for (n, v) in r.norms.iter().enumerate() {
                assert!((v - 2f64.powf(-(n as f64) / 2.0)).abs() < 1e-10);
            }
            assert!(r.pure && r.nonincreasing && r.crossed_threshold);
            assert!((r.decay_rate.unwrap() + 0.5 * 2f64.ln()).abs() < 1e-9);
        }
        let shift = FilterSystem::unimodular_shift();
        let zbar = TrigPoly::monomial(-1).to_fn();
        let r = pureness_diagnostic(&shift, &space, &zbar, 8, 1e-2);
        assert!(r.norms.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(!r.pure && !r.crossed_threshold);
        assert!(r.non_unimodular_mass < 1e-15);
    }

    fn haar_space() -> SolenoidSpace {
        SolenoidSpace::new(FilterSystem::haar(), GridMeasure::uniform(256))
    }

    fn random_vector(seed: u64, depth: usize) -> SolenoidVector {
        SolenoidVector::new(depth, randoms(seed, 1, 3).remove(0))
    }

    #[test]
    fn solenoid_embedding_and_u() {
        let space = haar_space();
        let one = SolenoidVector::new(0, constant_fn(Complex64::new(1.0, 0.0)));
        let e = space.embed(&one);
        assert_eq!(e.depth, 1);
        assert!((space.norm(&e) - 1.0).abs() < 1e-12);
        let mut v = random_vector(9, 0);
        let n0 = space.norm(&v);
        for _ in 0..3 {
            v = space.embed(&v);
            assert!((space.norm(&v) - n0).abs() < 1e-10);
        }
        for depth in 0..=4 {
            let v = random_vector(10 + depth as u64, depth);
            assert!((space.norm(&space.u_apply(&v)) - space.norm(&v)).abs() < 1e-10);
            let back = space.u_apply(&space.u_inverse(&v));
            assert!(space.distance(&back, &v) < 1e-8);
            let back = space.u_inverse(&space.u_apply(&v));
            assert!(space.distance(&back, &v) < 1e-8);
        }
        assert!((space.norm(&space.u_apply(&one)) - 1.0).abs() < 1e-12);
        // Ũ on depth 0 is S̃
        let f = randoms(11, 1, 3).remove(0);
        let uf = space.u_apply(&SolenoidVector::new(0, f.clone()));
        assert_eq!(uf.depth, 0);
        let sf = s_apply(space.filter_system(), f);
        for x in grid_points(32) {
            assert!(((uf.g)(x) - sf(x)).norm() < 1e-14);
        }
        // Ũ⁻¹(0, 1) for Haar
        let inv = space.u_inverse(&one);
        assert!((space.norm(&inv) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unimodular_u_inverse_is_composition() {
        let space = SolenoidSpace::new(FilterSystem::unimodular_shift(), GridMeasure::uniform(128));
        let f = randoms(12, 1, 2).remove(0);
        let v = SolenoidVector::new(1, f.clone());
        let inv = space.u_inverse(&v);
        let map = space.filter_system().map().clone();
        for x in grid_points(16) {
            let expected = f(x) / crate::circle_point(map.sigma(x));
            assert!(((inv.g)(x) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn proto_mra_relations() {
        let space = haar_space();
        let js: Vec<i64> = (-2..=2).collect();
        for (k, depth) in [0usize, 1, 2].iter().enumerate() {
            let v = random_vector(20 + k as u64, *depth);
            let r = proto_mra_residuals(&space, &v, &js);
            assert!(r.nesting < 1e-10, "{r:?}");
            assert!(r.conjugation < 1e-10, "{r:?}");
            assert!(r.unitarity < 1e-10, "{r:?}");
            assert!(r.exhaustion < 1e-10, "{r:?}");
        }
        let f = SolenoidVector::new(0, randoms(30, 1, 3).remove(0));
        assert!(space.distance(&space.proto_projection(0, &f), &f) < 1e-12);
    }

    #[test]
    fn gmra_reports() {
        let space = haar_space();
        let hilbert = HilbertGridSpace::uniform(64);
        let vs: Vec<_> = (0..2).map(|k| random_vector(40 + k, k as usize)).collect();
        let r = gmra_check(&space, &hilbert, &vs, 2, 8, 1e-10);
        assert!(r.pass, "{r:?}");
        let shift = SolenoidSpace::new(FilterSystem::unimodular_shift(), GridMeasure::uniform(64));
        let r = gmra_check(&shift, &hilbert, &vs[..1], 1, 4, 1e-10);
        assert!(!r.intersection.pure && !r.pass);
    }

    #[test]
    fn real_line_grid() {
        let g = RealLineGrid::new(2.0, 0.01);
        assert!((g.h * 400.0 - 4.0).abs() < 1e-12);
        assert!((g.integrate(|x| x * x) - 16.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn dilation_on_real_line() {
        let map = CircleMap::constant(2).unwrap();
        let xi = |y: f64| Complex64::new((-y * y).exp(), 0.0);
        let v = u_real_apply(&map, &xi, 0.7);
        assert!((v - 2f64.sqrt() * xi(1.4)).norm() < 1e-15);
        assert_eq!(u_real_apply(&map, &|_| Complex64::new(0.0, 0.0), 0.3), Complex64::new(0.0, 0.0));
        let a = Complex64::new(0.2, 0.0);
        let b = CircleMap::blaschke(BlaschkeParams::new(Complex64::new(1.0, 0.0), vec![a, a])).unwrap();
        // indicator of [0, 1]: ∫ φ·1_{[0,1]}(F(x)) dx = 1
        let grid = RealLineGrid::new(1.0, 1e-5);
        let ind = |y: f64| Complex64::new(if (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 }, 0.0);
        let norm = grid.integrate(|x| u_real_apply(&b, &ind, x).norm_sqr());
        assert!((norm - 1.0).abs() < 1e-4);
    }

    #[test]
    fn mallat_embedding_haar() {
        let ev = ScalingEvaluator::with_defaults(FilterSystem::haar()).unwrap();
        let emb = MallatEmbedding::new(ev.clone());
        let one = constant_fn(Complex64::new(1.0, 0.0));
        assert!((emb.r_n_apply(&*one, 0, 0.3) - ev.phi_tilde(0.3).value).norm() < 1e-15);
        let fs = randoms(50, 2, 2);
        let xs: Vec<f64> = (0..64).map(|k| -20.0 + k as f64 * 0.63).collect();
        for n in 0..3 {
            for f in &fs {
                assert!(emb.intertwining_residual(f, n, &xs) < 1e-9);
                assert!(emb.dilation_residual(f, n, &xs) < 1e-8);
            }
        }
        let norms = emb.norms_sq(&fs, 2, &RealLineGrid::new(60.0, 1.0 / 32.0));
        for row in norms {
            for v in row {
                assert!((v.sqrt() - 1.0).abs() < 1e-2, "{v}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn isometry_random_coefficients(c in prop::collection::vec(-1.0f64..1.0, 6)) {
            let fs = FilterSystem::haar();
            let space = HilbertGridSpace::uniform(256);
            let p = TrigPoly::new(vec![
                (-1, Complex64::new(c[0], c[1])),
                (0, Complex64::new(c[2], c[3])),
                (2, Complex64::new(c[4], c[5])),
            ]);
            let f = p.to_fn();
            let sf = s_apply(&fs, f.clone());
            prop_assert!((space.norm(&sf) - p.l2_norm_sq().sqrt()).abs() < 1e-10);
            let x = c[0] * 0.5;
            let direct = fs.m(x) * p.eval(2.0 * x);
            prop_assert!((sf(x) - direct).norm() < 1e-14);
            let _ = TAU;
        }
    }
}
