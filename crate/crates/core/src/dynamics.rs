//! Expansive circle maps given by a positive density.
//!
//! A map is encoded by a 1-periodic density `φ > 0` with antiderivative
//! `F(x) = ∫_0^x φ`, `F(1) = N`, and acts by `σ(e^{2πix}) = e^{2πiF(x)}`.
//! Angles are reals; `[0, 1)` is used for fibers and `[-1/2, 1/2)` for
//! standard roots.

use num_complex::Complex64;

use crate::{circle_point, wrap_unit, Error, Result, TAU};

/// Width at which bracketing stops and Newton polishing takes over.
/// Nodes of the table of `F` on `[0, 1]` that brackets roots before Newton.
const INVERSE_TABLE: usize = 1024;
const MAX_BISECTION: usize = 200;
const MAX_NEWTON: usize = 60;

/// Tolerance on `F(1) - N` for sampled densities before renormalization.
const SAMPLED_INTEGER_TOL: f64 = 1e-6;

/// Self-check tolerance for `e^{2πiF(x)} = b(e^{2πix})`.
pub const BLASCHKE_SELF_CHECK_TOL: f64 = 1e-10;
const BLASCHKE_SELF_CHECK_POINTS: usize = 1 << 12;

/// Parameters of a finite Blaschke product `b(z) = C ∏ (z - a_k)/(1 - conj(a_k) z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlaschkeParams {
    pub c: Complex64,
    pub a: Vec<Complex64>,
}

impl BlaschkeParams {
    pub fn new(c: Complex64, a: Vec<Complex64>) -> Self {
        Self { c, a }
    }

    /// Direct evaluation of the product.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.a
            .iter()
            .fold(self.c, |acc, &ak| acc * (z - ak) / (1.0 - ak.conj() * z))
    }

    /// Sufficient condition for expansiveness: `∑ (1-|a_k|)/(1+|a_k|) > 1`.
    pub fn expansive_flag(&self) -> bool {
        self.expansion_lower_bound() > 1.0
    }

    /// `∑ (1-|a_k|)/(1+|a_k|)`, a lower bound for the density.
    pub fn expansion_lower_bound(&self) -> f64 {
        self.a
            .iter()
            .map(|ak| (1.0 - ak.norm()) / (1.0 + ak.norm()))
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.a.len() < 2 {
            return Err(Error::InvalidDegree(self.a.len() as i64));
        }
        if (self.c.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "Blaschke constant must be unimodular, |C| = {}",
                self.c.norm()
            )));
        }
        if let Some(ak) = self.a.iter().find(|ak| ak.norm() >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Blaschke zero {ak} is not inside the unit disc"
            )));
        }
        let dev = (self.eval(Complex64::new(1.0, 0.0)) - 1.0).norm();
        if dev >= 1e-12 {
            return Err(Error::Normalization(dev));
        }
        Ok(())
    }
}

/// Periodic monotone piecewise-cubic (PCHIP) interpolant on `[t_0, t_0 + 1)`.
#[derive(Clone, Debug)]
struct PeriodicPchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `∫_{t_0}^{t_i} p` for each knot, plus the full period at the end.
    cumulative: Vec<f64>,
}

impl PeriodicPchip {
    fn new(knots: Vec<f64>, values: Vec<f64>) -> Self {
        let n = knots.len();
        let widths: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    knots[i + 1] - knots[i]
                } else {
                    knots[0] + 1.0 - knots[n - 1]
                }
            })
            .collect();
        let width = |i: usize| widths[i];
        let secant = |i: usize| (values[(i + 1) % n] - values[i]) / width(i);
        let slopes = (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let (d0, d1) = (secant(prev), secant(i));
                if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (width(prev), width(i));
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    (w1 + w2) / (w1 / d0 + w2 / d1)
                }
            })
            .collect::<Vec<_>>();
        let mut pchip = Self {
            knots,
            values,
            slopes,
            cumulative: Vec::new(),
        };
        let mut acc = 0.0;
        let mut cumulative = vec![0.0];
        for i in 0..n {
            acc += pchip.panel_integral(i, width(i));
            cumulative.push(acc);
        }
        pchip.cumulative = cumulative;
        pchip
    }

    fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self.slopes.iter_mut().for_each(|v| *v *= factor);
        self.cumulative.iter_mut().for_each(|v| *v *= factor);
    }

    fn period_integral(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn width(&self, i: usize) -> f64 {
        let n = self.knots.len();
        if i + 1 < n {
            self.knots[i + 1] - self.knots[i]
        } else {
            self.knots[0] + 1.0 - self.knots[n - 1]
        }
    }

    /// Panel index and local offset for `x` reduced into `[t_0, t_0 + 1)`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let t0 = self.knots[0];
        let y = t0 + wrap_unit(x - t0);
        let i = match self.knots.partition_point(|&k| k <= y) {
            0 => 0,
            p => p - 1,
        };
        (i, y - self.knots[i])
    }

    fn hermite_coeffs(&self, i: usize) -> (f64, f64, f64, f64, f64) {
        let n = self.knots.len();
        let h = self.width(i);
        (
            h,
            self.values[i],
            self.slopes[i],
            self.values[(i + 1) % n],
            self.slopes[(i + 1) % n],
        )
    }

    fn eval(&self, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        let (h, y0, d0, y1, d1) = self.hermite_coeffs(i);
        let u = s / h;
        let (u2, u3) = (u * u, u * u * u);
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + h * d0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + h * d1 * (u3 - u2)
    }

    /// `∫_{t_i}^{t_i + s}` of the panel cubic.
    fn panel_integral(&self, i: usize, s: f64) -> f64 {
        let (h, y0, d0, y1, d1) = self.hermite_coeffs(i);
        let u = s / h;
        let (u2, u3, u4) = (u * u, u * u * u, u * u * u * u);
        h * (y0 * (u - u3 + 0.5 * u4)
            + h * d0 * (0.25 * u4 - 2.0 * u3 / 3.0 + 0.5 * u2)
            + y1 * (u3 - 0.5 * u4)
            + h * d1 * (0.25 * u4 - u3 / 3.0))
    }

    /// `∫_{t_0}^{t_0 + y}` for `y ∈ ℝ`, extended by periodicity.
    fn integral_from_start(&self, y: f64) -> f64 {
        let k = y.floor();
        let t0 = self.knots[0];
        let (i, s) = self.locate(t0 + (y - k));
        k * self.period_integral() + self.cumulative[i] + self.panel_integral(i, s)
    }
}

#[derive(Clone, Debug)]
enum Density {
    Constant,
    Blaschke(BlaschkeParams),
    Sampled(PeriodicPchip),
}

/// Which family a [`CircleMap`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Constant,
    Blaschke,
    Sampled,
}

/// A degree-`N` covering map of the circle given by its density `φ`.
#[derive(Clone, Debug)]
pub struct CircleMap {
    density: Density,
    degree: usize,
    phi_min: f64,
    zero_roots: Vec<f64>,
    blaschke_residual: f64,
    /// `F(j/K)`, `j = 0..=K`; empty for constant maps.
    inverse_table: Vec<f64>,
}

impl CircleMap {
    /// `φ ≡ N`, i.e. `σ(z) = z^N`.
    pub fn constant(n: i64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDegree(n));
        }
        let degree = n as usize;
        Ok(Self {
            density: Density::Constant,
            degree,
            phi_min: n as f64,
            zero_roots: (0..degree).map(|k| k as f64 / n as f64).collect(),
            blaschke_residual: 0.0,
            inverse_table: Vec::new(),
        })
    }

    /// Restriction of a finite Blaschke product to the circle.
    ///
    /// The density is the sum of Poisson kernels `(1-|a_k|²)/|e^{2πit} - a_k|²`
    /// and `F` has the closed form
    /// `F(x) = Nx + (1/π) ∑_k [arg(1 - a_k e^{-2πix}) - arg(1 - a_k)]`,
    /// which is checked against the product itself at construction.
    pub fn blaschke(params: BlaschkeParams) -> Result<Self> {
        params.validate()?;
        let degree = params.a.len();
        let mut map = Self {
            density: Density::Blaschke(params),
            degree,
            phi_min: 0.0,
            zero_roots: Vec::new(),
            blaschke_residual: 0.0,
            inverse_table: Vec::new(),
        };
        map.phi_min = map.estimate_phi_min();
        let residual = map.blaschke_self_check();
        if !(residual < BLASCHKE_SELF_CHECK_TOL) {
            return Err(Error::InvalidParameter(format!(
                "Blaschke self-check failed: max |e^(2πiF) - b| = {residual:e}"
            )));
        }
        map.blaschke_residual = residual;
        map.inverse_table = map.tabulate_antiderivative();
        map.zero_roots = map.solve_zero_roots();
        Ok(map)
    }

    /// Density interpolated from samples `phi[i]` at nodes `t[i] ∈ [0, 1)`.
    ///
    /// `F(1)` is snapped to the nearest integer when within `1e-6` of it.
    pub fn sampled(t: &[f64], phi: &[f64]) -> Result<Self> {
        if t.len() != phi.len() || t.len() < 2 {
            return Err(Error::InvalidParameter(
                "sampled density needs at least two (t, phi) pairs of equal length".into(),
            ));
        }
        if t.iter().any(|&ti| !(0.0..1.0).contains(&ti)) {
            return Err(Error::InvalidParameter("sample nodes must lie in [0, 1)".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sample nodes must be strictly increasing".into()));
        }
        if phi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("density samples must be positive".into()));
        }
        let mut pchip = PeriodicPchip::new(t.to_vec(), phi.to_vec());
        let total = pchip.period_integral();
        let n = total.round();
        if (total - n).abs() > SAMPLED_INTEGER_TOL {
            return Err(Error::InvalidParameter(format!(
                "density integrates to {total}, which is not an integer degree"
            )));
        }
        if n < 2.0 {
            return Err(Error::InvalidDegree(n as i64));
        }
        pchip.scale(n / total);
        // monotone interpolation keeps each panel between its end values
        let phi_min = pchip.values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut map = Self {
            density: Density::Sampled(pchip),
            degree: n as usize,
            phi_min,
            zero_roots: Vec::new(),
            blaschke_residual: 0.0,
            inverse_table: Vec::new(),
        };
        map.inverse_table = map.tabulate_antiderivative();
        map.zero_roots = map.solve_zero_roots();
        Ok(map)
    }

    pub fn kind(&self) -> MapKind {
        match self.density {
            Density::Constant => MapKind::Constant,
            Density::Blaschke(_) => MapKind::Blaschke,
            Density::Sampled(_) => MapKind::Sampled,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `min φ`.
    pub fn phi_min(&self) -> f64 {
        self.phi_min
    }

    /// Whether `min φ > 1`; constructions relying on contraction of inverse
    /// branches (QMF checks, scaling functions) require it.
    pub fn is_expansive(&self) -> bool {
        self.phi_min > 1.0
    }

    pub fn blaschke_params(&self) -> Option<&BlaschkeParams> {
        match &self.density {
            Density::Blaschke(p) => Some(p),
            _ => None,
        }
    }

    /// Max deviation found by the Blaschke self-check (zero for other kinds).
    pub fn blaschke_self_check_residual(&self) -> f64 {
        self.blaschke_residual
    }

    /// The density `φ(x)`, 1-periodic.
    pub fn phi(&self, x: f64) -> f64 {
        match &self.density {
            Density::Constant => self.degree as f64,
            Density::Blaschke(p) => {
                let z = circle_point(x);
                p.a.iter()
                    .map(|&ak| (1.0 - ak.norm_sqr()) / (z - ak).norm_sqr())
                    .sum()
            }
            Density::Sampled(pchip) => pchip.eval(x),
        }
    }

    /// `F(x) = ∫_0^x φ` on all of `ℝ`; `F(x + 1) = F(x) + N`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match &self.density {
            Density::Constant => self.degree as f64 * x,
            Density::Blaschke(p) => {
                let z_bar = circle_point(-x);
                let lift: f64 = p
                    .a
                    .iter()
                    .map(|&ak| (1.0 - ak * z_bar).arg() - (1.0 - ak).arg())
                    .sum();
                self.degree as f64 * x + lift / std::f64::consts::PI
            }
            Density::Sampled(pchip) => {
                let t0 = pchip.knots[0];
                pchip.integral_from_start(x - t0) - pchip.integral_from_start(-t0)
            }
        }
    }

    /// `σ` on angles: `F(x) mod 1`, in `[0, 1)`.
    pub fn sigma(&self, x: f64) -> f64 {
        wrap_unit(self.antiderivative(x))
    }

    /// `σ^k` on angles, in `[0, 1)`.
    pub fn sigma_pow(&self, x: f64, k: usize) -> f64 {
        (0..k).fold(wrap_unit(x), |y, _| self.sigma(y))
    }

    /// Solve `F(y) = target` for `y ∈ ℝ`.
    pub fn inverse_antiderivative(&self, target: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::Domain(format!("cannot invert F at {target}")));
        }
        Ok(self.lift_inverse(target))
    }

    /// Infallible core of [`Self::inverse_antiderivative`]; NaN propagates.
    pub fn lift_inverse(&self, target: f64) -> f64 {
        let n = self.degree as f64;
        if let Density::Constant = self.density {
            return target / n;
        }
        let q = (target / n).floor();
        let rem = target - q * n;
        q + self.solve_unit_interval(rem)
    }

    fn tabulate_antiderivative(&self) -> Vec<f64> {
        (0..=INVERSE_TABLE)
            .map(|j| self.antiderivative(j as f64 / INVERSE_TABLE as f64))
            .collect()
    }

    /// Solve `F(y) = target` with `target ∈ [0, N]`, `y ∈ [0, 1]`.
    ///
    /// The table of `F` gives a bracket of width `1/K` and a linear first
    /// guess, then safeguarded Newton; if Newton stalls the bracket is bisected
    /// down to rounding level instead.
    fn solve_unit_interval(&self, target: f64) -> f64 {
        let table = &self.inverse_table;
        let k = INVERSE_TABLE as f64;
        let j = table.partition_point(|&v| v < target).clamp(1, INVERSE_TABLE);
        let (mut lo, mut hi) = ((j - 1) as f64 / k, j as f64 / k);
        let (f_lo, f_hi) = (table[j - 1], table[j]);
        let t = if f_hi > f_lo { ((target - f_lo) / (f_hi - f_lo)).clamp(0.0, 1.0) } else { 0.5 };
        let scale = target.abs().max(1.0);
        let mut y = lo + t * (hi - lo);
        for _ in 0..MAX_NEWTON {
            let g = self.antiderivative(y) - target;
            if g.abs() <= 4.0 * f64::EPSILON * scale {
                return y;
            }
            if g < 0.0 {
                lo = lo.max(y);
            } else {
                hi = hi.min(y);
            }
            let mut next = y - g / self.phi(y);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= f64::EPSILON * y.abs().max(1.0) {
                return next;
            }
            y = next;
        }
        for _ in 0..MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.antiderivative(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `N` preimages `y_0 < … < y_{N-1}` in `[0, 1)` of the angle `x`.
    pub fn roots(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("no fiber over {x}")));
        }
        Ok(self.fiber(x))
    }

    /// Infallible form of [`Self::roots`].
    pub fn fiber(&self, x: f64) -> Vec<f64> {
        let x = wrap_unit(x);
        (0..self.degree)
            .map(|k| {
                let y = self.lift_inverse(x + k as f64);
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y.max(0.0)
                }
            })
            .collect()
    }

    /// The standard root of `x ∈ [-1/2, 1/2)`: the solution of `F(x̃) = x`.
    pub fn standard_root(&self, x: f64) -> Result<f64> {
        if !(-0.5..0.5).contains(&x) {
            return Err(Error::InvalidParameter(format!(
                "standard root needs x in [-1/2, 1/2), got {x}"
            )));
        }
        self.inverse_antiderivative(x)
    }

    /// `x_0 = x`, `F(x_{n+1}) = x_n`, up to `x_depth`.
    pub fn backward_orbit(&self, x: f64, depth: usize) -> Result<BackwardOrbit> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("no backward orbit from {x}")));
        }
        let mut points = Vec::with_capacity(depth + 1);
        points.push(x);
        let mut current = x;
        for _ in 0..depth {
            current = self.lift_inverse(current);
            points.push(current);
        }
        Ok(BackwardOrbit { points })
    }

    /// Roots of zero: `r_0 = 0 < r_1 < … < r_{N-1}`, `F(r_k) = k`.
    pub fn zero_roots(&self) -> &[f64] {
        &self.zero_roots
    }

    /// `r = min(r_1, 1 - r_{N-1})`.
    pub fn r_gap(&self) -> f64 {
        let r1 = self.zero_roots[1];
        let last = self.zero_roots[self.degree - 1];
        r1.min(1.0 - last)
    }

    fn solve_zero_roots(&self) -> Vec<f64> {
        let mut roots = self.fiber(0.0);
        roots[0] = 0.0;
        roots
    }

    fn estimate_phi_min(&self) -> f64 {
        const SAMPLES: usize = 1 << 14;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for j in 0..SAMPLES {
            let x = j as f64 / SAMPLES as f64;
            let v = self.phi(x);
            if v < best {
                best = v;
                arg = x;
            }
        }
        // golden-section refinement around the sampled minimum
        let h = 1.0 / SAMPLES as f64;
        let (mut a, mut b) = (arg - h, arg + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if self.phi(c) < self.phi(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.min(self.phi(0.5 * (a + b)))
    }

    fn blaschke_self_check(&self) -> f64 {
        let Some(p) = self.blaschke_params() else {
            return 0.0;
        };
        (0..BLASCHKE_SELF_CHECK_POINTS)
            .map(|j| {
                let x = j as f64 / BLASCHKE_SELF_CHECK_POINTS as f64;
                let lifted = Complex64::from_polar(1.0, TAU * self.antiderivative(x));
                (lifted - p.eval(circle_point(x))).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Backward orbit `x_0, x_1, …` with `F(x_{n+1}) = x_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardOrbit {
    pub points: Vec<f64>,
}

impl BackwardOrbit {
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    /// Largest `|F(x_{n+1}) - x_n|` along the orbit.
    pub fn max_residual(&self, map: &CircleMap) -> f64 {
        self.points
            .windows(2)
            .map(|w| (map.antiderivative(w[1]) - w[0]).abs())
            .fold(0.0, f64::max)
    }
}
