//! Exact convolution calculus on the groupoid of `z ↦ z^N`, restricted to a
//! finite patch of rational points.
//!
//! Arrows are triples `(x, t, y)` with `σ^k(x) = σ^l(y)` for some `k - l = t`.
//! Composition is `(x, s, z)(z, t, y) = (x, s + t, y)`, the unit space carries
//! counting measure, and
//! `(f∗g)(γ) = ∑_{αβ=γ} f(α)g(β)`, `f*(x, t, y) = conj(f(y, -t, x))`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::{Error, Result};

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// `p/q mod 1` in lowest terms, `0 ≤ p < q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalPoint {
    num: i64,
    den: i64,
}

impl RationalPoint {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::InvalidParameter(format!("denominator {den} must be positive")));
        }
        let num = num.rem_euclid(den);
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    fn reduced(num: i64, den: i64) -> Self {
        Self::new(num, den).expect("positive denominator")
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    /// Value in `[0, 1)`.
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `N·x mod 1`.
    pub fn sigma(&self, n: i64) -> Self {
        Self::reduced(n * self.num, self.den)
    }

    pub fn sigma_pow(&self, n: i64, k: usize) -> Self {
        (0..k).fold(*self, |p, _| p.sigma(n))
    }

    /// `(p + k q)/(N q)`, `k = 0..N`.
    pub fn preimages(&self, n: i64) -> Vec<Self> {
        (0..n)
            .map(|k| Self::reduced(self.num + k * self.den, n * self.den))
            .collect()
    }
}

/// Whether `σ^k x = σ^l y` for some `k, l ≥ 0` with `k - l = t`, decided
/// exactly: the pair `(σ^{l+t}x, σ^l y)` (or its mirror for `t < 0`) is
/// eventually periodic, so it suffices to iterate until a pair repeats.
pub fn is_arrow(n: i64, x: RationalPoint, t: i64, y: RationalPoint) -> bool {
    let (mut a, mut b) = if t >= 0 {
        (x.sigma_pow(n, t as usize), y)
    } else {
        (x, y.sigma_pow(n, t.unsigned_abs() as usize))
    };
    let mut seen = HashSet::new();
    loop {
        if a == b {
            return true;
        }
        if !seen.insert((a, b)) {
            return false;
        }
        a = a.sigma(n);
        b = b.sigma(n);
    }
}

/// Bounded search for `k, l ≤ bound` with `k - l = t` and `σ^k x = σ^l y`.
pub fn is_arrow_within(n: i64, x: RationalPoint, t: i64, y: RationalPoint, bound: usize) -> bool {
    (0..=bound).any(|k| {
        let l = k as i64 - t;
        l >= 0 && l as usize <= bound && x.sigma_pow(n, k) == y.sigma_pow(n, l as usize)
    })
}

/// Finite window onto the groupoid: the forward closure of the seeds together
/// with all their preimages up to depth `K`.
#[derive(Clone, Debug)]
pub struct PointPatch {
    degree: i64,
    depth: usize,
    points: BTreeSet<RationalPoint>,
    interior: HashMap<RationalPoint, usize>,
}

impl PointPatch {
    pub fn new(degree: i64, seeds: &[RationalPoint], depth: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        let mut core = BTreeSet::new();
        for &s in seeds {
            let mut p = s;
            while core.insert(p) {
                p = p.sigma(degree);
            }
        }
        let mut points = core.clone();
        let mut layer: Vec<RationalPoint> = core.iter().copied().collect();
        for _ in 0..depth {
            layer = layer.iter().flat_map(|p| p.preimages(degree)).collect();
            points.extend(layer.iter().copied());
        }
        let mut patch = Self {
            degree,
            depth,
            points,
            interior: HashMap::new(),
        };
        let interior = patch
            .points
            .iter()
            .map(|&p| (p, patch.compute_interior(p, depth)))
            .collect();
        patch.interior = interior;
        Ok(patch)
    }

    /// Seeds `j/8`, `j = 0..8`.
    pub fn default_for(degree: i64, depth: usize) -> Result<Self> {
        let seeds: Vec<_> = (0..8).map(|j| RationalPoint::reduced(j, 8)).collect();
        Self::new(degree, &seeds, depth)
    }

    fn compute_interior(&self, p: RationalPoint, cap: usize) -> usize {
        if cap == 0 {
            return 0;
        }
        let pre = p.preimages(self.degree);
        if pre.iter().any(|q| !self.points.contains(q)) {
            return 0;
        }
        1 + pre
            .iter()
            .map(|&q| self.compute_interior(q, cap - 1))
            .min()
            .unwrap_or(0)
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn points(&self) -> impl Iterator<Item = &RationalPoint> {
        self.points.iter()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &RationalPoint) -> bool {
        self.points.contains(p)
    }

    /// Largest `n ≤ K` such that the full depth-`n` backward tree of `p` lies in the patch.
    pub fn interior_depth(&self, p: &RationalPoint) -> usize {
        self.interior.get(p).copied().unwrap_or(0)
    }

    /// Patch points `y` with `σ^m(y) = z`.
    pub fn preimages_in_patch(&self, z: RationalPoint, m: usize) -> Vec<RationalPoint> {
        let mut layer = vec![z];
        for _ in 0..m {
            layer = layer
                .iter()
                .flat_map(|p| p.preimages(self.degree))
                .filter(|q| self.points.contains(q))
                .collect();
        }
        layer
    }
}

pub type Arrow = (RationalPoint, i64, RationalPoint);

/// Finitely supported function on the groupoid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseKernel {
    degree: i64,
    entries: BTreeMap<Arrow, Complex64>,
}

impl SparseKernel {
    pub fn new(degree: i64) -> Self {
        Self {
            degree,
            entries: BTreeMap::new(),
        }
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    /// Add `value` at `(x, t, y)`, rejecting triples that are not arrows.
    pub fn insert(&mut self, x: RationalPoint, t: i64, y: RationalPoint, value: Complex64) -> Result<()> {
        if !is_arrow(self.degree, x, t, y) {
            return Err(Error::Domain(format!(
                "({}/{}, {t}, {}/{}) is not an arrow",
                x.num, x.den, y.num, y.den
            )));
        }
        *self.entries.entry((x, t, y)).or_insert(Complex64::new(0.0, 0.0)) += value;
        Ok(())
    }

    fn insert_unchecked(&mut self, key: Arrow, value: Complex64) {
        *self.entries.entry(key).or_insert(Complex64::new(0.0, 0.0)) += value;
    }

    pub fn get(&self, x: RationalPoint, t: i64, y: RationalPoint) -> Complex64 {
        self.entries.get(&(x, t, y)).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> &BTreeMap<Arrow, Complex64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            degree: self.degree,
            entries: self.entries.iter().map(|(&k, &v)| (k, c * v)).collect(),
        }
    }

    /// Keep only the arrows accepted by `keep`.
    pub fn restrict<P: Fn(&Arrow) -> bool>(&self, keep: P) -> Self {
        Self {
            degree: self.degree,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(&k, &v)| (k, v))
                .collect(),
        }
    }

    /// `max |f(γ) - g(γ)|` over arrows accepted by `keep`.
    pub fn max_diff<P: Fn(&Arrow) -> bool>(&self, other: &Self, keep: P) -> f64 {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .filter(|k| keep(k))
            .map(|k| (self.get(k.0, k.1, k.2) - other.get(k.0, k.1, k.2)).norm())
            .fold(0.0, f64::max)
    }
}

/// `f ∗ g`.
pub fn convolve(f: &SparseKernel, g: &SparseKernel) -> Result<SparseKernel> {
    if f.degree != g.degree {
        return Err(Error::Domain(format!(
            "kernels for degrees {} and {} cannot be multiplied",
            f.degree, g.degree
        )));
    }
    let mut by_range: HashMap<RationalPoint, Vec<(i64, RationalPoint, Complex64)>> = HashMap::new();
    for (&(z, t, y), &v) in &g.entries {
        by_range.entry(z).or_default().push((t, y, v));
    }
    let alphas: Vec<(&Arrow, &Complex64)> = f.entries.iter().collect();
    let parts: Vec<BTreeMap<Arrow, Complex64>> = alphas
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = BTreeMap::new();
            for (&(x, s, z), &a) in chunk {
                if let Some(betas) = by_range.get(&z) {
                    for &(t, y, b) in betas {
                        *acc.entry((x, s + t, y)).or_insert(Complex64::new(0.0, 0.0)) += a * b;
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = SparseKernel::new(f.degree);
    for part in parts {
        for (k, v) in part {
            out.insert_unchecked(k, v);
        }
    }
    Ok(out)
}

/// `f*(x, t, y) = conj(f(y, -t, x))`.
pub fn adjoint(f: &SparseKernel) -> SparseKernel {
    SparseKernel {
        degree: f.degree,
        entries: f
            .entries
            .iter()
            .map(|(&(x, t, y), &v)| ((y, -t, x), v.conj()))
            .collect(),
    }
}

/// Kernel of the product of `k` factors, computed left to right.
pub fn power(f: &SparseKernel, k: usize, patch: &PointPatch) -> Result<SparseKernel> {
    let mut acc = indicator(patch, 0, 0);
    for _ in 0..k {
        acc = convolve(&acc, f)?;
    }
    Ok(acc)
}

/// `1_{R_{n,m}}` on the patch: arrows `(x, n - m, y)` with `σ^n x = σ^m y`.
pub fn indicator(patch: &PointPatch, n: usize, m: usize) -> SparseKernel {
    let mut out = SparseKernel::new(patch.degree);
    for &x in patch.points() {
        let z = x.sigma_pow(patch.degree, n);
        for y in patch.preimages_in_patch(z, m) {
            out.insert_unchecked((x, n as i64 - m as i64, y), Complex64::new(1.0, 0.0));
        }
    }
    out
}

/// Multiplication by `f` as the kernel `f(x)` on `(x, 0, x)`.
pub fn diagonal<F: Fn(RationalPoint) -> Complex64>(patch: &PointPatch, f: F) -> SparseKernel {
    let mut out = SparseKernel::new(patch.degree);
    for &x in patch.points() {
        out.insert_unchecked((x, 0, x), f(x));
    }
    out
}

/// `S = N^{-1/2}·1_{R_{1,0}}`.
pub fn master_isometry(patch: &PointPatch) -> SparseKernel {
    let c = (patch.degree as f64).sqrt().recip();
    filter_isometry(patch, &|_| Complex64::new(c, 0.0))
}

/// `S_u = u(x)·1_{R_{1,0}}`, with `u` a function of the angle.
pub fn filter_isometry(patch: &PointPatch, u: &dyn Fn(f64) -> Complex64) -> SparseKernel {
    let mut out = SparseKernel::new(patch.degree);
    for &x in patch.points() {
        out.insert_unchecked((x, 1, x.sigma(patch.degree)), u(x.value()));
    }
    out
}

/// `u_n(x) = ∏_{i<n} u(σ^i x)`.
fn u_n(u: &dyn Fn(f64) -> Complex64, n_deg: i64, x: RationalPoint, n: usize) -> Complex64 {
    (0..n)
        .map(|i| u(x.sigma_pow(n_deg, i).value()))
        .product()
}

/// `E_n(x, 0, y) = u_n(x) conj(u_n(y)) 1_{R_{n,n}}`.
pub fn projection_closed(patch: &PointPatch, u: &dyn Fn(f64) -> Complex64, n: usize) -> SparseKernel {
    let mut out = indicator(patch, n, n);
    for ((x, _, y), v) in out.entries.iter_mut() {
        *v = u_n(u, patch.degree, *x, n) * u_n(u, patch.degree, *y, n).conj();
    }
    out
}

/// `E_n = S_u^n ∗ (S_u^*)^n`.
pub fn projection_product(patch: &PointPatch, u: &dyn Fn(f64) -> Complex64, n: usize) -> Result<SparseKernel> {
    let s = filter_isometry(patch, u);
    let sn = power(&s, n, patch)?;
    convolve(&sn, &adjoint(&sn))
}

/// `∑_{σ^n(z)=x} D_n(z) f(z)` for `D = |u|²`, evaluated on patch points.
fn transfer_d_pow(
    patch: &PointPatch,
    u: &dyn Fn(f64) -> Complex64,
    f: &dyn Fn(RationalPoint) -> Complex64,
    n: usize,
    x: RationalPoint,
) -> Complex64 {
    patch
        .preimages_in_patch(x, n)
        .into_iter()
        .map(|z| u_n(u, patch.degree, z, n).norm_sqr() * f(z))
        .sum()
}

/// Residual of a named identity.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
}

/// Random kernel supported on arrows `(x, k - l, y)` with `k, l ≤ 2` inside the patch.
pub fn random_kernel<R: Rng + ?Sized>(patch: &PointPatch, rng: &mut R, size: usize) -> SparseKernel {
    let pts: Vec<RationalPoint> = patch.points().copied().collect();
    let mut out = SparseKernel::new(patch.degree);
    while out.len() < size {
        let x = pts[rng.gen_range(0..pts.len())];
        let (k, l) = (rng.gen_range(0..=2usize), rng.gen_range(0..=2usize));
        let ys = patch.preimages_in_patch(x.sigma_pow(patch.degree, k), l);
        if ys.is_empty() {
            continue;
        }
        let y = ys[rng.gen_range(0..ys.len())];
        let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        out.insert_unchecked((x, k as i64 - l as i64, y), v);
    }
    out
}

/// `(f∗g∗h)(γ)` as the plain triple sum over composable `(α, β, δ)`.
pub fn triple_product_oracle(f: &SparseKernel, g: &SparseKernel, h: &SparseKernel) -> SparseKernel {
    let mut out = SparseKernel::new(f.degree);
    for (&(x, s, z1), &a) in &f.entries {
        for (&(z2, t, w1), &b) in &g.entries {
            if z1 != z2 {
                continue;
            }
            for (&(w2, r, y), &c) in &h.entries {
                if w1 == w2 {
                    out.insert_unchecked((x, s + t + r, y), a * b * c);
                }
            }
        }
    }
    out
}

/// All exact identities for a filter `u` with `|u|²` normalized, on the patch.
/// `diag` is a test function for the multiplication identities.
pub fn identity_suite(
    patch: &PointPatch,
    u: &dyn Fn(f64) -> Complex64,
    diag: &dyn Fn(f64) -> Complex64,
    n_max: usize,
) -> Result<Vec<IdentityCheck>> {
    let deg = patch.degree;
    let interior = |p: &RationalPoint, n: usize| patch.interior_depth(p) >= n;
    let mut out = Vec::new();
    let mut push = |name: &str, residual: f64| {
        out.push(IdentityCheck {
            name: name.to_string(),
            residual,
        })
    };

    let r10 = indicator(patch, 1, 0);
    let r11 = indicator(patch, 1, 1);
    let r00 = indicator(patch, 0, 0);
    let lhs = convolve(&r10, &adjoint(&r10))?;
    push("R10 R10* = 1_R11", lhs.max_diff(&r11, |_| true));
    let lhs = convolve(&adjoint(&r10), &r10)?;
    push(
        "R10* R10 = N 1_R00",
        lhs.max_diff(&r00.scale(Complex64::new(deg as f64, 0.0)), |k| interior(&k.0, 1)),
    );

    let s = master_isometry(patch);
    let sts = convolve(&adjoint(&s), &s)?;
    push("S* S = 1_R00", sts.max_diff(&r00, |k| interior(&k.0, 1)));
    let sst = convolve(&s, &adjoint(&s))?;
    push(
        "S S* = N^-1 1_R11",
        sst.max_diff(&r11.scale(Complex64::new(1.0 / deg as f64, 0.0)), |_| true),
    );
    push("S S* idempotent", convolve(&sst, &sst)?.max_diff(&sst, |k| interior(&k.2, 1)));

    let su = filter_isometry(patch, u);
    let sut = adjoint(&su);
    push("Su* Su = 1_R00", convolve(&sut, &su)?.max_diff(&r00, |k| interior(&k.0, 1)));

    let mf = diagonal(patch, |p| diag(p.value()));
    let mf_sigma = diagonal(patch, |p| diag(p.sigma(deg).value()));
    let lhs = convolve(&su, &mf)?;
    let rhs = convolve(&mf_sigma, &su)?;
    push("Su f = (f o sigma) Su", lhs.max_diff(&rhs, |_| true));

    let lhs = convolve(&convolve(&sut, &mf)?, &su)?;
    let ld = diagonal(patch, |p| transfer_d_pow(patch, u, &|z| diag(z.value()), 1, p));
    push("Su* f Su = L_D f", lhs.max_diff(&ld, |k| interior(&k.0, 1)));

    for n in 0..=n_max {
        let closed = projection_closed(patch, u, n);
        let product = projection_product(patch, u, n)?;
        push(&format!("E_{n} kernel = Su^{n} Su*^{n}"), closed.max_diff(&product, |_| true));

        let lhs = convolve(&convolve(&closed, &mf)?, &closed)?;
        let en_d = diagonal(patch, |p| {
            let base = p.sigma_pow(deg, n);
            if interior(&base, n) {
                transfer_d_pow(patch, u, &|z| diag(z.value()), n, base)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rhs = convolve(&en_d, &closed)?;
        push(
            &format!("E_{n} f E_{n} = E_{n}^D(f) E_{n}"),
            lhs.max_diff(&rhs, |k| interior(&k.0.sigma_pow(deg, n), n)),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rp(p: i64, q: i64) -> RationalPoint {
        RationalPoint::new(p, q).unwrap()
    }

    fn haar_u(x: f64) -> Complex64 {
        (1.0 + crate::circle_point(x)) * 0.5
    }

    fn fractal_u(x: f64) -> Complex64 {
        (1.0 + crate::circle_point(2.0 * x)) / 6f64.sqrt()
    }

    #[test]
    fn rational_points() {
        assert_eq!(rp(3, 6), rp(1, 2));
        assert_eq!(rp(-1, 4), rp(3, 4));
        assert_eq!(rp(3, 8).sigma(2), rp(3, 4));
        assert_eq!(rp(1, 2).preimages(2), vec![rp(1, 4), rp(3, 4)]);
        for q in rp(5, 24).preimages(3) {
            assert_eq!(q.sigma(3), rp(5, 24));
        }
        assert!(RationalPoint::new(1, 0).is_err());
    }

    #[test]
    fn patch_structure() {
        for n in [2, 3] {
            let patch = PointPatch::default_for(n, 3).unwrap();
            for p in patch.points() {
                assert!(patch.contains(&p.sigma(n)));
                let d = patch.interior_depth(p);
                assert_eq!(patch.preimages_in_patch(*p, d).len(), (n as usize).pow(d as u32));
                assert!(p.denominator() <= 8 * n.pow(3));
            }
            assert_eq!(patch.interior_depth(&rp(1, 8)), 3);
        }
    }

    #[test]
    fn membership_matches_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2, 3] {
            let patch = PointPatch::default_for(n, 3).unwrap();
            let pts: Vec<_> = patch.points().copied().collect();
            for _ in 0..100 {
                let x = pts[rng.gen_range(0..pts.len())];
                let y = pts[rng.gen_range(0..pts.len())];
                let t = rng.gen_range(-3..=3);
                let brute = (0..=64usize).any(|k| {
                    let l = k as i64 - t;
                    l >= 0 && x.sigma_pow(n, k) == y.sigma_pow(n, l as usize)
                });
                assert_eq!(is_arrow(n, x, t, y), brute);
                let window = (0..=3usize)
                    .flat_map(|k| (0..=3usize).map(move |l| (k, l)))
                    .any(|(k, l)| k as i64 - l as i64 == t && x.sigma_pow(n, k) == y.sigma_pow(n, l));
                assert_eq!(is_arrow_within(n, x, t, y, 3), window);
            }
        }
    }

    #[test]
    fn insert_rejects_non_arrows() {
        let mut k = SparseKernel::new(2);
        assert!(k.insert(rp(1, 3), 0, rp(1, 5), Complex64::new(1.0, 0.0)).is_err());
        assert!(k.insert(rp(1, 4), 1, rp(1, 2), Complex64::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn unit_and_adjoint() {
        let patch = PointPatch::default_for(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_kernel(&patch, &mut rng, 40);
        let unit = indicator(&patch, 0, 0);
        assert!(convolve(&unit, &f).unwrap().max_diff(&f, |_| true) < 1e-15);
        assert_eq!(adjoint(&adjoint(&f)), f);
        let d = diagonal(&patch, |p| Complex64::new(p.value(), 0.0));
        assert_eq!(adjoint(&d), d);
    }

    #[test]
    fn identities_haar_and_fractal() {
        let patch2 = PointPatch::default_for(2, 3).unwrap();
        let f = |x: f64| Complex64::new((crate::TAU * x).cos(), (2.0 * crate::TAU * x).sin());
        for check in identity_suite(&patch2, &haar_u, &f, 2).unwrap() {
            assert!(check.residual < 1e-12, "{check:?}");
        }
        let patch3 = PointPatch::default_for(3, 3).unwrap();
        for check in identity_suite(&patch3, &fractal_u, &f, 2).unwrap() {
            assert!(check.residual < 1e-12, "{check:?}");
        }
    }

    #[test]
    fn master_isometry_is_filter_isometry_for_constant_u() {
        let patch = PointPatch::default_for(3, 2).unwrap();
        let s = master_isometry(&patch);
        for v in s.entries().values() {
            assert!((v - 1.0 / 3f64.sqrt()).norm() < 1e-15);
        }
        let r00 = indicator(&patch, 0, 0);
        let bad = filter_isometry(&patch, &|_| Complex64::new(0.9, 0.0));
        let sts = convolve(&adjoint(&bad), &bad).unwrap();
        assert!(sts.max_diff(&r00, |k| patch.interior_depth(&k.0) >= 1) > 0.1);
    }

    #[test]
    fn projection_n0_is_unit() {
        let patch = PointPatch::default_for(2, 3).unwrap();
        let e0 = projection_closed(&patch, &haar_u, 0);
        assert!(e0.max_diff(&indicator(&patch, 0, 0), |_| true) < 1e-15);
    }

    #[test]
    fn associativity_and_antimultiplicativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [2, 3] {
            let patch = PointPatch::default_for(n, 3).unwrap();
            for _ in 0..10 {
                let f = random_kernel(&patch, &mut rng, 30);
                let g = random_kernel(&patch, &mut rng, 30);
                let h = random_kernel(&patch, &mut rng, 30);
                let oracle = triple_product_oracle(&f, &g, &h);
                let left = convolve(&convolve(&f, &g).unwrap(), &h).unwrap();
                let right = convolve(&f, &convolve(&g, &h).unwrap()).unwrap();
                assert!(left.max_diff(&oracle, |_| true) < 1e-12);
                assert!(right.max_diff(&oracle, |_| true) < 1e-12);
                let lhs = adjoint(&convolve(&f, &g).unwrap());
                let rhs = convolve(&adjoint(&g), &adjoint(&f)).unwrap();
                assert!(lhs.max_diff(&rhs, |_| true) < 1e-12);
            }
        }
    }
}
