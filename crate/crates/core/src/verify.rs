//! The acceptance suite as data: each criterion yields named checks with a
//! measured value, a threshold and a verdict.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cascade::{
    proto_mra_residuals, pureness_diagnostic, HilbertGridSpace, MallatEmbedding, SolenoidSpace,
    SolenoidVector,
};
use crate::dynamics::{BlaschkeParams, CircleMap};
use crate::groupoid::{self, PointPatch};
use crate::path_measure::{atom_mass, monte_carlo_cylinder, nu_cylinder, CylinderFunction};
use crate::scaling::{partition_of_unity, qmf_check, truncated_im, ScalingEvaluator, DEFAULT_TAIL};
use crate::transfer::{
    check_invariance, invariant_measure, is_filter, FilterSystem, GridMeasure, Potential, DEFAULT_GRID,
};
use crate::trig::TrigPoly;
use crate::{circle_fn, circle_point, constant_fn, CircleFn, Result};

pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplies every numerical threshold; runtime limits are not scaled.
    pub tol_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20240521,
            tol_scale: 1.0,
        }
    }
}

/// One measured quantity. Passes when `value < threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub anchor: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, anchor: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            anchor,
            value,
            threshold,
            pass: value < threshold,
        }
    }

    /// A yes/no property, recorded as a violation count against threshold 1.
    fn holds(name: impl Into<String>, anchor: &'static str, ok: bool) -> Self {
        Self::below(name, anchor, if ok { 0.0 } else { 1.0 }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The check with the largest `value / threshold`.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| (a.value / a.threshold).total_cmp(&(b.value / b.threshold)))
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "filter identity, fractal filter",
        2 => "Haar partition of unity",
        3 => "truncated integrals I_m = 1, Haar",
        4 => "Haar scaling function vs sinc",
        5 => "Blaschke dynamics",
        6 => "invariant measure, Blaschke",
        7 => "exact groupoid kernel identities",
        8 => "proto-MRA relations, Haar solenoid",
        9 => "pure isometry diagnostic",
        10 => "Mallat embedding",
        11 => "path measure consistency",
        12 => "QMF gate",
        _ => "unknown criterion",
    }
}

pub fn run(id: u8, opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let s = opts.tol_scale;
    let checks = match id {
        1 => filter_identity(s, start)?,
        2 => haar_partition(s, start)?,
        3 => mall1_integrals(s, start),
        4 => haar_sinc(s)?,
        5 => blaschke_dynamics(s)?,
        6 => invariance(s)?,
        7 => kernels(s, opts.seed)?,
        8 => proto_mra(s, opts.seed),
        9 => pureness(s),
        10 => mallat(s, opts.seed)?,
        11 => paths(s, opts.seed)?,
        12 => qmf_gate()?,
        _ => {
            return Err(crate::Error::InvalidParameter(format!(
                "criterion {id} does not exist"
            )))
        }
    };
    Ok(CriterionReport {
        id,
        title: title(id),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CriterionReport>> {
    CRITERIA.map(|id| run(id, opts)).collect()
}

pub fn blaschke_params() -> BlaschkeParams {
    BlaschkeParams::new(
        Complex64::new(1.0, 0.0),
        vec![Complex64::new(0.2, 0.0), Complex64::new(0.2, 0.0)],
    )
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let t = std::f64::consts::PI * x;
        t.sin() / t
    }
}

fn random_polys(rng: &mut ChaCha8Rng, count: usize, degree: i64) -> Vec<CircleFn> {
    (0..count).map(|_| TrigPoly::random(rng, degree).to_fn()).collect()
}

/// Recorded as a yes/no so that reports stay reproducible; the elapsed time
/// itself lives in [`CriterionReport::seconds`].
fn runtime(limit: f64, start: Instant) -> Check {
    let elapsed = start.elapsed().as_secs_f64();
    Check::holds(format!("runtime under {limit} s"), "runtime", elapsed < limit)
}

fn filter_identity(s: f64, start: Instant) -> Result<Vec<Check>> {
    const A: &str = "filter-identity";
    let fs = FilterSystem::fractal();
    let report = is_filter(fs.psi(), fs.filter_fn(), fs.map(), 3 << 10, 1e-12 * s);
    Ok(vec![
        Check::below("max |L_psi(|m|^2) - 1|", A, report.max_deviation, 1e-12 * s),
        runtime(1.0, start),
    ])
}

fn haar_partition(s: f64, start: Instant) -> Result<Vec<Check>> {
    const A: &str = "partition-of-unity";
    let ev = ScalingEvaluator::new(FilterSystem::haar(), DEFAULT_GRID, 40, DEFAULT_TAIL)?;
    let dev = (0..256)
        .map(|k| -0.5 + (k as f64 + 0.5) / 256.0)
        .map(|x| (partition_of_unity(&ev, x, 1000) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::below("sup |sum_j |phi(x+j)|^2 - 1|, J = 1000", A, dev, 5e-3 * s),
        runtime(30.0, start),
    ])
}

fn mall1_integrals(s: f64, start: Instant) -> Vec<Check> {
    const A: &str = "truncated-integrals";
    let fs = FilterSystem::haar();
    let mut out: Vec<Check> = (1..=6)
        .map(|m| Check::below(format!("|I_{m} - 1|"), A, (truncated_im(&fs, m, 64) - 1.0).abs(), 1e-8 * s))
        .collect();
    out.push(runtime(10.0, start));
    out
}

fn haar_sinc(s: f64) -> Result<Vec<Check>> {
    const A: &str = "scaling-function";
    let ev = ScalingEvaluator::new(FilterSystem::haar(), DEFAULT_GRID, 40, DEFAULT_TAIL)?;
    let dev = (0..1601)
        .map(|k| -8.0 + k as f64 * 0.01)
        .map(|x| (ev.phi_tilde(x).value.norm() - sinc(x).abs()).abs())
        .fold(0.0, f64::max);
    Ok(vec![Check::below("max ||phi(x)| - |sinc x||, |x| <= 8", A, dev, 1e-9 * s)])
}

fn blaschke_dynamics(s: f64) -> Result<Vec<Check>> {
    const A: &str = "blaschke-dynamics";
    let params = blaschke_params();
    let map = CircleMap::blaschke(params.clone())?;
    let m = 1usize << 12;
    let dev = (0..m)
        .map(|k| k as f64 / m as f64 - 0.5)
        .map(|x| (circle_point(map.antiderivative(x)) - params.eval(circle_point(x))).norm())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::holds("degree is 2", A, map.degree() == 2),
        Check::below("|phi(0) - 3|", A, (map.phi(0.0) - 3.0).abs(), 1e-9 * s),
        Check::below("|phi(1/2) - 4/3|", A, (map.phi(0.5) - 4.0 / 3.0).abs(), 1e-9 * s),
        Check::below("max |exp(2 pi i F) - b|", A, dev, 1e-10 * s),
    ])
}

fn invariance(s: f64) -> Result<Vec<Check>> {
    const A: &str = "invariant-measure";
    let map = Arc::new(CircleMap::blaschke(blaschke_params())?);
    let psi = Potential::reciprocal_density(map.clone());
    let m = 1usize << 12;
    let lebesgue = GridMeasure::uniform(m);
    let tests: Vec<CircleFn> = (1..=10)
        .flat_map(|k| [k, -k])
        .map(|k| TrigPoly::monomial(k).to_fn())
        .collect();
    let worst = check_invariance(&lebesgue, &psi, &map, &tests)
        .into_iter()
        .fold(0.0, f64::max);
    let mu = invariant_measure(&psi, &map, m, 10_000, 1e-15)?;
    Ok(vec![
        Check::below("max |int L_psi e_k - int e_k|, 20 monomials", A, worst, 1e-8 * s),
        Check::below(
            "TV(power iteration, Lebesgue) * M",
            A,
            mu.tv_distance(&lebesgue) * m as f64,
            2.0 * s,
        ),
    ])
}

fn kernels(s: f64, seed: u64) -> Result<Vec<Check>> {
    const A: &str = "groupoid-kernels";
    let mut out = Vec::new();
    let test_fn = |x: f64| circle_point(x) + 0.5 * circle_point(-2.0 * x);
    let haar = FilterSystem::haar();
    let fractal = FilterSystem::fractal();
    let suites: [(i64, &FilterSystem); 2] = [(2, &haar), (3, &fractal)];
    for (n, fs) in suites {
        let patch = PointPatch::default_for(n, 3)?;
        let u = |x: f64| fs.u(x);
        for c in groupoid::identity_suite(&patch, &u, &test_fn, 2)? {
            out.push(Check::below(format!("N={n}: {}", c.name), A, c.residual, 1e-12 * s));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65726e);
    let mut assoc: f64 = 0.0;
    for k in 0..50 {
        let patch = PointPatch::default_for(if k % 2 == 0 { 2 } else { 3 }, 3)?;
        let f = groupoid::random_kernel(&patch, &mut rng, 20);
        let g = groupoid::random_kernel(&patch, &mut rng, 20);
        let h = groupoid::random_kernel(&patch, &mut rng, 20);
        let oracle = groupoid::triple_product_oracle(&f, &g, &h);
        let left = groupoid::convolve(&groupoid::convolve(&f, &g)?, &h)?;
        let right = groupoid::convolve(&f, &groupoid::convolve(&g, &h)?)?;
        assoc = assoc
            .max(left.max_diff(&oracle, |_| true))
            .max(right.max_diff(&oracle, |_| true));
    }
    out.push(Check::below("associativity vs triple sum, 50 kernels", A, assoc, 1e-12 * s));
    Ok(out)
}

fn proto_mra(s: f64, seed: u64) -> Vec<Check> {
    const A: &str = "proto-mra";
    let space = SolenoidSpace::new(FilterSystem::haar(), GridMeasure::uniform(256));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70726f74);
    let js: Vec<i64> = (-4..=4).collect();
    let (mut nest, mut conj, mut unit): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..20 {
        let v = SolenoidVector::new(k % 5, TrigPoly::random(&mut rng, 3).to_fn());
        let r = proto_mra_residuals(&space, &v, &js);
        nest = nest.max(r.nesting);
        conj = conj.max(r.conjugation);
        unit = unit.max(r.unitarity);
    }
    vec![
        Check::below("nesting residual", A, nest, 1e-10 * s),
        Check::below("conjugation residual", A, conj, 1e-10 * s),
        Check::below("norm preservation of U", A, unit, 1e-10 * s),
    ]
}

fn pureness(s: f64) -> Vec<Check> {
    const A: &str = "pure-isometry";
    let space = HilbertGridSpace::uniform(256);
    let one = constant_fn(Complex64::new(1.0, 0.0));
    let mut out = Vec::new();
    for (label, fs) in [("Haar", FilterSystem::haar()), ("fractal", FilterSystem::fractal())] {
        let r = pureness_diagnostic(&fs, &space, &one, 10, 0.1);
        let dev = r
            .norms
            .iter()
            .enumerate()
            .map(|(n, v)| (v - 2f64.powf(-(n as f64) / 2.0)).abs())
            .fold(0.0, f64::max);
        out.push(Check::below(format!("{label}: max |E_n 1| - 2^(-n/2)|"), A, dev, 1e-10 * s));
        out.push(Check::holds(format!("{label}: flagged pure"), A, r.pure));
    }
    let shift = FilterSystem::unimodular_shift();
    let zbar = TrigPoly::monomial(-1).to_fn();
    let r = pureness_diagnostic(&shift, &space, &zbar, 10, 0.1);
    let spread = r.norms.iter().map(|v| (v - r.norms[0]).abs()).fold(0.0, f64::max);
    out.push(Check::below("m = z: spread of |E_n f|", A, spread, 1e-10 * s));
    out.push(Check::holds("m = z: flagged non-pure", A, !r.pure));
    out
}

fn mallat(s: f64, seed: u64) -> Result<Vec<Check>> {
    const A: &str = "mallat-embedding";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d616c6c);
    let polys = random_polys(&mut rng, 10, 2);
    let xs: Vec<f64> = (0..1024).map(|k| -50.0 + 100.0 * (k as f64 + 0.5) / 1024.0).collect();
    let mut out = Vec::new();
    let systems = [
        ("Haar", FilterSystem::haar()),
        ("Blaschke", FilterSystem::blaschke_admissible(blaschke_params(), DEFAULT_GRID)?),
    ];
    for (label, fs) in systems {
        let emb = MallatEmbedding::new(ScalingEvaluator::with_defaults(fs)?);
        let norms = emb.norms_sq_scaled(&polys, 4, 200.0, 1.0 / 32.0);
        let iso = norms
            .iter()
            .flatten()
            .map(|v| (v.sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        out.push(Check::below(format!("{label}: max ||R_n f| - |f||"), A, iso, 5e-3 * s));
        let (mut inter, mut dil): (f64, f64) = (0.0, 0.0);
        for f in &polys {
            for n in 0..4 {
                inter = inter.max(emb.intertwining_residual(f, n, &xs));
                dil = dil.max(emb.dilation_residual(f, n, &xs));
            }
        }
        out.push(Check::below(format!("{label}: intertwining residual"), A, inter, 1e-9 * s));
        out.push(Check::below(format!("{label}: dilation residual"), A, dil, 1e-8 * s));
    }
    Ok(out)
}

fn paths(s: f64, seed: u64) -> Result<Vec<Check>> {
    const A: &str = "path-measure";
    let fs = FilterSystem::haar();
    let map = fs.map().clone();
    let d = fs.d_potential();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70617468);
    let mut consistency: f64 = 0.0;
    for depth in 1..=4 {
        let f = CylinderFunction::new(random_polys(&mut rng, depth, 2))?;
        let g = f.extended();
        for k in 0..16 {
            let x = -0.5 + (k as f64 + 0.5) / 16.0;
            consistency = consistency.max((nu_cylinder(&d, &map, x, &f) - nu_cylinder(&d, &map, x, &g)).norm());
        }
    }
    let factors: Vec<CircleFn> = (0..4)
        .map(|i| {
            let k = (i + 1) as f64;
            circle_fn(move |x| Complex64::new(1.0 + 0.5 * (crate::TAU * k * x).cos(), 0.0))
        })
        .collect();
    let f = CylinderFunction::new(factors)?;
    let x = 0.17;
    let exact = nu_cylinder(&d, &map, x, &f);
    let (mean, stderr) = monte_carlo_cylinder(&d, &map, x, &f, 100_000, seed)?;
    let ev = ScalingEvaluator::with_defaults(fs)?;
    let atom = atom_mass(&ev, 0.3, 60)?;
    let target = sinc(0.3).powi(2);
    let outside = (atom.lower - target).max(target - atom.upper).max(0.0);
    Ok(vec![
        Check::below("depth consistency of nu", A, consistency, 1e-14 * s),
        Check::below("|MC - exact| / stderr", A, (mean - exact).norm() / stderr, 4.0 * s),
        Check::below("|atom(0.3) - sinc^2(0.3)| outside bound", A, outside, 1e-15 * s),
        Check::below(
            "atom bound width",
            A,
            atom.upper - atom.lower,
            1e-6 * s,
        ),
    ])
}

fn qmf_gate() -> Result<Vec<Check>> {
    const A: &str = "qmf-gate";
    let haar = qmf_check(&FilterSystem::haar(), DEFAULT_GRID, 1e-9);
    let blaschke = qmf_check(
        &FilterSystem::blaschke_admissible(blaschke_params(), DEFAULT_GRID)?,
        DEFAULT_GRID,
        1e-9,
    );
    let fractal = qmf_check(&FilterSystem::fractal(), DEFAULT_GRID, 1e-9);
    Ok(vec![
        Check::holds("Haar passes", A, haar.pass),
        Check::holds("Blaschke passes", A, blaschke.pass),
        Check::holds("fractal fails the |u(0)| = 1 hypothesis", A, !fractal.mall1 && !fractal.pass),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-16);
        assert!((sinc(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn fast_criteria_pass() {
        let opts = VerifyOptions::default();
        for id in [1, 4, 5, 12] {
            let r = run(id, &opts).unwrap();
            assert!(r.pass(), "{r:?}");
        }
        assert!(run(13, &opts).is_err());
    }

    #[test]
    fn tol_scale_tightens() {
        let opts = VerifyOptions {
            tol_scale: 1e-30,
            ..Default::default()
        };
        assert!(!run(5, &opts).unwrap().pass());
    }
}
