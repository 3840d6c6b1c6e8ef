//! One function per subcommand. Each returns check records and CSV tables;
//! configuration problems come back as [`ConfigError`] and numerical
//! failures become failing records.

use std::sync::Arc;

use circle_mra::cascade::{
    e_n_apply, e_n_closed, proto_mra_residuals, pureness_diagnostic, s_apply, HilbertGridSpace, MallatEmbedding,
    SolenoidSpace, SolenoidVector,
};
use circle_mra::dynamics::CircleMap;
use circle_mra::groupoid::{self, PointPatch};
use circle_mra::path_measure::{monte_carlo_cylinder, nu_cylinder, sample_paths, CylinderFunction};
use circle_mra::scaling::{partition_of_unity, qmf_check, ScalingEvaluator, DEFAULT_MAX_DEPTH, DEFAULT_TAIL};
use circle_mra::transfer::{
    check_invariance, invariant_measure, is_filter, make_filter, FilterSystem, GridMeasure, Potential,
};
use circle_mra::trig::TrigPoly;
use circle_mra::verify::{self, VerifyOptions};
use circle_mra::{circle_fn, circle_point, CircleFn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, ExperimentConfig, SystemError};
use crate::report::{Record, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CheckFilter,
    Qmf,
    Scaling,
    Partition,
    Cascade,
    Solenoid,
    Embed,
    Kernels,
    SamplePaths,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckFilter => "check-filter",
            Self::Qmf => "qmf",
            Self::Scaling => "scaling",
            Self::Partition => "partition",
            Self::Cascade => "cascade",
            Self::Solenoid => "solenoid",
            Self::Embed => "embed",
            Self::Kernels => "kernels",
            Self::SamplePaths => "sample-paths",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn failed(name: &str, anchor: &str, err: impl std::fmt::Display) -> Self {
        Self {
            records: vec![Record::below(format!("{name}: {err}"), anchor, f64::NAN, 0.0)],
            tables: Vec::new(),
        }
    }
}

pub struct Context<'a> {
    pub config: Option<&'a ExperimentConfig>,
    pub seed: u64,
    pub tol_scale: f64,
}

impl Context<'_> {
    fn thr(&self, t: f64) -> f64 {
        t * self.tol_scale
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt)
    }

    fn config(&self) -> Result<&ExperimentConfig, ConfigError> {
        self.config
            .ok_or_else(|| ConfigError::new("--config", "this subcommand needs a configuration file"))
    }

    fn polys(&self, cfg: &ExperimentConfig, salt: u64) -> Vec<CircleFn> {
        let mut rng = self.rng(salt);
        (0..cfg.sampling.test_functions)
            .map(|_| TrigPoly::random(&mut rng, cfg.sampling.trig_degree).to_fn())
            .collect()
    }
}

pub fn run(command: Command, ctx: &Context) -> Result<Outcome, ConfigError> {
    if command == Command::Verify {
        return Ok(verify_suite(ctx));
    }
    let cfg = ctx.config()?;
    match command {
        Command::CheckFilter => check_filter(ctx, cfg),
        Command::Qmf => with_system(cfg, "qmf-gate", |fs| qmf(ctx, cfg, fs)),
        Command::Scaling => with_evaluator(cfg, "scaling-function", |ev| scaling(ctx, cfg, ev)),
        Command::Partition => with_evaluator(cfg, "partition-of-unity", |ev| partition(ctx, cfg, ev)),
        Command::Cascade => with_system(cfg, "pure-isometry", |fs| cascade(ctx, cfg, fs)),
        Command::Solenoid => with_system(cfg, "proto-mra", |fs| solenoid(ctx, cfg, fs)),
        Command::Embed => with_evaluator(cfg, "mallat-embedding", |ev| embed(ctx, cfg, ev)),
        Command::Kernels => kernels(ctx, cfg),
        Command::SamplePaths => with_system(cfg, "path-measure", |fs| paths(ctx, cfg, fs)),
        Command::Verify => unreachable!("handled above"),
    }
}

fn with_system<F>(cfg: &ExperimentConfig, anchor: &str, body: F) -> Result<Outcome, ConfigError>
where
    F: FnOnce(FilterSystem) -> Outcome,
{
    match cfg.system() {
        Ok(fs) => Ok(body(fs)),
        Err(SystemError::Config(e)) => Err(e),
        Err(SystemError::Numerical(e)) => Ok(Outcome::failed("build filter system", anchor, e)),
    }
}

fn with_evaluator<F>(cfg: &ExperimentConfig, anchor: &str, body: F) -> Result<Outcome, ConfigError>
where
    F: FnOnce(ScalingEvaluator) -> Outcome,
{
    with_system(cfg, anchor, |fs| {
        match ScalingEvaluator::new(fs, cfg.grid, DEFAULT_MAX_DEPTH, DEFAULT_TAIL) {
            Ok(ev) => body(ev),
            Err(e) => Outcome::failed("scaling function", anchor, e),
        }
    })
}

/// Lebesgue measure when it is invariant for the dual of `L_ψ`, otherwise the
/// power-iteration fixed point.
fn invariant(psi: &Potential, map: &CircleMap, grid: usize) -> Result<GridMeasure, circle_mra::Error> {
    let lebesgue = GridMeasure::uniform(grid);
    let tests: Vec<CircleFn> = [1, -1, 2, 3].iter().map(|&k| TrigPoly::monomial(k).to_fn()).collect();
    let residual = check_invariance(&lebesgue, psi, map, &tests)
        .into_iter()
        .fold(0.0, f64::max);
    if residual < 1e-12 {
        Ok(lebesgue)
    } else {
        invariant_measure(psi, map, grid, 20_000, 1e-15)
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

fn midpoints(count: usize) -> Vec<f64> {
    (0..count).map(|k| -0.5 + (k as f64 + 0.5) / count as f64).collect()
}

fn check_filter(ctx: &Context, cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    const A: &str = "filter-identity";
    let map = cfg.map()?;
    let psi = cfg.potential(&map)?;
    let raw = cfg.raw_filter(&map);
    let tol = ctx.thr(cfg.tolerances.filter);
    let report = if cfg.filter.normalize() {
        match make_filter(&psi, &raw, map.clone(), cfg.grid) {
            Ok(fs) => fs.filter_report(cfg.grid, tol),
            Err(e) => return Ok(Outcome::failed("normalize filter", A, e)),
        }
    } else {
        is_filter(&psi, &raw, &map, cfg.grid, tol)
    };
    Ok(Outcome {
        records: vec![
            Record::below("max |L_psi(|m|^2) - 1|", A, report.max_deviation, tol),
            Record::holds("potential is full", A, psi.is_full(cfg.grid)),
        ],
        tables: Vec::new(),
    })
}

fn qmf(ctx: &Context, cfg: &ExperimentConfig, fs: FilterSystem) -> Outcome {
    const A: &str = "qmf-gate";
    let tol = ctx.thr(cfg.tolerances.qmf);
    let r = qmf_check(&fs, cfg.grid, tol);
    Outcome {
        records: vec![
            Record::below("||u(0)| - 1|", A, r.mall1_deviation, tol),
            Record::holds(format!("u has no zeros near 0 (min |u| = {:.3e})", r.mall2_min), A, r.mall2),
            Record::holds(
                format!("|ln D(x)|/|x| bounded near 0 (sup = {:.3e})", r.mall3_constant),
                A,
                r.mall3,
            ),
            Record::holds("map is expansive", A, r.expansive),
        ],
        tables: Vec::new(),
    }
}

fn scaling(ctx: &Context, cfg: &ExperimentConfig, ev: ScalingEvaluator) -> Outcome {
    const A: &str = "scaling-function";
    let x_max = cfg.sampling.scaling_x_max;
    let mut table = Table::new("scaling.csv", &["x", "re", "im", "abs", "error_bound", "depth"]);
    let mut worst: f64 = 0.0;
    for x in linspace(-x_max, x_max, cfg.sampling.scaling_samples) {
        let v = ev.phi_tilde(x);
        worst = worst.max(v.error_bound);
        table
            .rows
            .push(vec![x, v.value.re, v.value.im, v.value.norm(), v.error_bound, v.depth as f64]);
    }
    Outcome {
        records: vec![Record::below(
            "max error bound of the truncated product",
            A,
            worst,
            ctx.thr(cfg.tolerances.scaling),
        )],
        tables: vec![table],
    }
}

fn partition(ctx: &Context, cfg: &ExperimentConfig, ev: ScalingEvaluator) -> Outcome {
    const A: &str = "partition-of-unity";
    let j = cfg.sampling.partition_j;
    let mut table = Table::new("partition.csv", &["x", "sum"]);
    let mut worst: f64 = 0.0;
    for x in midpoints(cfg.sampling.partition_samples) {
        let s = partition_of_unity(&ev, x, j);
        worst = worst.max((s - 1.0).abs());
        table.rows.push(vec![x, s]);
    }
    Outcome {
        records: vec![Record::below(
            format!("sup |sum_(|j|<={j}) |phi(x+j)|^2 - 1|"),
            A,
            worst,
            ctx.thr(cfg.tolerances.partition),
        )],
        tables: vec![table],
    }
}

fn cascade(ctx: &Context, cfg: &ExperimentConfig, fs: FilterSystem) -> Outcome {
    const A: &str = "pure-isometry";
    let mu = match invariant(fs.psi(), fs.map(), cfg.grid) {
        Ok(mu) => mu,
        Err(e) => return Outcome::failed("invariant measure", A, e),
    };
    let space = HilbertGridSpace::new(mu);
    let tol = ctx.thr(cfg.tolerances.identity);
    let polys = ctx.polys(cfg, 0x63617363);
    let iso = polys
        .iter()
        .map(|f| (space.norm(&s_apply(&fs, f.clone())) - space.norm(f)).abs())
        .fold(0.0, f64::max);
    let mut closed: f64 = 0.0;
    for f in &polys {
        for n in 0..=cfg.depths.n_max {
            closed = closed.max(space.distance(&e_n_apply(&fs, f.clone(), n), &e_n_closed(&fs, f.clone(), n)));
        }
    }
    let one = circle_fn(|_| Complex64::new(1.0, 0.0));
    let r = pureness_diagnostic(&fs, &space, &one, cfg.depths.n_max.max(1), 0.1);
    let mut table = Table::new("cascade.csv", &["n", "norm_E_n_1"]);
    for (n, v) in r.norms.iter().enumerate() {
        table.rows.push(vec![n as f64, *v]);
    }
    Outcome {
        records: vec![
            Record::below("max ||S f| - |f||", A, iso, tol),
            Record::below("max |E_n f - closed form|", A, closed, tol),
            Record::holds("|E_n 1| nonincreasing", A, r.nonincreasing),
            Record::holds(
                format!("pure: |m| != 1 on mass {:.3e}", r.non_unimodular_mass),
                A,
                r.pure,
            ),
        ],
        tables: vec![table],
    }
}

fn solenoid(ctx: &Context, cfg: &ExperimentConfig, fs: FilterSystem) -> Outcome {
    const A: &str = "proto-mra";
    let mu = match invariant(fs.psi(), fs.map(), cfg.sampling.solenoid_grid) {
        Ok(mu) => mu,
        Err(e) => return Outcome::failed("invariant measure", A, e),
    };
    let space = SolenoidSpace::new(fs, mu);
    let d_max = cfg.depths.d_max;
    let js: Vec<i64> = (-(d_max as i64)..=d_max as i64).collect();
    let mut rng = ctx.rng(0x736f6c65);
    let (mut nest, mut conj, mut unit, mut exh): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..cfg.sampling.test_functions {
        let v = SolenoidVector::new(k % (d_max + 1), TrigPoly::random(&mut rng, cfg.sampling.trig_degree).to_fn());
        let r = proto_mra_residuals(&space, &v, &js);
        nest = nest.max(r.nesting);
        conj = conj.max(r.conjugation);
        unit = unit.max(r.unitarity);
        exh = exh.max(r.exhaustion);
    }
    let tol = ctx.thr(cfg.tolerances.identity);
    Outcome {
        records: vec![
            Record::below("nesting residual", A, nest, tol),
            Record::below("conjugation residual", A, conj, tol),
            Record::below("norm preservation of U", A, unit, tol),
            Record::below("exhaustion residual", A, exh, tol),
        ],
        tables: Vec::new(),
    }
}

fn embed(ctx: &Context, cfg: &ExperimentConfig, ev: ScalingEvaluator) -> Outcome {
    const A: &str = "mallat-embedding";
    let fs = ev.filter_system().clone();
    let mu = match invariant(fs.psi(), fs.map(), cfg.grid) {
        Ok(mu) => mu,
        Err(e) => return Outcome::failed("invariant measure", A, e),
    };
    let space = HilbertGridSpace::new(mu);
    let polys = ctx.polys(cfg, 0x656d6264);
    let emb = MallatEmbedding::new(ev);
    let n_max = cfg.depths.n_max;
    let norms = emb.norms_sq_scaled(&polys, n_max, cfg.sampling.embed_x_max, cfg.sampling.embed_step);
    let mut table = Table::new("embed.csv", &["n", "f", "norm_R_n_f", "norm_f"]);
    let mut iso: f64 = 0.0;
    for (n, row) in norms.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let f_norm = space.norm(&polys[i]);
            iso = iso.max((v.sqrt() - f_norm).abs());
            table.rows.push(vec![n as f64, i as f64, v.sqrt(), f_norm]);
        }
    }
    let half = cfg.sampling.embed_x_max / 4.0;
    let xs = linspace(-half, half, cfg.sampling.embed_samples);
    let (mut inter, mut dil): (f64, f64) = (0.0, 0.0);
    for f in &polys {
        for n in 0..n_max {
            inter = inter.max(emb.intertwining_residual(f, n, &xs));
            dil = dil.max(emb.dilation_residual(f, n, &xs));
        }
    }
    Outcome {
        records: vec![
            Record::below("max ||R_n f| - |f||", A, iso, ctx.thr(cfg.tolerances.isometry)),
            Record::below("intertwining residual", A, inter, ctx.thr(cfg.tolerances.intertwining)),
            Record::below("dilation residual", A, dil, ctx.thr(cfg.tolerances.dilation)),
        ],
        tables: vec![table],
    }
}

fn kernels(ctx: &Context, cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    const A: &str = "groupoid-kernels";
    let degree = cfg
        .is_constant()
        .ok_or_else(|| ConfigError::new("dynamics.kind", "kernel identities need constant dynamics z -> z^N"))?;
    let fs = match cfg.system() {
        Ok(fs) => fs,
        Err(SystemError::Config(e)) => return Err(e),
        Err(SystemError::Numerical(e)) => return Ok(Outcome::failed("build filter system", A, e)),
    };
    let k = cfg.depths.k;
    let patch = PointPatch::default_for(degree, k).map_err(|e| ConfigError::new("dynamics.N", e.to_string()))?;
    let tol = ctx.thr(cfg.tolerances.kernel);
    let u = |x: f64| fs.u(x);
    let test_fn = |x: f64| circle_point(x) + 0.5 * circle_point(-2.0 * x);
    let mut records = Vec::new();
    match groupoid::identity_suite(&patch, &u, &test_fn, cfg.depths.n_max.min(k)) {
        Ok(checks) => {
            for c in checks {
                records.push(Record::below(c.name, A, c.residual, tol));
            }
        }
        Err(e) => return Ok(Outcome::failed("identity suite", A, e)),
    }
    let mut rng = ctx.rng(0x6b65726e);
    let mut assoc: f64 = 0.0;
    for _ in 0..cfg.sampling.kernel_samples {
        let f = groupoid::random_kernel(&patch, &mut rng, 20);
        let g = groupoid::random_kernel(&patch, &mut rng, 20);
        let h = groupoid::random_kernel(&patch, &mut rng, 20);
        let oracle = groupoid::triple_product_oracle(&f, &g, &h);
        let products = groupoid::convolve(&f, &g)
            .and_then(|fg| groupoid::convolve(&fg, &h))
            .and_then(|left| Ok((left, groupoid::convolve(&f, &groupoid::convolve(&g, &h)?)?)));
        match products {
            Ok((left, right)) => {
                assoc = assoc
                    .max(left.max_diff(&oracle, |_| true))
                    .max(right.max_diff(&oracle, |_| true));
            }
            Err(e) => return Ok(Outcome::failed("convolution", A, e)),
        }
    }
    records.push(Record::below(
        format!("associativity vs triple sum, {} kernels", cfg.sampling.kernel_samples),
        A,
        assoc,
        tol,
    ));
    Ok(Outcome {
        records,
        tables: Vec::new(),
    })
}

fn paths(ctx: &Context, cfg: &ExperimentConfig, fs: FilterSystem) -> Outcome {
    const A: &str = "path-measure";
    let map: Arc<CircleMap> = fs.map().clone();
    let d = fs.d_potential();
    let depth = cfg.depths.n_max.max(1);
    let x = cfg.sampling.path_x;
    let samples = match sample_paths(&d, &map, x, depth, ctx.seed, cfg.sampling.paths) {
        Ok(s) => s,
        Err(e) => return Outcome::failed("sample paths", A, e),
    };
    let mut header = vec!["index".to_string(), "log_weight".to_string()];
    header.extend((0..=depth).map(|i| format!("x{i}")));
    let mut table = Table {
        file: "paths.csv".into(),
        header,
        rows: Vec::new(),
    };
    for s in &samples {
        let mut row = vec![s.index as f64, s.log_weight];
        row.extend(s.path.iter().copied());
        table.rows.push(row);
    }
    let factors: Vec<CircleFn> = (0..depth)
        .map(|i| {
            let k = (i + 1) as f64;
            circle_fn(move |y| Complex64::new(1.0 + 0.5 * (std::f64::consts::TAU * k * y).cos(), 0.0))
        })
        .collect();
    let f = CylinderFunction::new(factors).expect("nonempty cylinder");
    let exact = nu_cylinder(&d, &map, x, &f);
    let mut records = Vec::new();
    match monte_carlo_cylinder(&d, &map, x, &f, cfg.sampling.paths, ctx.seed) {
        Ok((mean, stderr)) => records.push(Record::below(
            "|Monte Carlo - exact| / standard error",
            A,
            (mean - exact).norm() / stderr,
            ctx.thr(cfg.tolerances.mc_sigmas),
        )),
        Err(e) => return Outcome::failed("Monte Carlo", A, e),
    }
    let consistency = (nu_cylinder(&d, &map, x, &f.extended()) - exact).norm();
    records.push(Record::below(
        "depth consistency of nu",
        A,
        consistency,
        ctx.thr(cfg.tolerances.identity),
    ));
    Outcome {
        records,
        tables: vec![table],
    }
}

fn verify_suite(ctx: &Context) -> Outcome {
    let opts = VerifyOptions {
        seed: ctx.seed,
        tol_scale: ctx.tol_scale,
    };
    let mut records = Vec::new();
    for id in verify::CRITERIA {
        match verify::run(id, &opts) {
            Ok(report) => {
                eprintln!(
                    "criterion {id:>2} {} {} ({:.2}s)",
                    if report.pass() { "PASS" } else { "FAIL" },
                    report.title,
                    report.seconds
                );
                for c in report.checks {
                    records.push(Record {
                        name: format!("criterion {id}: {}", c.name),
                        anchor: c.anchor.to_string(),
                        value: c.value,
                        threshold: c.threshold,
                        pass: c.pass,
                    });
                }
            }
            Err(e) => {
                eprintln!("criterion {id:>2} FAIL {e}");
                records.push(Record::below(format!("criterion {id}: {e}"), "verify", f64::NAN, 0.0));
            }
        }
    }
    Outcome {
        records,
        tables: Vec::new(),
    }
}
