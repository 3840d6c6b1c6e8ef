//! Experiment configuration: JSON schema, validation and construction of the
//! numerical objects it describes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use circle_mra::dynamics::{BlaschkeParams, CircleMap};
use circle_mra::transfer::{make_filter, normalize_potential, root_filter, FilterSystem, Potential};
use circle_mra::{circle_fn, circle_point, CircleFn};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{Map, Value};

/// A problem with the configuration, located by a dotted field path.
#[derive(Debug, thiserror::Error)]
#[error("configuration error at `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub filter: FilterSpec,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub depths: Depths,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory for reports and CSV files; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_grid() -> usize {
    circle_mra::transfer::DEFAULT_GRID
}

pub fn default_seed() -> u64 {
    circle_mra::verify::VerifyOptions::default().seed
}

/// Tagged sections are written as `{"kind": ..., fields}`; see [`untag`].
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    /// `z ↦ z^N`.
    Constant {
        #[serde(rename = "N")]
        n: i64,
    },
    /// `z ↦ C ∏ (z - a_k)/(1 - conj(a_k) z)`; complex numbers as `[re, im]`.
    Blaschke {
        #[serde(rename = "C")]
        c: [f64; 2],
        a: Vec<[f64; 2]>,
    },
    /// Density samples `phi(t_i)` on `[-1/2, 1/2)`.
    Sampled { t: Vec<f64>, phi: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `ψ = 1/φ`.
    ReciprocalDensity {},
    /// `1/φ` divided by `L_{1/φ}1∘σ`.
    Normalized {},
    Constant { value: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::ReciprocalDensity {}
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    /// `m(z) = ∑_k coeffs[k] z^k`.
    Trigpoly {
        coeffs: Vec<[f64; 2]>,
        #[serde(default)]
        normalize: bool,
    },
    /// `m_raw(z) = ∏_{k≥1} (z - e^{2πi r_k})` over the nonzero roots of zero.
    RootZeros {
        #[serde(default = "yes")]
        normalize: bool,
    },
    /// Values `[re, im]` at the midpoints of `M` uniform cells of `[-1/2, 1/2)`,
    /// extended by trigonometric interpolation.
    Sampled {
        values: Vec<[f64; 2]>,
        #[serde(default)]
        normalize: bool,
    },
}

const TAGGED: [&str; 3] = ["dynamics", "potential", "filter"];

/// Rewrites `{"kind": k, rest}` into serde's external form `{k: {rest}}`. Internally tagged enums buffer
/// their content and would lose the path to a bad field.
fn untag(root: &mut Value) -> Result<(), ConfigError> {
    let Some(obj) = root.as_object_mut() else {
        return Ok(());
    };
    for key in TAGGED {
        let Some(Value::Object(section)) = obj.get_mut(key) else {
            continue;
        };
        let kind = match section.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(ConfigError::new(format!("{key}.kind"), "must be a string")),
            None => return Err(ConfigError::new(format!("{key}.kind"), "missing")),
        };
        let rest = std::mem::take(section);
        obj[key] = Value::Object(Map::from_iter([(kind, Value::Object(rest))]));
    }
    Ok(())
}

/// Maps a path in the rewritten document back to the user's layout.
fn retag(path: &str, root: &Value) -> String {
    for key in TAGGED {
        let Some(tail) = path.strip_prefix(key) else { continue };
        if let Value::Object(m) = &root[key] {
            let kind = m.keys().next().map(String::as_str).unwrap_or("");
            if tail.is_empty() {
                return format!("{key}.kind");
            }
            if let Some(rest) = tail.strip_prefix('.').and_then(|t| t.strip_prefix(kind)) {
                return format!("{key}{rest}");
            }
        }
    }
    path.to_string()
}

fn yes() -> bool {
    true
}

impl FilterSpec {
    pub fn normalize(&self) -> bool {
        match self {
            Self::Trigpoly { normalize, .. } | Self::RootZeros { normalize } | Self::Sampled { normalize, .. } => *normalize,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Depths {
    /// Solenoid depths for the proto-MRA checks.
    pub d_max: usize,
    /// Levels for `Ẽ_n`, `R_n` and path depth.
    pub n_max: usize,
    /// Preimage depth of the groupoid patch.
    pub k: usize,
}

impl Default for Depths {
    fn default() -> Self {
        Self {
            d_max: 4,
            n_max: 4,
            k: 3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub filter: f64,
    pub qmf: f64,
    pub scaling: f64,
    pub partition: f64,
    pub identity: f64,
    pub kernel: f64,
    pub isometry: f64,
    pub intertwining: f64,
    pub dilation: f64,
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            filter: 1e-12,
            qmf: 1e-9,
            scaling: 1e-9,
            partition: 5e-3,
            identity: 1e-10,
            kernel: 1e-12,
            isometry: 5e-3,
            intertwining: 1e-9,
            dilation: 1e-8,
            mc_sigmas: 4.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub scaling_x_max: f64,
    pub scaling_samples: usize,
    pub partition_samples: usize,
    pub partition_j: i64,
    pub test_functions: usize,
    pub trig_degree: i64,
    pub solenoid_grid: usize,
    pub embed_x_max: f64,
    pub embed_step: f64,
    pub embed_samples: usize,
    pub kernel_samples: usize,
    pub path_x: f64,
    pub paths: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            scaling_x_max: 8.0,
            scaling_samples: 1601,
            partition_samples: 64,
            partition_j: 1000,
            test_functions: 10,
            trig_degree: 2,
            solenoid_grid: 256,
            embed_x_max: 200.0,
            embed_step: 1.0 / 32.0,
            embed_samples: 1024,
            kernel_samples: 50,
            path_x: 0.17,
            paths: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut root: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("<root>", e.to_string()))?;
        untag(&mut root)?;
        let config: Self = serde_path_to_error::deserialize(&root).map_err(|e| {
            let field = retag(&e.path().to_string(), &root);
            ConfigError::new(if field == "." { "<root>".to_string() } else { field }, e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        let tolerances = [
            ("filter", t.filter),
            ("qmf", t.qmf),
            ("scaling", t.scaling),
            ("partition", t.partition),
            ("identity", t.identity),
            ("kernel", t.kernel),
            ("isometry", t.isometry),
            ("intertwining", t.intertwining),
            ("dilation", t.dilation),
            ("mc_sigmas", t.mc_sigmas),
        ];
        for (name, v) in tolerances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        if self.grid < 16 {
            return Err(ConfigError::new("grid", "need at least 16 grid points"));
        }
        match &self.dynamics {
            DynamicsSpec::Constant { n } if *n < 2 => {
                return Err(ConfigError::new("dynamics.N", format!("N must be at least 2, got {n}")))
            }
            DynamicsSpec::Blaschke { a, .. } => {
                if let Some(i) = a.iter().position(|a| a[0].hypot(a[1]) >= 1.0) {
                    return Err(ConfigError::new(format!("dynamics.a[{i}]"), "zeros must lie in the open unit disk"));
                }
            }
            DynamicsSpec::Sampled { t, phi } if t.len() != phi.len() => {
                return Err(ConfigError::new("dynamics.phi", "needs one value per entry of `t`"))
            }
            _ => {}
        }
        if let PotentialSpec::Constant { value } = self.potential {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::new("potential.value", "must be positive"));
            }
        }
        match &self.filter {
            FilterSpec::Trigpoly { coeffs, .. } if coeffs.is_empty() => {
                return Err(ConfigError::new("filter.coeffs", "needs at least one coefficient"))
            }
            FilterSpec::Sampled { values, .. } if values.len() < 2 => {
                return Err(ConfigError::new("filter.values", "needs at least two samples"))
            }
            _ => {}
        }
        let s = &self.sampling;
        let positive = [
            ("scaling_x_max", s.scaling_x_max),
            ("embed_x_max", s.embed_x_max),
            ("embed_step", s.embed_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("sampling.{name}"), "must be positive"));
            }
        }
        let counts = [
            ("scaling_samples", s.scaling_samples),
            ("partition_samples", s.partition_samples),
            ("test_functions", s.test_functions),
            ("solenoid_grid", s.solenoid_grid),
            ("embed_samples", s.embed_samples),
            ("kernel_samples", s.kernel_samples),
            ("paths", s.paths),
        ];
        for (name, v) in counts {
            if v < 2 {
                return Err(ConfigError::new(format!("sampling.{name}"), "must be at least 2"));
            }
        }
        if s.partition_j < 0 || s.trig_degree < 0 {
            return Err(ConfigError::new("sampling", "partition_j and trig_degree must be nonnegative"));
        }
        if !(-0.5..0.5).contains(&s.path_x) {
            return Err(ConfigError::new("sampling.path_x", "must lie in [-0.5, 0.5)"));
        }
        Ok(())
    }

    pub fn map(&self) -> Result<Arc<CircleMap>, ConfigError> {
        let map = match &self.dynamics {
            DynamicsSpec::Constant { n } => CircleMap::constant(*n),
            DynamicsSpec::Blaschke { c, a } => CircleMap::blaschke(BlaschkeParams::new(
                Complex64::new(c[0], c[1]),
                a.iter().map(|a| Complex64::new(a[0], a[1])).collect(),
            )),
            DynamicsSpec::Sampled { t, phi } => CircleMap::sampled(t, phi),
        };
        map.map(Arc::new).map_err(|e| ConfigError::new("dynamics", e.to_string()))
    }

    pub fn potential(&self, map: &Arc<CircleMap>) -> Result<Potential, ConfigError> {
        match self.potential {
            PotentialSpec::ReciprocalDensity {} => Ok(Potential::reciprocal_density(map.clone())),
            PotentialSpec::Normalized {} => normalize_potential(&Potential::reciprocal_density(map.clone()), map.clone(), self.grid)
                .map_err(|e| ConfigError::new("potential", e.to_string())),
            PotentialSpec::Constant { value } => Ok(Potential::constant(value)),
        }
    }

    /// The filter as given, before any normalization.
    pub fn raw_filter(&self, map: &CircleMap) -> CircleFn {
        match &self.filter {
            FilterSpec::Trigpoly { coeffs, .. } => {
                let terms: Vec<(i64, Complex64)> =
                    coeffs.iter().enumerate().map(|(k, c)| (k as i64, Complex64::new(c[0], c[1]))).collect();
                circle_mra::trig::TrigPoly::new(terms).to_fn()
            }
            FilterSpec::RootZeros { .. } => root_filter(map),
            FilterSpec::Sampled { values, .. } => interpolate(values),
        }
    }

    /// Map, potential and filter; the filter is normalized when the config asks for it.
    pub fn system(&self) -> Result<FilterSystem, SystemError> {
        let map = self.map()?;
        let psi = self.potential(&map)?;
        let raw = self.raw_filter(&map);
        if self.filter.normalize() {
            make_filter(&psi, &raw, map, self.grid).map_err(SystemError::Numerical)
        } else {
            Ok(FilterSystem::new_unchecked(map, psi, raw))
        }
    }

    pub fn is_constant(&self) -> Option<i64> {
        match self.dynamics {
            DynamicsSpec::Constant { n } => Some(n),
            _ => None,
        }
    }
}

/// Building a system can fail on the configuration or in the numerics.
#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(circle_mra::Error),
}

/// Trigonometric interpolant through samples at the cell midpoints
/// `x_j = (j + 1/2)/M - 1/2`, with frequencies `-⌊M/2⌋ ..` so that it has
/// the least degree.
fn interpolate(values: &[[f64; 2]]) -> CircleFn {
    let m = values.len();
    let lo = -((m / 2) as i64);
    let terms: Vec<(i64, Complex64)> = (lo..lo + m as i64)
        .map(|k| {
            let c: Complex64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let x = (j as f64 + 0.5) / m as f64 - 0.5;
                    Complex64::new(v[0], v[1]) * circle_point(-(k as f64) * x)
                })
                .sum();
            (k, c / m as f64)
        })
        .collect();
    let poly = circle_mra::trig::TrigPoly::new(terms);
    circle_fn(move |x| poly.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAAR: &str = r#"{
        "dynamics": {"kind": "constant", "N": 2},
        "filter": {"kind": "trigpoly", "coeffs": [[0.7071067811865476, 0], [0.7071067811865476, 0]]}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(HAAR).unwrap();
        assert_eq!(c.grid, 4096);
        assert_eq!(c.depths.k, 3);
        assert_eq!(c.seed, default_seed());
        let fs = c.system().unwrap();
        assert!((fs.m(0.2) - FilterSystem::haar().m(0.2)).norm() < 1e-15);
        assert!((fs.psi().eval(0.1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors_point_at_fields() {
        let field = |from: &str, to: &str| ExperimentConfig::parse(&HAAR.replace(from, to)).unwrap_err().field;
        assert_eq!(field("\"N\": 2", "\"N\": \"two\""), "dynamics.N");
        assert_eq!(field("\"N\": 2", "\"N\": 1"), "dynamics.N");
        assert_eq!(field("\"N\": 2", "\"M\": 2"), "dynamics.M");
        assert_eq!(field("[0.7071067811865476, 0]]", "[0.7071067811865476]]"), "filter.coeffs[1]");
        assert_eq!(field("\"trigpoly\"", "\"spline\""), "filter.kind");
        assert_eq!(field("\"kind\": \"constant\", ", ""), "dynamics.kind");
        assert_eq!(field("\"N\": 2}", "\"N\": 2}, \"grid\": \"big\""), "grid");
        assert_eq!(field("{", "{,"), "<root>");
    }

    #[test]
    fn negative_tolerance_rejected() {
        let text = r#"{
            "dynamics": {"kind": "constant", "N": 2},
            "filter": {"kind": "root_zeros"},
            "tolerances": {"qmf": 0.0}
        }"#;
        assert_eq!(ExperimentConfig::parse(text).unwrap_err().field, "tolerances.qmf");
    }

    #[test]
    fn interpolation_reproduces_trig_polys() {
        let m = 16;
        let f = |x: f64| circle_point(x) * 0.5 + circle_point(-3.0 * x) * Complex64::new(0.0, 0.25) + 1.0;
        let values: Vec<[f64; 2]> = (0..m)
            .map(|j| {
                let v = f((j as f64 + 0.5) / m as f64 - 0.5);
                [v.re, v.im]
            })
            .collect();
        let g = interpolate(&values);
        for k in 0..50 {
            let x = -0.5 + k as f64 / 50.0;
            assert!((g(x) - f(x)).norm() < 1e-13);
        }
    }
}
