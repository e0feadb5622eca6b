//! Experiment configuration in TOML.
//!
//! ```toml
//! [manifold]
//! kind = "hyperboloid"
//! n = 2
//! kappa = 1.0
//!
//! [objective]
//! kind = "frechet_mean"
//! seed = 7
//! samples = 12
//!
//! [algorithm]
//! kind = "accelerated"
//! mode = "strongly"
//! delta_mode = "analytic"
//!
//! [run]
//! k_max = 500
//! domain_radius = 1.5
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use geodescent_core::acceleration::DeltaMode;
use serde::{Deserialize, Serialize};

/// Iteration budget when `run.k_max` is absent.
pub const DEFAULT_K_MAX: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    Hyperboloid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub n: usize,
    pub kappa: Option<f64>,
    pub radius: Option<f64>,
}

impl ManifoldSpec {
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean => self.n,
            _ => self.n + 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `½Σwᵢ(xᵢ − bᵢ)²` on ℝⁿ.
    Quadratic,
    /// `½d(x, anchor)²`.
    SquaredDistance,
    FrechetMean,
    /// `−½xᵀQx` on a sphere.
    Rayleigh,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: Option<ObjectiveKind>,
    /// Seed for every randomly generated parameter below.
    #[serde(default)]
    pub seed: u64,
    /// Quadratic center; drawn from a standard normal when absent.
    pub b: Option<Vec<f64>>,
    /// Quadratic weights, log-spaced on `[weight_lo, weight_hi]`.
    pub weight_lo: Option<f64>,
    pub weight_hi: Option<f64>,
    /// Squared-distance anchor in ambient coordinates.
    pub anchor: Option<Vec<f64>>,
    /// Random anchors land within this distance of the domain center.
    pub anchor_radius: Option<f64>,
    /// Fréchet-mean samples in ambient coordinates.
    pub points: Option<Vec<Vec<f64>>>,
    pub samples: Option<usize>,
    pub sample_radius: Option<f64>,
    /// Rayleigh matrix, row major.
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Rgd,
    Proximal,
    CubicNewton,
    Accelerated,
}

impl AlgorithmKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Rgd => "rgd",
            AlgorithmKind::Proximal => "proximal",
            AlgorithmKind::CubicNewton => "cubic_newton",
            AlgorithmKind::Accelerated => "accelerated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Gconvex,
    Strongly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Rgd,
    Proximal,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: Option<AlgorithmKind>,
    /// Step size of RGD and proximal steps, also inside the accelerated oracle.
    pub eta: Option<f64>,
    pub big_m: Option<f64>,
    pub theta: Option<f64>,
    /// Hessian-Lipschitz constant; estimated by sampling when absent.
    pub rho: Option<f64>,
    pub rho_samples: Option<usize>,
    pub mode: Option<ScheduleMode>,
    pub xi0: Option<f64>,
    pub delta_mode: Option<DeltaMode>,
    pub oracle: Option<OracleKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub k_max: Option<usize>,
    #[serde(default)]
    pub x0_seed: u64,
    pub x0: Option<Vec<f64>>,
    pub domain_center: Option<Vec<f64>>,
    pub domain_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_trace")]
    pub trace: PathBuf,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

fn default_trace() -> PathBuf {
    PathBuf::from("trace.jsonl")
}

fn default_report() -> PathBuf {
    PathBuf::from("report.json")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { trace: default_trace(), report: default_report() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Names the output directory; defaults to the config file stem.
    pub name: Option<String>,
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn k_max(&self) -> usize {
        self.run.k_max.unwrap_or(DEFAULT_K_MAX)
    }

    pub fn objective_kind(&self) -> ObjectiveKind {
        self.objective.kind.expect("validated config names an objective")
    }

    pub fn algorithm_kind(&self) -> AlgorithmKind {
        self.algorithm.kind.expect("validated config names an algorithm")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} invalid field(s):\n  {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
}

#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub name: String,
    pub warnings: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    parse_config(&text, stem)
}

/// Parses and validates `text`; `default_name` is used when the config has
/// no `name`.
pub fn parse_config(text: &str, default_name: &str) -> Result<LoadedConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    let violations = validate(&config);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    let mut warnings = Vec::new();
    if config.run.k_max.is_none() {
        warnings.push(format!("run.k_max missing; defaulting to {DEFAULT_K_MAX}"));
    }
    if config.algorithm.delta_mode == Some(DeltaMode::Unit) && config.manifold.kind != ManifoldKind::Euclidean {
        warnings.push("algorithm.delta_mode = \"unit\" is not a valid distortion rate on a curved manifold".into());
    }
    let name = config.name.clone().unwrap_or_else(|| default_name.to_string());
    Ok(LoadedConfig { config, name, warnings })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Every rule the config breaks.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut bad = |field: &str, message: String| v.push(Violation { field: field.into(), message });
    let positive = |x: Option<f64>| x.is_none_or(|x| x > 0.0 && x.is_finite());

    let m = &cfg.manifold;
    if m.n == 0 {
        bad("manifold.n", "must be at least 1".into());
    }
    match m.kind {
        ManifoldKind::Euclidean => {
            if m.kappa.is_some() || m.radius.is_some() {
                bad("manifold", "euclidean space takes neither kappa nor radius".into());
            }
        }
        ManifoldKind::Sphere => {
            if m.radius.is_none() {
                bad("manifold.radius", "required for a sphere".into());
            }
            if m.kappa.is_some() {
                bad("manifold.kappa", "only used by the hyperboloid".into());
            }
        }
        ManifoldKind::Hyperboloid => {
            if m.kappa.is_none() {
                bad("manifold.kappa", "required for the hyperboloid".into());
            }
            if m.radius.is_some() {
                bad("manifold.radius", "only used by the sphere".into());
            }
        }
    }
    if !positive(m.kappa) {
        bad("manifold.kappa", "must be positive".into());
    }
    if !positive(m.radius) {
        bad("manifold.radius", "must be positive".into());
    }
    let amb = m.ambient_dim();
    let check_len = |bad: &mut dyn FnMut(&str, String), field: &str, xs: &Option<Vec<f64>>, n: usize| {
        if let Some(xs) = xs {
            if xs.len() != n {
                bad(field, format!("has {} coordinates, expected {n}", xs.len()));
            }
        }
    };

    let o = &cfg.objective;
    match o.kind {
        None => bad("objective.kind", "missing".into()),
        Some(ObjectiveKind::Quadratic) => {
            if m.kind != ManifoldKind::Euclidean {
                bad("objective.kind", "quadratic needs a euclidean manifold".into());
            }
            check_len(&mut bad, "objective.b", &o.b, m.n);
            if !positive(o.weight_lo) || !positive(o.weight_hi) {
                bad("objective.weight_lo", "weights must be positive".into());
            }
            if o.weight_lo.unwrap_or(1.0) > o.weight_hi.unwrap_or(1.0) {
                bad("objective.weight_lo", "exceeds weight_hi".into());
            }
        }
        Some(ObjectiveKind::SquaredDistance) => {
            check_len(&mut bad, "objective.anchor", &o.anchor, amb);
            if !positive(o.anchor_radius) {
                bad("objective.anchor_radius", "must be positive".into());
            }
        }
        Some(ObjectiveKind::FrechetMean) => {
            if let Some(pts) = &o.points {
                if pts.is_empty() {
                    bad("objective.points", "empty".into());
                }
                if pts.iter().any(|p| p.len() != amb) {
                    bad("objective.points", format!("every point needs {amb} coordinates"));
                }
                if o.samples.is_some() {
                    bad("objective.samples", "give either points or samples".into());
                }
            }
            if o.samples == Some(0) {
                bad("objective.samples", "must be at least 1".into());
            }
            if !positive(o.sample_radius) {
                bad("objective.sample_radius", "must be positive".into());
            }
        }
        Some(ObjectiveKind::Rayleigh) => {
            if m.kind != ManifoldKind::Sphere {
                bad("objective.kind", "rayleigh needs a sphere".into());
            }
            if let Some(q) = &o.matrix {
                if q.len() != amb || q.iter().any(|r| r.len() != amb) {
                    bad("objective.matrix", format!("must be {amb} x {amb}"));
                } else if (0..amb).any(|i| (0..i).any(|j| q[i][j] != q[j][i])) {
                    bad("objective.matrix", "must be symmetric".into());
                }
            }
        }
    }
    let kind = o.kind;
    let field_for = |name: &str, present: bool, allowed: &[ObjectiveKind], bad: &mut dyn FnMut(&str, String)| {
        if present && !kind.is_some_and(|k| allowed.contains(&k)) {
            bad(&format!("objective.{name}"), "not used by this objective".into());
        }
    };
    use ObjectiveKind::*;
    field_for("b", o.b.is_some(), &[Quadratic], &mut bad);
    field_for("weight_lo", o.weight_lo.is_some(), &[Quadratic], &mut bad);
    field_for("weight_hi", o.weight_hi.is_some(), &[Quadratic], &mut bad);
    field_for("anchor", o.anchor.is_some(), &[SquaredDistance], &mut bad);
    field_for("anchor_radius", o.anchor_radius.is_some(), &[SquaredDistance], &mut bad);
    field_for("points", o.points.is_some(), &[FrechetMean], &mut bad);
    field_for("samples", o.samples.is_some(), &[FrechetMean], &mut bad);
    field_for("sample_radius", o.sample_radius.is_some(), &[FrechetMean], &mut bad);
    field_for("matrix", o.matrix.is_some(), &[Rayleigh], &mut bad);

    let a = &cfg.algorithm;
    if !positive(a.eta) {
        bad("algorithm.eta", "must be positive".into());
    }
    if !positive(a.big_m) {
        bad("algorithm.big_m", "must be positive".into());
    }
    if !positive(a.rho) {
        bad("algorithm.rho", "must be positive".into());
    }
    if a.theta.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
        bad("algorithm.theta", "must be nonnegative".into());
    }
    if a.rho_samples == Some(0) {
        bad("algorithm.rho_samples", "must be at least 1".into());
    }
    let alg = a.kind;
    let only = |name: &str, present: bool, k: AlgorithmKind, bad: &mut dyn FnMut(&str, String)| {
        if present && alg.is_some() && alg != Some(k) {
            bad(&format!("algorithm.{name}"), format!("only used by {}", k.as_str()));
        }
    };
    only("big_m", a.big_m.is_some(), AlgorithmKind::CubicNewton, &mut bad);
    only("theta", a.theta.is_some(), AlgorithmKind::CubicNewton, &mut bad);
    only("rho", a.rho.is_some(), AlgorithmKind::CubicNewton, &mut bad);
    only("rho_samples", a.rho_samples.is_some(), AlgorithmKind::CubicNewton, &mut bad);
    only("mode", a.mode.is_some(), AlgorithmKind::Accelerated, &mut bad);
    only("xi0", a.xi0.is_some(), AlgorithmKind::Accelerated, &mut bad);
    only("delta_mode", a.delta_mode.is_some(), AlgorithmKind::Accelerated, &mut bad);
    only("oracle", a.oracle.is_some(), AlgorithmKind::Accelerated, &mut bad);
    match alg {
        None => bad("algorithm.kind", "missing".into()),
        Some(AlgorithmKind::Accelerated) => {
            let strongly = a.mode == Some(ScheduleMode::Strongly);
            if a.xi0.is_some() && !strongly {
                bad("algorithm.xi0", "only used by the strongly convex schedule".into());
            }
            if strongly && kind == Some(Rayleigh) {
                bad("algorithm.mode", "strongly convex schedule needs a strongly g-convex objective".into());
            }
            if a.delta_mode == Some(DeltaMode::Analytic) && m.kind == ManifoldKind::Sphere {
                bad("algorithm.delta_mode", "analytic rates need euclidean space or the hyperboloid".into());
            }
        }
        Some(_) => {}
    }

    let r = &cfg.run;
    if r.k_max == Some(0) {
        bad("run.k_max", "must be at least 1".into());
    }
    check_len(&mut bad, "run.x0", &r.x0, amb);
    check_len(&mut bad, "run.domain_center", &r.domain_center, amb);
    match r.domain_radius {
        None => bad("run.domain_radius", "missing".into()),
        Some(d) if !(d > 0.0 && d.is_finite()) => bad("run.domain_radius", "must be positive".into()),
        Some(d) => {
            if let (ManifoldKind::Sphere, Some(radius)) = (m.kind, m.radius) {
                if d >= std::f64::consts::FRAC_PI_2 * radius {
                    bad("run.domain_radius", "domain diameter must stay below pi times the sphere radius".into());
                }
            }
        }
    }
    v
}
