//! Turns a validated config into concrete objects.

use geodescent_core::acceleration::{DeltaMode, DescentOracle, Schedule};
use geodescent_core::descent::{CubicNewton, DescentMethod, Proximal, Rgd};
use geodescent_core::geometry::{DomainSpec, Manifold, Point};
use geodescent_core::objectives::{
    estimate_hessian_lipschitz, ConvexityClass, FrechetMean, Objective, Quadratic, Rayleigh, SquaredDistance,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{AlgorithmKind, ExperimentConfig, ManifoldKind, ObjectiveKind, OracleKind, ScheduleMode};

/// Default number of sampled pairs when estimating `ρ`.
pub const DEFAULT_RHO_SAMPLES: usize = 2000;

#[derive(Debug, thiserror::Error)]
#[error("{field}: {source}")]
pub struct BuildError {
    pub field: &'static str,
    #[source]
    pub source: geodescent_core::Error,
}

trait Context<T> {
    fn field(self, field: &'static str) -> Result<T, BuildError>;
}

impl<T, E: Into<geodescent_core::Error>> Context<T> for Result<T, E> {
    fn field(self, field: &'static str) -> Result<T, BuildError> {
        self.map_err(|e| BuildError { field, source: e.into() })
    }
}

fn invalid(field: &'static str, msg: String) -> BuildError {
    BuildError { field, source: geodescent_core::Error::InvalidParameter(msg) }
}

pub enum Method {
    Descent { alg: Box<dyn DescentMethod>, params: serde_json::Value },
    Accelerated { schedule: Schedule, oracle: DescentOracle, delta_mode: DeltaMode },
}

pub struct Experiment {
    pub manifold: Manifold,
    pub objective: Box<dyn Objective>,
    pub domain: DomainSpec,
    pub x0: Point,
    pub method: Method,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn build_manifold(cfg: &ExperimentConfig) -> Result<Manifold, BuildError> {
    let m = &cfg.manifold;
    match m.kind {
        ManifoldKind::Euclidean => Manifold::euclidean(m.n),
        ManifoldKind::Sphere => Manifold::sphere(m.n, m.radius.unwrap_or(1.0)),
        ManifoldKind::Hyperboloid => Manifold::hyperboloid(m.n, m.kappa.unwrap_or(1.0)),
    }
    .field("manifold")
}

pub fn build(cfg: &ExperimentConfig) -> Result<Experiment, BuildError> {
    let manifold = build_manifold(cfg)?;
    let center = match &cfg.run.domain_center {
        Some(c) => manifold.point_from_slice(c).field("run.domain_center")?,
        None => manifold.origin(),
    };
    let domain = DomainSpec::new(center, cfg.run.domain_radius.unwrap_or(1.0)).field("run.domain_radius")?;
    let mut objective = build_objective(cfg, &manifold, &domain)?;
    let x0 = match &cfg.run.x0 {
        Some(x) => manifold.point_from_slice(x).field("run.x0")?,
        None => manifold
            .random_point_near(domain.center(), domain.radius(), &mut rng(cfg.run.x0_seed))
            .field("run.x0_seed")?,
    };
    let method = build_method(cfg, objective.as_mut(), &domain)?;
    Ok(Experiment { manifold, objective, domain, x0, method })
}

fn build_objective(cfg: &ExperimentConfig, m: &Manifold, dom: &DomainSpec) -> Result<Box<dyn Objective>, BuildError> {
    let o = &cfg.objective;
    let mut r = rng(o.seed);
    Ok(match cfg.objective_kind() {
        ObjectiveKind::Quadratic => {
            let b = match &o.b {
                Some(b) => DVector::from_column_slice(b),
                None => DVector::from_fn(m.dim(), |_, _| r.sample(StandardNormal)),
            };
            let (lo, hi) = (o.weight_lo.unwrap_or(1.0), o.weight_hi.unwrap_or(1.0));
            Box::new(Quadratic::log_spaced(b, lo, hi).field("objective")?)
        }
        ObjectiveKind::SquaredDistance => {
            let anchor = match &o.anchor {
                Some(a) => m.point_from_slice(a).field("objective.anchor")?,
                None => m
                    .random_point_near(dom.center(), o.anchor_radius.unwrap_or(dom.radius() / 2.0), &mut r)
                    .field("objective.anchor_radius")?,
            };
            Box::new(SquaredDistance::new(anchor, dom.clone()).field("objective")?)
        }
        ObjectiveKind::FrechetMean => {
            let pts = match &o.points {
                Some(ps) => ps.iter().map(|p| m.point_from_slice(p)).collect::<Result<Vec<_>, _>>().field("objective.points")?,
                None => (0..o.samples.unwrap_or(10))
                    .map(|_| m.random_point_near(dom.center(), o.sample_radius.unwrap_or(dom.radius()), &mut r))
                    .collect::<Result<Vec<_>, _>>()
                    .field("objective.sample_radius")?,
            };
            Box::new(FrechetMean::new(pts, dom.clone()).field("objective")?)
        }
        ObjectiveKind::Rayleigh => {
            let n = m.ambient_dim();
            let q = match &o.matrix {
                Some(rows) => DMatrix::from_fn(n, n, |i, j| rows[i][j]),
                None => {
                    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
                    (&a + a.transpose()) * 0.5
                }
            };
            Box::new(Rayleigh::new(*m, q).field("objective")?)
        }
    })
}

fn descent<A: DescentMethod + serde::Serialize + 'static>(alg: A) -> Method {
    let params = serde_json::to_value(&alg).unwrap_or_default();
    Method::Descent { alg: Box::new(alg), params }
}

fn l_smooth(obj: &dyn Objective) -> Result<f64, BuildError> {
    obj.metadata()
        .l_smooth
        .filter(|l| *l > 0.0)
        .ok_or_else(|| invalid("objective", "no smoothness constant".into()))
}

fn build_method(cfg: &ExperimentConfig, obj: &mut dyn Objective, dom: &DomainSpec) -> Result<Method, BuildError> {
    let a = &cfg.algorithm;
    Ok(match cfg.algorithm_kind() {
        AlgorithmKind::Rgd => {
            let eta = match a.eta {
                Some(eta) => eta,
                None => 1.0 / l_smooth(obj)?,
            };
            descent(Rgd { eta })
        }
        AlgorithmKind::Proximal => descent(Proximal::new(a.eta.unwrap_or(1.0))),
        AlgorithmKind::CubicNewton => {
            let rho = match (a.rho, obj.metadata().rho) {
                (Some(r), _) | (None, Some(r)) => r,
                (None, None) => {
                    let n = a.rho_samples.unwrap_or(DEFAULT_RHO_SAMPLES);
                    estimate_hessian_lipschitz(obj, dom, n, &mut rng(cfg.objective.seed ^ 0x5eed))
                        .field("algorithm.rho")?
                }
            };
            obj.metadata_mut().rho = Some(rho);
            let big_m = a.big_m.unwrap_or(rho);
            let theta = a.theta.unwrap_or(rho / 2.0);
            descent(CubicNewton { big_m, theta, rho })
        }
        AlgorithmKind::Accelerated => {
            let oracle = match a.oracle.unwrap_or(OracleKind::Rgd) {
                OracleKind::Rgd => DescentOracle::Rgd {
                    eta: match a.eta {
                        Some(eta) => eta,
                        None => 1.0 / l_smooth(obj)?,
                    },
                },
                OracleKind::Proximal => DescentOracle::proximal(a.eta.unwrap_or(1.0)),
            };
            let schedule = match a.mode.unwrap_or(ScheduleMode::Gconvex) {
                ScheduleMode::Gconvex => {
                    if obj.metadata().convexity == ConvexityClass::Nonconvex {
                        return Err(invalid("algorithm.mode", "g-convex schedule needs a g-convex objective".into()));
                    }
                    Schedule::GConvex
                }
                ScheduleMode::Strongly => {
                    let meta = obj.metadata();
                    match (meta.convexity, meta.mu) {
                        (ConvexityClass::StronglyGConvex, Some(mu)) => Schedule::Strongly { mu, xi0: a.xi0 },
                        _ => {
                            return Err(invalid(
                                "algorithm.mode",
                                format!("strongly convex schedule needs a strongly g-convex objective, {} is not", obj.name()),
                            ))
                        }
                    }
                }
            };
            let delta_mode = a.delta_mode.unwrap_or(match cfg.manifold.kind {
                ManifoldKind::Sphere => DeltaMode::Oracle,
                _ => DeltaMode::Analytic,
            });
            Method::Accelerated { schedule, oracle, delta_mode }
        }
    })
}
