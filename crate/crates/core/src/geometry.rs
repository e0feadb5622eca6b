//! Closed-form Riemannian geometry for Euclidean space, spheres and the
//! hyperboloid model of hyperbolic space.
//!
//! Points and tangent vectors are stored in ambient coordinates:
//!
//! - `Euclidean { dim }`: ℝⁿ, coordinates of length `n`.
//! - `Sphere { dim, radius }`: the sphere of radius `R` in ℝⁿ⁺¹, sectional
//!   curvature `1/R²`.
//! - `Hyperboloid { dim, kappa }`: the upper sheet `⟨x,x⟩_L = −1/κ` in
//!   Minkowski space ℝ¹ⁿ, sectional curvature `−κ`. Coordinate 0 is the time
//!   coordinate.
//!
//! All maps are evaluated with cancellation-free formulas (distances through
//! chord lengths, `sinh(θ)/θ` style factors) so that nearby points keep full
//! relative precision.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on manifold constraints (scaled by `1 + ‖x‖²`).
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// `log` on the sphere is rejected when `⟨x,y⟩/R² < −1 + ANTIPODAL_TOL`.
pub const ANTIPODAL_TOL: f64 = 1e-8;
/// Slack on the domain boundary for [`DomainSpec::contains`].
pub const DOMAIN_SLACK: f64 = 1e-9;

const BASE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("manifold mismatch: expected {expected}, found {found}")]
    ManifoldMismatch { expected: Manifold, found: Manifold },
    #[error("tangent vector is not based at the given point")]
    BaseMismatch,
    #[error("points are antipodal (or within {ANTIPODAL_TOL:e} of it); the connecting geodesic is not unique")]
    AntipodalPoints,
    #[error("non-finite coordinates")]
    NonFinite,
    #[error("coordinate vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinates violate the manifold constraint (defect {defect:e})")]
    OffManifold { defect: f64 },
    #[error("vector is not tangent at its base point (defect {defect:e})")]
    NotTangent { defect: f64 },
    #[error("invalid manifold parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Sectional curvature bounds of a manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub lower: f64,
    pub upper: f64,
    pub is_hadamard: bool,
}

/// A manifold together with its parameters. Immutable and `Copy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    Euclidean { dim: usize },
    Sphere { dim: usize, radius: f64 },
    Hyperboloid { dim: usize, kappa: f64 },
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Euclidean { dim } => write!(f, "R^{dim}"),
            Manifold::Sphere { dim, radius } => write!(f, "S^{dim}(R={radius})"),
            Manifold::Hyperboloid { dim, kappa } => write!(f, "H^{dim}(kappa={kappa})"),
        }
    }
}

/// A point in ambient coordinates, tagged with its manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PointRepr", try_from = "PointRepr")]
pub struct Point {
    manifold: Manifold,
    coords: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    manifold: Manifold,
    coords: Vec<f64>,
}

impl From<Point> for PointRepr {
    fn from(p: Point) -> Self {
        PointRepr {
            manifold: p.manifold,
            coords: p.coords.iter().copied().collect(),
        }
    }
}

impl TryFrom<PointRepr> for Point {
    type Error = GeometryError;

    fn try_from(r: PointRepr) -> Result<Self> {
        r.manifold.point(DVector::from_vec(r.coords))
    }
}

impl Point {
    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }
}

/// A tangent vector in ambient coordinates, carrying its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: Point,
    coords: DVector<f64>,
}

impl Tangent {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn scale(&self, a: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            coords: &self.coords * a,
        }
    }

    /// `a·self + b·other`, both based at the same point.
    pub fn lincomb(&self, a: f64, other: &Tangent, b: f64) -> Result<Tangent> {
        if !same_base(&self.base, &other.base) {
            return Err(GeometryError::BaseMismatch);
        }
        Ok(Tangent {
            base: self.base.clone(),
            coords: &self.coords * a + &other.coords * b,
        })
    }

    /// Inner product with another vector at the same base.
    pub fn dot(&self, other: &Tangent) -> Result<f64> {
        self.base.manifold.inner(&self.base, self, other)
    }

    pub fn norm(&self) -> f64 {
        self.base.manifold.metric_dot(&self.coords, &self.coords).max(0.0).sqrt()
    }
}

impl Add for &Tangent {
    type Output = Tangent;

    fn add(self, rhs: &Tangent) -> Tangent {
        debug_assert!(same_base(&self.base, &rhs.base), "tangent base mismatch");
        Tangent {
            base: self.base.clone(),
            coords: &self.coords + &rhs.coords,
        }
    }
}

impl Sub for &Tangent {
    type Output = Tangent;

    fn sub(self, rhs: &Tangent) -> Tangent {
        debug_assert!(same_base(&self.base, &rhs.base), "tangent base mismatch");
        Tangent {
            base: self.base.clone(),
            coords: &self.coords - &rhs.coords,
        }
    }
}

impl Mul<f64> for &Tangent {
    type Output = Tangent;

    fn mul(self, a: f64) -> Tangent {
        self.scale(a)
    }
}

impl Neg for &Tangent {
    type Output = Tangent;

    fn neg(self) -> Tangent {
        self.scale(-1.0)
    }
}

fn same_base(a: &Point, b: &Point) -> bool {
    if a.manifold != b.manifold || a.coords.len() != b.coords.len() {
        return false;
    }
    let scale = 1.0 + a.coords.amax();
    (&a.coords - &b.coords).amax() <= BASE_TOL * scale
}

fn minkowski(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let spatial: f64 = a.iter().zip(b.iter()).skip(1).map(|(x, y)| x * y).sum();
    spatial - a[0] * b[0]
}

/// `sinh(t)/t`, accurate near zero.
pub(crate) fn sinhc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 + t * t / 6.0
    } else {
        t.sinh() / t
    }
}

/// `sin(t)/t`, accurate near zero.
pub(crate) fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// `t·coth(t)`, with the limit 1 at zero.
pub fn t_coth_t(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 + t * t / 3.0
    } else {
        t / t.tanh()
    }
}

/// `t·cot(t)`, with the limit 1 at zero.
pub fn t_cot_t(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 3.0
    } else {
        t / t.tan()
    }
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Manifold::Euclidean { dim })
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::InvalidParameter("dimension must be positive".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidParameter(format!("sphere radius {radius}")));
        }
        Ok(Manifold::Sphere { dim, radius })
    }

    /// Hyperbolic space of sectional curvature `−kappa`.
    pub fn hyperboloid(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::InvalidParameter("dimension must be positive".into()));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(GeometryError::InvalidParameter(format!("curvature kappa {kappa}")));
        }
        Ok(Manifold::Hyperboloid { dim, kappa })
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } | Manifold::Sphere { dim, .. } | Manifold::Hyperboloid { dim, .. } => dim,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Sphere { dim, .. } | Manifold::Hyperboloid { dim, .. } => dim + 1,
        }
    }

    pub fn curvature_bounds(&self) -> CurvatureBounds {
        match *self {
            Manifold::Euclidean { .. } => CurvatureBounds { lower: 0.0, upper: 0.0, is_hadamard: true },
            Manifold::Sphere { radius, .. } => {
                let k = 1.0 / (radius * radius);
                CurvatureBounds { lower: k, upper: k, is_hadamard: false }
            }
            Manifold::Hyperboloid { kappa, .. } => CurvatureBounds {
                lower: -kappa,
                upper: -kappa,
                is_hadamard: true,
            },
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match *self {
            Manifold::Sphere { radius, .. } => PI * radius,
            _ => f64::INFINITY,
        }
    }

    /// Second-derivative factor of `½d(·, y)²` orthogonal to the geodesic, at
    /// distance `d`: `√κ·d·coth(√κ·d)` on ℍⁿ, `(d/R)·cot(d/R)` on the sphere
    /// and 1 on ℝⁿ. Along the geodesic the factor is always 1.
    pub fn sqdist_hessian_factor(&self, d: f64) -> f64 {
        match *self {
            Manifold::Euclidean { .. } => 1.0,
            Manifold::Sphere { radius, .. } => t_cot_t(d / radius),
            Manifold::Hyperboloid { kappa, .. } => t_coth_t(kappa.sqrt() * d),
        }
    }

    /// Ambient bilinear form restricted to tangent spaces.
    fn metric_dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Manifold::Hyperboloid { .. } => minkowski(a, b),
            _ => a.dot(b),
        }
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.ambient_dim(),
                found: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(())
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.manifold != *self {
            return Err(GeometryError::ManifoldMismatch {
                expected: *self,
                found: x.manifold,
            });
        }
        Ok(())
    }

    fn check_tangent(&self, x: &Point, v: &Tangent) -> Result<()> {
        self.check_point(x)?;
        if !same_base(x, &v.base) {
            return Err(GeometryError::BaseMismatch);
        }
        Ok(())
    }

    /// Validates coordinates against the manifold constraint.
    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        self.check_len(&coords)?;
        let scale = 1.0 + coords.norm_squared();
        let defect = match *self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { radius, .. } => (coords.norm() - radius).abs(),
            Manifold::Hyperboloid { kappa, .. } => {
                if coords[0] <= 0.0 {
                    return Err(GeometryError::OffManifold { defect: f64::INFINITY });
                }
                (minkowski(&coords, &coords) + 1.0 / kappa).abs()
            }
        };
        if defect > CONSTRAINT_TOL * scale {
            return Err(GeometryError::OffManifold { defect });
        }
        Ok(Point { manifold: *self, coords })
    }

    pub fn point_from_slice(&self, coords: &[f64]) -> Result<Point> {
        self.point(DVector::from_column_slice(coords))
    }

    /// Maps ambient coordinates onto the manifold: rescales onto the sphere,
    /// re-solves the time coordinate on the hyperboloid.
    pub fn project_point(&self, mut coords: DVector<f64>) -> Result<Point> {
        self.check_len(&coords)?;
        match *self {
            Manifold::Euclidean { .. } => {}
            Manifold::Sphere { radius, .. } => {
                let n = coords.norm();
                if n == 0.0 {
                    return Err(GeometryError::OffManifold { defect: radius });
                }
                coords *= radius / n;
            }
            Manifold::Hyperboloid { kappa, .. } => {
                let spatial: f64 = coords.iter().skip(1).map(|c| c * c).sum();
                coords[0] = (1.0 / kappa + spatial).sqrt();
            }
        }
        Ok(Point { manifold: *self, coords })
    }

    /// Canonical base point: the origin, the north pole `R·e_n`, or the
    /// hyperboloid apex `(1/√κ, 0, …, 0)`.
    pub fn origin(&self) -> Point {
        let mut c = DVector::zeros(self.ambient_dim());
        match *self {
            Manifold::Euclidean { .. } => {}
            Manifold::Sphere { dim, radius } => c[dim] = radius,
            Manifold::Hyperboloid { kappa, .. } => c[0] = 1.0 / kappa.sqrt(),
        }
        Point { manifold: *self, coords: c }
    }

    fn project_tangent_coords(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match *self {
            Manifold::Euclidean { .. } => v.clone(),
            Manifold::Sphere { radius, .. } => v - x * (x.dot(v) / (radius * radius)),
            Manifold::Hyperboloid { kappa, .. } => v + x * (kappa * minkowski(x, v)),
        }
    }

    fn tangent_defect(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match *self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { .. } => x.dot(v).abs(),
            Manifold::Hyperboloid { .. } => minkowski(x, v).abs(),
        }
    }

    /// Validates that `coords` is tangent at `x`.
    pub fn tangent(&self, x: &Point, coords: DVector<f64>) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_len(&coords)?;
        let defect = self.tangent_defect(&x.coords, &coords);
        let scale = (1.0 + x.coords.norm()) * (1.0 + coords.norm());
        if defect > CONSTRAINT_TOL * scale {
            return Err(GeometryError::NotTangent { defect });
        }
        Ok(Tangent { base: x.clone(), coords })
    }

    /// Orthogonal projection of an ambient vector onto `T_xM`.
    pub fn project_tangent(&self, x: &Point, coords: DVector<f64>) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_len(&coords)?;
        let coords = self.project_tangent_coords(&x.coords, &coords);
        Ok(Tangent { base: x.clone(), coords })
    }

    pub fn zero_tangent(&self, x: &Point) -> Tangent {
        Tangent {
            base: x.clone(),
            coords: DVector::zeros(self.ambient_dim()),
        }
    }

    pub fn inner(&self, x: &Point, v: &Tangent, w: &Tangent) -> Result<f64> {
        self.check_tangent(x, v)?;
        self.check_tangent(x, w)?;
        Ok(self.metric_dot(&v.coords, &w.coords))
    }

    pub fn norm(&self, x: &Point, v: &Tangent) -> Result<f64> {
        self.check_tangent(x, v)?;
        Ok(v.norm())
    }

    pub fn exp(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(x, v)?;
        self.check_len(&v.coords)?;
        let coords = match *self {
            Manifold::Euclidean { .. } => &x.coords + &v.coords,
            Manifold::Sphere { radius, .. } => {
                let t = v.coords.norm() / radius;
                &x.coords * t.cos() + &v.coords * sinc(t)
            }
            Manifold::Hyperboloid { kappa, .. } => {
                let t = kappa.sqrt() * v.norm();
                &x.coords * t.cosh() + &v.coords * sinhc(t)
            }
        };
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        self.project_point(coords)
    }

    /// Chord length `‖x − y‖` in the ambient (Minkowski) metric.
    fn chord_sq(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let w = x - y;
        self.metric_dot(&w, &w).max(0.0)
    }

    fn distance_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let h = 0.5 * self.chord_sq(x, y).sqrt();
        match *self {
            Manifold::Euclidean { .. } => 2.0 * h,
            Manifold::Sphere { radius, .. } => {
                let c = (radius * radius - h * h).max(0.0).sqrt();
                2.0 * radius * h.atan2(c)
            }
            Manifold::Hyperboloid { kappa, .. } => {
                let s = kappa.sqrt();
                2.0 / s * (s * h).asinh()
            }
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance_unchecked(&x.coords, &y.coords))
    }

    fn is_antipodal(&self, x: &DVector<f64>, y: &DVector<f64>) -> bool {
        match *self {
            Manifold::Sphere { radius, .. } => x.dot(y) / (radius * radius) < -1.0 + ANTIPODAL_TOL,
            _ => false,
        }
    }

    pub fn log(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_point(y)?;
        if self.is_antipodal(&x.coords, &y.coords) {
            return Err(GeometryError::AntipodalPoints);
        }
        let chord2 = self.chord_sq(&x.coords, &y.coords);
        let d = self.distance_unchecked(&x.coords, &y.coords);
        let coords = match *self {
            Manifold::Euclidean { .. } => &y.coords - &x.coords,
            Manifold::Sphere { radius, .. } => {
                // y − cos(α)·x with 1 − cos α = chord²/(2R²)
                let u = &y.coords - &x.coords + &x.coords * (chord2 / (2.0 * radius * radius));
                let u = self.project_tangent_coords(&x.coords, &u);
                u / sinc(d / radius)
            }
            Manifold::Hyperboloid { kappa, .. } => {
                // y + κ⟨x,y⟩x with κ⟨x,y⟩ = −1 − κ·chord²/2
                let u = &y.coords - &x.coords - &x.coords * (0.5 * kappa * chord2);
                let u = self.project_tangent_coords(&x.coords, &u);
                u / sinhc(kappa.sqrt() * d)
            }
        };
        Ok(Tangent { base: x.clone(), coords })
    }

    /// Parallel transport of `v ∈ T_xM` to `T_yM` along the connecting geodesic.
    pub fn transport(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_point(y)?;
        let coords = match *self {
            Manifold::Euclidean { .. } => v.coords.clone(),
            Manifold::Sphere { radius, .. } => {
                if self.is_antipodal(&x.coords, &y.coords) {
                    return Err(GeometryError::AntipodalPoints);
                }
                let denom = radius * radius + x.coords.dot(&y.coords);
                let sum = &x.coords + &y.coords;
                &v.coords - sum * (y.coords.dot(&v.coords) / denom)
            }
            Manifold::Hyperboloid { kappa, .. } => {
                let denom = 1.0 - kappa * minkowski(&x.coords, &y.coords);
                let sum = &x.coords + &y.coords;
                &v.coords + sum * (kappa * minkowski(&y.coords, &v.coords) / denom)
            }
        };
        let coords = self.project_tangent_coords(&y.coords, &coords);
        Ok(Tangent { base: y.clone(), coords })
    }

    /// `‖Log_x(w) − Log_x(v)‖_x`.
    pub fn projected_distance(&self, x: &Point, w: &Point, v: &Point) -> Result<f64> {
        let lw = self.log(x, w)?;
        let lv = self.log(x, v)?;
        Ok((&lw - &lv).norm())
    }

    /// Deterministic orthonormal basis of `T_xM`: Gram–Schmidt on the
    /// projected ambient basis vectors, in index order.
    pub fn orthonormal_basis(&self, x: &Point) -> Result<Vec<Tangent>> {
        self.check_point(x)?;
        let n = self.dim();
        let m = self.ambient_dim();
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..m {
            if basis.len() == n {
                break;
            }
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            let mut v = self.project_tangent_coords(&x.coords, &e);
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let p = self.metric_dot(b, &v);
                    v -= b * p;
                }
            }
            let nv = self.metric_dot(&v, &v).max(0.0).sqrt();
            if nv > 1e-6 {
                basis.push(v / nv);
            }
        }
        debug_assert_eq!(basis.len(), n);
        Ok(basis
            .into_iter()
            .map(|coords| Tangent { base: x.clone(), coords })
            .collect())
    }

    /// Coordinates of `v` in the given orthonormal basis of `T_xM`.
    pub fn to_basis_coords(&self, basis: &[Tangent], v: &Tangent) -> DVector<f64> {
        DVector::from_iterator(basis.len(), basis.iter().map(|b| self.metric_dot(&b.coords, &v.coords)))
    }

    /// Tangent vector with the given coordinates in an orthonormal basis at `x`.
    pub fn from_basis_coords(&self, x: &Point, basis: &[Tangent], c: &DVector<f64>) -> Tangent {
        let mut coords = DVector::zeros(self.ambient_dim());
        for (b, ci) in basis.iter().zip(c.iter()) {
            coords += &b.coords * *ci;
        }
        Tangent { base: x.clone(), coords }
    }

    /// Tangent vector at `x` with uniformly random direction and the given norm.
    pub fn random_tangent<R: Rng + ?Sized>(&self, x: &Point, norm: f64, rng: &mut R) -> Result<Tangent> {
        let basis = self.orthonormal_basis(x)?;
        let c = loop {
            let c = DVector::from_fn(basis.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            if c.norm() > 1e-8 {
                break c;
            }
        };
        let c = &c * (norm / c.norm());
        Ok(self.from_basis_coords(x, &basis, &c))
    }

    /// Point at geodesic distance uniform in `[0, max_dist]` from `center`.
    pub fn random_point_near<R: Rng + ?Sized>(&self, center: &Point, max_dist: f64, rng: &mut R) -> Result<Point> {
        let r = rng.random::<f64>() * max_dist;
        let v = self.random_tangent(center, r, rng)?;
        self.exp(center, &v)
    }
}

/// Closed geodesic ball `{x : d(center, x) ≤ radius}` housing the iterates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    center: Point,
    radius: f64,
}

impl DomainSpec {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(GeometryError::InvalidParameter(format!("domain radius {radius}")));
        }
        if let Manifold::Sphere { radius: r, .. } = center.manifold {
            if 2.0 * radius >= PI * r {
                return Err(GeometryError::InvalidParameter(format!(
                    "domain diameter {} must be below {} on a sphere of radius {r}",
                    2.0 * radius,
                    PI * r
                )));
            }
        }
        Ok(DomainSpec { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn manifold(&self) -> &Manifold {
        &self.center.manifold
    }

    /// `d(center, x) ≤ radius + DOMAIN_SLACK`.
    pub fn contains(&self, x: &Point) -> Result<bool> {
        let d = self.center.manifold.distance(&self.center, x)?;
        Ok(d <= self.radius + DOMAIN_SLACK)
    }
}

/// Free-function form of [`DomainSpec::contains`].
pub fn in_domain(dom: &DomainSpec, x: &Point) -> Result<bool> {
    dom.contains(x)
}
