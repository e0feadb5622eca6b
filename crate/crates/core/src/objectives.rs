//! Benchmark objectives with exact gradients, Hessians and declared
//! regularity constants.
//!
//! | objective          | manifolds            | class                      |
//! |--------------------|----------------------|----------------------------|
//! | [`Quadratic`]      | ℝⁿ                   | strongly g-convex          |
//! | [`SquaredDistance`]| any                  | strongly g-convex on balls |
//! | [`FrechetMean`]    | ℍⁿ, sphere caps, ℝⁿ  | strongly g-convex on balls |
//! | [`Rayleigh`]       | sphere               | non-convex                 |

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Manifold, Point, Tangent};

/// Floor applied to sampled Hessian-Lipschitz estimates so that the cubic
/// certificate constant stays finite on exactly quadratic objectives.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityClass {
    Nonconvex,
    GConvex,
    StronglyGConvex,
}

/// `f(x) − f* ≤ τ‖grad f(x)‖^{p/(p−1)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientDomination {
    pub tau: f64,
    pub p: f64,
}

/// Regularity constants, valid on `domain` when one is declared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveMetadata {
    /// Lipschitz constant of the Riemannian gradient.
    pub l_smooth: Option<f64>,
    /// Strong g-convexity modulus.
    pub mu: Option<f64>,
    /// Lipschitz constant of the Riemannian Hessian.
    pub rho: Option<f64>,
    pub grad_dom: Option<GradientDomination>,
    pub convexity: ConvexityClass,
    pub domain: Option<DomainSpec>,
}

impl ObjectiveMetadata {
    fn validate(&self) -> Result<()> {
        if self.convexity == ConvexityClass::StronglyGConvex && !self.mu.is_some_and(|m| m > 0.0) {
            return Err(Error::InvalidParameter(
                "strongly g-convex objectives need mu > 0".into(),
            ));
        }
        for (name, v) in [("L", self.l_smooth), ("mu", self.mu), ("rho", self.rho)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} = {v}")));
                }
            }
        }
        Ok(())
    }
}

/// A minimizer together with its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownSolution {
    pub x_star: Point,
    pub f_star: f64,
}

/// Gradient norm below which a point is accepted as a stationary minimizer.
pub const KNOWN_SOLUTION_TOL: f64 = 1e-10;

impl KnownSolution {
    /// Checks `‖grad f(x_star)‖ < 1e-10` before accepting.
    pub fn verified(obj: &dyn Objective, x_star: Point) -> Result<Self> {
        let g = obj.gradient(&x_star)?.norm();
        if !(g < KNOWN_SOLUTION_TOL) {
            return Err(Error::InvalidParameter(format!(
                "claimed minimizer has gradient norm {g:e}"
            )));
        }
        let f_star = obj.value(&x_star)?;
        Ok(KnownSolution { x_star, f_star })
    }
}

pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn manifold(&self) -> &Manifold;

    fn metadata(&self) -> &ObjectiveMetadata;

    fn metadata_mut(&mut self) -> &mut ObjectiveMetadata;

    fn known_solution(&self) -> Option<&KnownSolution>;

    fn value(&self, x: &Point) -> Result<f64>;

    fn gradient(&self, x: &Point) -> Result<Tangent>;

    /// Riemannian Hessian in the coordinates of `manifold().orthonormal_basis(x)`.
    fn hessian_matrix(&self, _x: &Point) -> Result<DMatrix<f64>> {
        Err(Error::Unsupported("Hessian"))
    }
}

/// Hessian of `½d(·, anchor)²` at `x`, in the coordinates of `basis`.
fn sqdist_hessian(m: &Manifold, x: &Point, anchor: &Point, basis: &[Tangent]) -> Result<DMatrix<f64>> {
    let n = basis.len();
    let log = m.log(x, anchor)?;
    let d = log.norm();
    if d == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let u = m.to_basis_coords(basis, &log) / d;
    let t = m.sqdist_hessian_factor(d);
    Ok(DMatrix::identity(n, n) * t + (&u * u.transpose()) * (1.0 - t))
}

/// Largest distance from a domain point to `y`.
fn max_reach(dom: &DomainSpec, y: &Point) -> Result<f64> {
    Ok(dom.radius() + dom.manifold().distance(dom.center(), y)?)
}

/// Constants of `½d(·, y)²` averaged over anchors with maximal reach `reach`:
/// `(L, mu, class)`.
fn sqdist_constants(m: &Manifold, reach: f64) -> (f64, Option<f64>, ConvexityClass) {
    match m {
        Manifold::Euclidean { .. } => (1.0, Some(1.0), ConvexityClass::StronglyGConvex),
        Manifold::Hyperboloid { .. } => (m.sqdist_hessian_factor(reach), Some(1.0), ConvexityClass::StronglyGConvex),
        Manifold::Sphere { radius, .. } => {
            let lower = m.sqdist_hessian_factor(reach);
            if reach < std::f64::consts::FRAC_PI_2 * radius && lower > 0.0 {
                (1.0, Some(lower), ConvexityClass::StronglyGConvex)
            } else {
                (1.0, None, ConvexityClass::Nonconvex)
            }
        }
    }
}

fn strongly_convex_grad_dom(mu: Option<f64>) -> Option<GradientDomination> {
    mu.map(|mu| GradientDomination { tau: 0.5 / mu, p: 2.0 })
}

/// `½Σ wᵢ(xᵢ − bᵢ)²` on ℝⁿ.
#[derive(Clone, Debug)]
pub struct Quadratic {
    manifold: Manifold,
    b: DVector<f64>,
    weights: DVector<f64>,
    meta: ObjectiveMetadata,
    solution: KnownSolution,
}

impl Quadratic {
    /// `½‖x − b‖²`.
    pub fn isotropic(b: DVector<f64>) -> Result<Self> {
        let w = DVector::from_element(b.len(), 1.0);
        Self::new(b, w)
    }

    pub fn new(b: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        if b.len() != weights.len() {
            return Err(Error::InvalidParameter("weights and b differ in length".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("quadratic weights must be positive".into()));
        }
        let manifold = Manifold::euclidean(b.len())?;
        let mu = weights.min();
        let meta = ObjectiveMetadata {
            l_smooth: Some(weights.max()),
            mu: Some(mu),
            rho: Some(0.0),
            grad_dom: strongly_convex_grad_dom(Some(mu)),
            convexity: ConvexityClass::StronglyGConvex,
            domain: None,
        };
        meta.validate()?;
        let x_star = manifold.point(b.clone())?;
        Ok(Quadratic {
            manifold,
            b,
            weights,
            meta,
            solution: KnownSolution { x_star, f_star: 0.0 },
        })
    }

    /// Weights log-spaced over `[lo, hi]`.
    pub fn log_spaced(b: DVector<f64>, lo: f64, hi: f64) -> Result<Self> {
        let n = b.len();
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidParameter(format!("weight range [{lo}, {hi}]")));
        }
        let w = DVector::from_fn(n, |i, _| {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        });
        Self::new(b, w)
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn metadata(&self) -> &ObjectiveMetadata {
        &self.meta
    }

    fn metadata_mut(&mut self) -> &mut ObjectiveMetadata {
        &mut self.meta
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        Some(&self.solution)
    }

    fn value(&self, x: &Point) -> Result<f64> {
        self.manifold.distance(x, x)?;
        let r = x.coords() - &self.b;
        Ok(0.5 * r.iter().zip(self.weights.iter()).map(|(ri, wi)| wi * ri * ri).sum::<f64>())
    }

    fn gradient(&self, x: &Point) -> Result<Tangent> {
        let r = (x.coords() - &self.b).component_mul(&self.weights);
        Ok(self.manifold.tangent(x, r)?)
    }

    fn hessian_matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.manifold.distance(x, x)?;
        Ok(DMatrix::from_diagonal(&self.weights))
    }
}

/// `½d(x, anchor)²`, with constants declared on a geodesic ball.
#[derive(Clone, Debug)]
pub struct SquaredDistance {
    manifold: Manifold,
    anchor: Point,
    meta: ObjectiveMetadata,
    solution: KnownSolution,
}

impl SquaredDistance {
    pub fn new(anchor: Point, domain: DomainSpec) -> Result<Self> {
        let manifold = *anchor.manifold();
        if *domain.manifold() != manifold {
            return Err(Error::InvalidParameter("domain and anchor live on different manifolds".into()));
        }
        let reach = max_reach(&domain, &anchor)?;
        let (l, mu, convexity) = sqdist_constants(&manifold, reach);
        let meta = ObjectiveMetadata {
            l_smooth: Some(l),
            mu,
            rho: None,
            grad_dom: strongly_convex_grad_dom(mu),
            convexity,
            domain: Some(domain),
        };
        meta.validate()?;
        Ok(SquaredDistance {
            manifold,
            solution: KnownSolution { x_star: anchor.clone(), f_star: 0.0 },
            anchor,
            meta,
        })
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }
}

impl Objective for SquaredDistance {
    fn name(&self) -> &str {
        "squared_distance"
    }

    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn metadata(&self) -> &ObjectiveMetadata {
        &self.meta
    }

    fn metadata_mut(&mut self) -> &mut ObjectiveMetadata {
        &mut self.meta
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        Some(&self.solution)
    }

    fn value(&self, x: &Point) -> Result<f64> {
        let d = self.manifold.distance(x, &self.anchor)?;
        Ok(0.5 * d * d)
    }

    fn gradient(&self, x: &Point) -> Result<Tangent> {
        Ok(-&self.manifold.log(x, &self.anchor)?)
    }

    fn hessian_matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        let basis = self.manifold.orthonormal_basis(x)?;
        sqdist_hessian(&self.manifold, x, &self.anchor, &basis)
    }
}

/// `(1/2N)·Σ d(x, yᵢ)²`, the Fréchet (Karcher) mean objective.
#[derive(Clone, Debug)]
pub struct FrechetMean {
    manifold: Manifold,
    samples: Vec<Point>,
    meta: ObjectiveMetadata,
    solution: Option<KnownSolution>,
}

/// Gradient-norm target for the precomputed Fréchet mean.
pub const FRECHET_SOLVE_TOL: f64 = 1e-12;

impl FrechetMean {
    /// Builds the objective and precomputes its minimizer by gradient descent
    /// started at the domain center.
    pub fn new(samples: Vec<Point>, domain: DomainSpec) -> Result<Self> {
        let manifold = *domain.manifold();
        if samples.is_empty() {
            return Err(Error::InvalidParameter("Fréchet mean needs at least one sample".into()));
        }
        let mut reach: f64 = 0.0;
        for y in &samples {
            if *y.manifold() != manifold {
                return Err(Error::InvalidParameter("sample on a different manifold".into()));
            }
            reach = reach.max(max_reach(&domain, y)?);
        }
        let (l, mu, convexity) = sqdist_constants(&manifold, reach);
        let meta = ObjectiveMetadata {
            l_smooth: Some(l),
            mu,
            rho: None,
            grad_dom: strongly_convex_grad_dom(mu),
            convexity,
            domain: Some(domain),
        };
        meta.validate()?;
        let mut obj = FrechetMean { manifold, samples, meta, solution: None };
        if convexity != ConvexityClass::Nonconvex {
            let x_star = obj.solve_mean(200_000)?;
            obj.solution = Some(KnownSolution::verified(&obj, x_star)?);
        }
        Ok(obj)
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    fn solve_mean(&self, max_iter: usize) -> Result<Point> {
        let dom = self.meta.domain.as_ref().expect("domain set in constructor");
        let eta = 1.0 / self.meta.l_smooth.unwrap_or(1.0);
        let mut x = dom.center().clone();
        let mut best = (f64::INFINITY, x.clone());
        for _ in 0..max_iter {
            let g = self.gradient(&x)?;
            let gn = g.norm();
            if gn < best.0 {
                best = (gn, x.clone());
            }
            if gn < FRECHET_SOLVE_TOL {
                return Ok(x);
            }
            x = self.manifold.exp(&x, &g.scale(-eta))?;
        }
        Err(Error::NonConvergence {
            solver: "Fréchet mean reference solve",
            iterations: max_iter,
            residual: best.0,
        })
    }
}

impl Objective for FrechetMean {
    fn name(&self) -> &str {
        "frechet_mean"
    }

    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn metadata(&self) -> &ObjectiveMetadata {
        &self.meta
    }

    fn metadata_mut(&mut self) -> &mut ObjectiveMetadata {
        &mut self.meta
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        self.solution.as_ref()
    }

    fn value(&self, x: &Point) -> Result<f64> {
        let mut s = 0.0;
        for y in &self.samples {
            let d = self.manifold.distance(x, y)?;
            s += d * d;
        }
        Ok(s / (2.0 * self.samples.len() as f64))
    }

    fn gradient(&self, x: &Point) -> Result<Tangent> {
        let mut acc = DVector::zeros(self.manifold.ambient_dim());
        for y in &self.samples {
            acc += self.manifold.log(x, y)?.coords();
        }
        acc /= -(self.samples.len() as f64);
        Ok(self.manifold.project_tangent(x, acc)?)
    }

    fn hessian_matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        let basis = self.manifold.orthonormal_basis(x)?;
        let n = basis.len();
        let mut h = DMatrix::zeros(n, n);
        for y in &self.samples {
            h += sqdist_hessian(&self.manifold, x, y, &basis)?;
        }
        Ok(h / self.samples.len() as f64)
    }
}

/// `−½xᵀQx` on a sphere; minimizers are the top eigenvectors of `Q`.
#[derive(Clone, Debug)]
pub struct Rayleigh {
    manifold: Manifold,
    q: DMatrix<f64>,
    meta: ObjectiveMetadata,
    solution: KnownSolution,
}

impl Rayleigh {
    pub fn new(manifold: Manifold, q: DMatrix<f64>) -> Result<Self> {
        let Manifold::Sphere { radius, .. } = manifold else {
            return Err(Error::InvalidParameter("Rayleigh objective lives on a sphere".into()));
        };
        let m = manifold.ambient_dim();
        if q.nrows() != m || q.ncols() != m {
            return Err(Error::InvalidParameter(format!("Q must be {m}x{m}")));
        }
        if (&q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(q.clone());
        let (imax, lmax) = eig.eigenvalues.argmax();
        let lmin = eig.eigenvalues.min();
        let top = eig.eigenvectors.column(imax).into_owned();
        let x_star = manifold.project_point(top)?;
        let meta = ObjectiveMetadata {
            l_smooth: Some(lmax - lmin),
            mu: None,
            rho: None,
            grad_dom: None,
            convexity: ConvexityClass::Nonconvex,
            domain: None,
        };
        Ok(Rayleigh {
            manifold,
            q,
            meta,
            solution: KnownSolution { x_star, f_star: -0.5 * radius * radius * lmax },
        })
    }

    fn radius_sq(&self) -> f64 {
        match self.manifold {
            Manifold::Sphere { radius, .. } => radius * radius,
            _ => unreachable!("checked in constructor"),
        }
    }
}

impl Objective for Rayleigh {
    fn name(&self) -> &str {
        "rayleigh"
    }

    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn metadata(&self) -> &ObjectiveMetadata {
        &self.meta
    }

    fn metadata_mut(&mut self) -> &mut ObjectiveMetadata {
        &mut self.meta
    }

    fn known_solution(&self) -> Option<&KnownSolution> {
        Some(&self.solution)
    }

    fn value(&self, x: &Point) -> Result<f64> {
        self.manifold.distance(x, x)?;
        Ok(-0.5 * x.coords().dot(&(&self.q * x.coords())))
    }

    fn gradient(&self, x: &Point) -> Result<Tangent> {
        Ok(self.manifold.project_tangent(x, -(&self.q * x.coords()))?)
    }

    fn hessian_matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        let basis = self.manifold.orthonormal_basis(x)?;
        let shift = x.coords().dot(&(&self.q * x.coords())) / self.radius_sq();
        let n = basis.len();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let qe = &self.q * basis[j].coords();
            let diag = if i == j { shift } else { 0.0 };
            -basis[i].coords().dot(&qe) + diag
        }))
    }
}

/// Max over orthonormal directions `eᵢ` of the relative central-difference
/// error `|(f(exp(x,h·eᵢ)) − f(exp(x,−h·eᵢ)))/(2h) − ⟨grad f, eᵢ⟩| / (1 + |⟨grad f, eᵢ⟩|)`.
pub fn grad_check(obj: &dyn Objective, x: &Point, h: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidParameter(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let m = obj.manifold();
    let g = obj.gradient(x)?;
    let mut worst: f64 = 0.0;
    for e in m.orthonormal_basis(x)? {
        let fp = obj.value(&m.exp(x, &e.scale(h))?)?;
        let fm = obj.value(&m.exp(x, &e.scale(-h))?)?;
        let fd = (fp - fm) / (2.0 * h);
        let an = g.dot(&e)?;
        worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
    }
    Ok(worst)
}

/// Quadratic form `⟨s, Hess f(x)[s]⟩`.
pub fn hessian_form(obj: &dyn Objective, x: &Point, s: &Tangent) -> Result<f64> {
    let m = obj.manifold();
    let basis = m.orthonormal_basis(x)?;
    let h = obj.hessian_matrix(x)?;
    let c = m.to_basis_coords(&basis, s);
    Ok(c.dot(&(&h * &c)))
}

/// Third-order Taylor defect `|f(exp_x(s)) − f(x) − ⟨s, grad f⟩ − ½⟨s, Hess f[s]⟩|`.
pub fn taylor_defect(obj: &dyn Objective, x: &Point, s: &Tangent) -> Result<f64> {
    let m = obj.manifold();
    let f0 = obj.value(x)?;
    let f1 = obj.value(&m.exp(x, s)?)?;
    let g = obj.gradient(x)?;
    Ok((f1 - f0 - g.dot(s)? - 0.5 * hessian_form(obj, x, s)?).abs())
}

/// `‖Γ_{y→x} grad f(y) − grad f(x) − Hess f(x)[s]‖` with `y = exp_x(s)`.
pub fn gradient_taylor_defect(obj: &dyn Objective, x: &Point, s: &Tangent) -> Result<f64> {
    let m = obj.manifold();
    let y = m.exp(x, s)?;
    let back = m.transport(&y, x, &obj.gradient(&y)?)?;
    let basis = m.orthonormal_basis(x)?;
    let h = obj.hessian_matrix(x)?;
    let hs = m.from_basis_coords(x, &basis, &(&h * m.to_basis_coords(&basis, s)));
    let g = obj.gradient(x)?;
    Ok((&(&back - &g) - &hs).norm())
}

/// Sampled Hessian-Lipschitz constant on `dom`: twice the largest of
/// `6·defect/‖s‖³` and `2·gradient defect/‖s‖²` over `samples` random pairs
/// with `x ∈ dom` and `‖s‖ ∈ [0.01, 1]·diam`, floored at [`RHO_FLOOR`].
pub fn estimate_hessian_lipschitz<R: Rng + ?Sized>(
    obj: &dyn Objective,
    dom: &DomainSpec,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let m = obj.manifold();
    let diam = dom.diameter().max(1e-3);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = m.random_point_near(dom.center(), dom.radius(), rng)?;
        let r = diam * (0.01 + 0.99 * rng.random::<f64>());
        let s = m.random_tangent(&x, r, rng)?;
        worst = worst
            .max(6.0 * taylor_defect(obj, &x, &s)? / r.powi(3))
            .max(2.0 * gradient_taylor_defect(obj, &x, &s)? / (r * r));
    }
    Ok((2.0 * worst).max(RHO_FLOOR))
}

/// `f(exp_x(s)) − f(x) − ⟨grad f(x), s⟩`; nonnegative for g-convex `f`.
pub fn convexity_gap(obj: &dyn Objective, x: &Point, s: &Tangent) -> Result<f64> {
    let m = obj.manifold();
    let y = m.exp(x, s)?;
    Ok(obj.value(&y)? - obj.value(x)? - obj.gradient(x)?.dot(s)?)
}
