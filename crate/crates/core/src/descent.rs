//! Base descent methods, their p-descent certificates, a certified runner and
//! the closed-form rate envelopes.
//!
//! A method is p-descent with constant `c` when every step satisfies
//!
//! ```text
//! forward:  f(x_{k+1}) ≤ f(x_k) − c‖grad f(x_{k+1})‖^{p/(p−1)}
//! backward: f(x_{k+1}) ≤ f(x_k) − c‖grad f(x_k)‖^{p/(p−1)}
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Point, Tangent};
use crate::objectives::Objective;

/// Additive slack used by every per-iteration inequality check.
pub fn default_tolerance(f0: f64) -> f64 {
    1e-9 * (1.0 + f0.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentCertificate {
    pub p: f64,
    pub c: f64,
    pub direction: Direction,
}

impl DescentCertificate {
    pub fn new(p: f64, c: f64, direction: Direction) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!("certificate order p = {p}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("descent constant c = {c}")));
        }
        Ok(DescentCertificate { p, c, direction })
    }

    /// `p/(p−1)`, the power applied to the gradient norm.
    pub fn exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `f_next − f_prev + c·g^{p/(p−1)}`; positive means the inequality failed.
    pub fn slack(&self, f_prev: f64, f_next: f64, g_prev: f64, g_next: f64) -> f64 {
        let g = match self.direction {
            Direction::Forward => g_next,
            Direction::Backward => g_prev,
        };
        f_next - f_prev + self.c * g.powf(self.exponent())
    }
}

/// Final constants of the g-convex rate: `C_fwd = c^{1−p}(p²−p)^{p−1}`,
/// `C_bwd = c^{1−p}(p−1)^{p−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c_fwd: f64,
    pub c_bwd: f64,
}

impl RateConstants {
    pub fn new(p: f64, c: f64) -> Self {
        let base = c.powf(1.0 - p);
        RateConstants {
            c_fwd: base * (p * p - p).powf(p - 1.0),
            c_bwd: base * (p - 1.0).powf(p - 1.0),
        }
    }

    pub fn get(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Forward => self.c_fwd,
            Direction::Backward => self.c_bwd,
        }
    }
}

/// `C·diam^p/k^{p−1}`; infinite at `k = 0`.
pub fn rate_bound_gconvex(p: f64, c: f64, diam: f64, k: usize, direction: Direction) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    RateConstants::new(p, c).get(direction) * diam.powf(p) / (k as f64).powf(p - 1.0)
}

/// `(f0_gap/(c·k))^{(p−1)/p}`, a bound on `min_{t≤k} ‖grad f(x_t)‖`.
pub fn rate_bound_nonconvex(c: f64, p: f64, f0_gap: f64, k: usize) -> f64 {
    if f0_gap == 0.0 {
        return 0.0;
    }
    if k == 0 {
        return f64::INFINITY;
    }
    (f0_gap / (c * k as f64)).powf((p - 1.0) / p)
}

/// Linear envelope under gradient domination with constant `tau`.
pub fn rate_bound_graddom(c: f64, tau: f64, k: usize, direction: Direction, f0_gap: f64) -> Result<f64> {
    let r = c / tau;
    match direction {
        Direction::Forward => Ok((1.0 + r).powi(-(k as i32)) * f0_gap),
        Direction::Backward => {
            if r > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "backward envelope needs c <= tau, got c = {c}, tau = {tau}"
                )));
            }
            Ok((1.0 - r).powi(k as i32) * f0_gap)
        }
    }
}

fn checked_l(obj: &dyn Objective) -> Result<f64> {
    obj.metadata()
        .l_smooth
        .filter(|l| *l > 0.0)
        .ok_or_else(|| Error::InvalidParameter(format!("{} declares no smoothness constant", obj.name())))
}

/// `exp(x, −eta·grad f(x))`. Rejects `eta ∉ (0, 2/L)` when `L` is declared.
pub fn rgd_step(obj: &dyn Objective, x: &Point, eta: f64) -> Result<Point> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {eta}")));
    }
    if let Some(l) = obj.metadata().l_smooth {
        if eta * l >= 2.0 {
            return Err(Error::InvalidParameter(format!("step size {eta} is not below 2/L = {}", 2.0 / l)));
        }
    }
    let g = obj.gradient(x)?;
    Ok(obj.manifold().exp(x, &g.scale(-eta))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxOptions {
    /// Bound on `‖log(x′, x) − η·grad f(x′)‖`.
    pub tol: f64,
    pub max_inner: usize,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions { tol: 1e-9, max_inner: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct ProxOutcome {
    pub point: Point,
    pub residual: f64,
    pub inner_iterations: usize,
}

/// `‖log(x′, x) − η·grad f(x′)‖`, zero exactly at the proximal point.
pub fn prox_residual(obj: &dyn Objective, x: &Point, x_new: &Point, eta: f64) -> Result<f64> {
    let m = obj.manifold();
    let r = m.log(x_new, x)?.lincomb(1.0, &obj.gradient(x_new)?, -eta)?;
    Ok(r.norm())
}

/// Approximate `argmin_y f(y) + d²(y, x)/(2η)` by backtracking gradient
/// descent on the regularized objective.
///
/// Iteration continues past `tol` while the residual is still large relative
/// to the step `d(x′, x)`, so that tiny proximal steps keep their accuracy.
pub fn proximal_step(obj: &dyn Objective, x: &Point, eta: f64, opts: &ProxOptions) -> Result<ProxOutcome> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("proximal parameter {eta}")));
    }
    let m = obj.manifold();
    let phi = |y: &Point| -> Result<f64> {
        let d = m.distance(y, x)?;
        Ok(obj.value(y)? + d * d / (2.0 * eta))
    };
    // grad φ(y) = grad f(y) − log_y(x)/η; the residual is η‖grad φ(y)‖
    let grad_phi = |y: &Point| -> Result<Tangent> { Ok(obj.gradient(y)?.lincomb(1.0, &m.log(y, x)?, -1.0 / eta)?) };

    let l = obj.metadata().l_smooth.unwrap_or(1.0);
    let mut t = 1.0 / (l + 1.0 / eta);
    let mut y = x.clone();
    let mut fy = phi(&y)?;
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    for it in 0..=opts.max_inner {
        let g = grad_phi(&y)?;
        let residual = eta * g.norm();
        let step_len = m.distance(&y, x)?;
        if residual < opts.tol && (residual <= 1e-6 * step_len || stalled >= 20 || residual == 0.0) {
            return Ok(ProxOutcome { point: y, residual, inner_iterations: it });
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if it == opts.max_inner {
            break;
        }
        let gn2 = g.dot(&g)?;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = m.exp(&y, &g.scale(-t))?;
            let fc = phi(&cand)?;
            // near the solution the Armijo test drowns in rounding of φ, so a
            // strict drop of the residual also counts as progress
            if fc <= fy - 0.5 * t * gn2 || (fc <= fy + 4.0 * f64::EPSILON * fy.abs() && grad_phi(&cand)?.norm() < gn2.sqrt()) {
                y = cand;
                fy = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no representable decrease left; accept if the residual allows
            if residual < opts.tol {
                return Ok(ProxOutcome { point: y, residual, inner_iterations: it });
            }
            break;
        }
        t *= 1.25;
    }
    Err(Error::NonConvergence {
        solver: "proximal inner solver",
        iterations: opts.max_inner,
        residual: best,
    })
}

/// Multiple of machine epsilon times the magnitude of the terms of `∇m(s)`
/// tolerated on top of `θ‖s‖²` when re-verifying a subproblem solution.
pub const CUBIC_ROUNDING_FACTOR: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Debug)]
pub struct CubicOutcome {
    pub point: Point,
    pub step: Tangent,
    /// `m(s) − m(0)`.
    pub model_decrease: f64,
    pub model_grad_norm: f64,
}

/// Cubic model `m(s) = ⟨s,g⟩ + ½sᵀHs + (M/3)‖s‖³` (relative to `f(x)`) and
/// its gradient, in orthonormal coordinates.
fn cubic_model(g: &DVector<f64>, h: &DMatrix<f64>, big_m: f64, s: &DVector<f64>) -> (f64, DVector<f64>) {
    let hs = h * s;
    let ns = s.norm();
    let val = g.dot(s) + 0.5 * s.dot(&hs) + big_m / 3.0 * ns.powi(3);
    let grad = g + hs + s * (big_m * ns);
    (val, grad)
}

/// Global minimizer of the cubic model through the secular equation
/// `‖(H + M r I)⁻¹g‖ = r` with `r ≥ max(0, −λ_min/M)`.
fn cubic_subproblem(g: &DVector<f64>, h: &DMatrix<f64>, big_m: f64) -> DVector<f64> {
    let n = g.len();
    let eig = SymmetricEigen::new(h.clone());
    let lam = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gt = q.transpose() * g;
    let lmin = lam.min();
    let r_lo = (-lmin / big_m).max(0.0);
    let s_of = |r: f64| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let d = lam[i] + big_m * r;
            if d > 0.0 {
                -gt[i] / d
            } else {
                0.0
            }
        })
    };
    let norm_at = |r: f64| s_of(r).norm();

    // hard case: the secular function never reaches r above the boundary
    let gap = 1e-14 * (1.0 + r_lo);
    if norm_at(r_lo + gap) <= r_lo + gap {
        let mut st = s_of(r_lo);
        let ns = st.norm();
        if r_lo > ns {
            let imin = lam.imin();
            st[imin] += (r_lo * r_lo - ns * ns).sqrt();
        }
        return q * st;
    }

    let mut lo = r_lo;
    let mut hi = r_lo.max(1e-300);
    while norm_at(hi) > hi {
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    let mut r = hi;
    for _ in 0..200 {
        // Newton on 1/‖s(r)‖ − 1/r, safeguarded by the bracket
        let s = s_of(r);
        let ns = s.norm();
        let phi = 1.0 / ns - 1.0 / r;
        if phi > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let ds: f64 = (0..n)
            .map(|i| {
                let d = lam[i] + big_m * r;
                if d > 0.0 {
                    gt[i] * gt[i] / (d * d * d)
                } else {
                    0.0
                }
            })
            .sum::<f64>();
        // d‖s‖/dr = −M·ds/‖s‖
        let dphi = big_m * ds / ns.powi(3) + 1.0 / (r * r);
        let mut next = r - phi / dphi;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * hi {
            r = next;
            break;
        }
        r = next;
    }
    q * s_of(r)
}

/// One cubic-regularized Newton step with model
/// `m(s) = f(x) + ⟨s, grad f⟩ + ½⟨s, Hess f[s]⟩ + (M/3)‖s‖³`.
///
/// The returned step is re-verified against `m(s) ≤ m(0)` and
/// `‖∇m(s)‖ ≤ θ‖s‖²` (the latter up to [`CUBIC_ROUNDING_FACTOR`]).
pub fn cubic_newton_step(obj: &dyn Objective, x: &Point, big_m: f64, theta: f64) -> Result<CubicOutcome> {
    if !(big_m > 0.0 && big_m.is_finite() && theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("cubic parameters M = {big_m}, theta = {theta}")));
    }
    if let Some(rho) = obj.metadata().rho {
        if big_m <= rho / 2.0 {
            return Err(Error::InvalidParameter(format!("M = {big_m} must exceed rho/2 = {}", rho / 2.0)));
        }
    }
    let m = obj.manifold();
    let basis = m.orthonormal_basis(x)?;
    let g = m.to_basis_coords(&basis, &obj.gradient(x)?);
    let h = obj.hessian_matrix(x)?;
    let h = (&h + h.transpose()) * 0.5;
    let h_norm = h.norm();

    let accept = |s: &DVector<f64>| -> (bool, f64, f64) {
        let (val, grad) = cubic_model(&g, &h, big_m, s);
        let ns = s.norm();
        let gn = grad.norm();
        let round = CUBIC_ROUNDING_FACTOR * (g.norm() + h_norm * ns + big_m * ns * ns);
        (val <= 0.0 && gn <= theta * ns * ns + round, val, gn)
    };

    let mut s = if g.norm() == 0.0 && h.symmetric_eigenvalues().min() >= 0.0 {
        DVector::zeros(g.len())
    } else {
        cubic_subproblem(&g, &h, big_m)
    };
    let (mut ok, mut val, mut gn) = accept(&s);
    if !ok {
        // fallback: gradient descent on the model from the current candidate
        let lip = h_norm + 3.0 * big_m * (s.norm() + g.norm().sqrt() + 1.0);
        let mut t = 1.0 / lip;
        for _ in 0..100_000 {
            let (v0, grad) = cubic_model(&g, &h, big_m, &s);
            let cand = &s - &grad * t;
            let (v1, _) = cubic_model(&g, &h, big_m, &cand);
            if v1 <= v0 - 0.5 * t * grad.norm_squared() {
                s = cand;
            } else {
                t *= 0.5;
            }
            (ok, val, gn) = accept(&s);
            if ok {
                break;
            }
        }
        if !ok {
            return Err(Error::NonConvergence {
                solver: "cubic subproblem",
                iterations: 100_000,
                residual: gn,
            });
        }
    }
    let step = m.from_basis_coords(x, &basis, &s);
    let point = m.exp(x, &step)?;
    Ok(CubicOutcome {
        point,
        step,
        model_decrease: val,
        model_grad_norm: gn,
    })
}

/// A base method with its declared certificate.
pub trait DescentMethod: Send + Sync {
    fn name(&self) -> &'static str;

    fn certificate(&self, obj: &dyn Objective) -> Result<DescentCertificate>;

    fn step(&self, obj: &dyn Objective, x: &Point) -> Result<Point>;
}

/// Riemannian gradient descent, 2-backward with `c = η(1 − Lη/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rgd {
    pub eta: f64,
}

impl Rgd {
    /// `η = 1/L`, giving `c = 1/(2L)`.
    pub fn unit(obj: &dyn Objective) -> Result<Self> {
        Ok(Rgd { eta: 1.0 / checked_l(obj)? })
    }
}

impl DescentMethod for Rgd {
    fn name(&self) -> &'static str {
        "rgd"
    }

    fn certificate(&self, obj: &dyn Objective) -> Result<DescentCertificate> {
        let l = checked_l(obj)?;
        DescentCertificate::new(2.0, self.eta * (1.0 - l * self.eta / 2.0), Direction::Backward)
    }

    fn step(&self, obj: &dyn Objective, x: &Point) -> Result<Point> {
        rgd_step(obj, x, self.eta)
    }
}

/// Riemannian proximal point, 2-forward with `c = η/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proximal {
    pub eta: f64,
    pub options: ProxOptions,
}

impl Proximal {
    pub fn new(eta: f64) -> Self {
        Proximal { eta, options: ProxOptions::default() }
    }
}

impl DescentMethod for Proximal {
    fn name(&self) -> &'static str {
        "proximal"
    }

    fn certificate(&self, _obj: &dyn Objective) -> Result<DescentCertificate> {
        DescentCertificate::new(2.0, self.eta / 2.0, Direction::Forward)
    }

    fn step(&self, obj: &dyn Objective, x: &Point) -> Result<Point> {
        Ok(proximal_step(obj, x, self.eta, &self.options)?.point)
    }
}

/// Cubic-regularized Newton, 3-forward with
/// `c = (M/3 − ρ/6)(θ + ρ/2 + M)^{−3/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicNewton {
    pub big_m: f64,
    pub theta: f64,
    pub rho: f64,
}

impl CubicNewton {
    /// `M = ρ`, `θ = ρ/2`, giving `c = 1/(12√2·√ρ)`. Uses the objective's
    /// declared `ρ`.
    pub fn concise(obj: &dyn Objective) -> Result<Self> {
        let rho = obj
            .metadata()
            .rho
            .filter(|r| *r > 0.0)
            .ok_or_else(|| Error::InvalidParameter(format!("{} declares no Hessian-Lipschitz constant", obj.name())))?;
        Ok(CubicNewton { big_m: rho, theta: rho / 2.0, rho })
    }

    pub fn constant(&self) -> f64 {
        (self.big_m / 3.0 - self.rho / 6.0) * (self.theta + self.rho / 2.0 + self.big_m).powf(-1.5)
    }
}

impl DescentMethod for CubicNewton {
    fn name(&self) -> &'static str {
        "cubic_newton"
    }

    fn certificate(&self, _obj: &dyn Objective) -> Result<DescentCertificate> {
        if self.big_m <= self.rho / 2.0 {
            return Err(Error::InvalidParameter(format!("M = {} must exceed rho/2", self.big_m)));
        }
        DescentCertificate::new(3.0, self.constant(), Direction::Forward)
    }

    fn step(&self, obj: &dyn Objective, x: &Point) -> Result<Point> {
        Ok(cubic_newton_step(obj, x, self.big_m, self.theta)?.point)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IterateTrace {
    pub iterates: Vec<Point>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Slack of the certificate inequality for step `k → k+1`.
    pub per_step_violation: Vec<f64>,
    /// First iterate index outside the domain.
    pub domain_exit: Option<usize>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn gaps(&self, f_star: f64) -> Vec<f64> {
        self.values.iter().map(|f| f - f_star).collect()
    }

    /// `min_{t≤k} ‖grad f(x_t)‖` for every `k`.
    pub fn running_min_grad(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.grad_norms
            .iter()
            .map(|g| {
                best = best.min(*g);
                best
            })
            .collect()
    }

    fn push(&mut self, obj: &dyn Objective, x: Point, dom: &DomainSpec) -> Result<()> {
        let f = obj.value(&x)?;
        if !f.is_finite() {
            return Err(Error::InvalidParameter(format!("objective is not finite at iterate {}", self.len())));
        }
        let g = obj.gradient(&x)?.norm();
        if self.domain_exit.is_none() && !dom.contains(&x)? {
            self.domain_exit = Some(self.len());
        }
        self.iterates.push(x);
        self.values.push(f);
        self.grad_norms.push(g);
        Ok(())
    }
}

/// Runs up to `k_max` steps from `x0`, stopping early at an exactly
/// stationary iterate.
pub fn run_descent(
    alg: &dyn DescentMethod,
    obj: &dyn Objective,
    x0: &Point,
    k_max: usize,
    dom: &DomainSpec,
) -> Result<IterateTrace> {
    run_descent_with(alg, obj, x0, k_max, dom, &mut |_| Ok(()))
}

/// [`run_descent`] calling `observe` after every recorded iterate.
pub fn run_descent_with(
    alg: &dyn DescentMethod,
    obj: &dyn Objective,
    x0: &Point,
    k_max: usize,
    dom: &DomainSpec,
    observe: &mut dyn FnMut(&IterateTrace) -> Result<()>,
) -> Result<IterateTrace> {
    let cert = alg.certificate(obj).ok();
    let mut trace = IterateTrace::default();
    trace.push(obj, x0.clone(), dom)?;
    observe(&trace)?;
    for k in 0..k_max {
        if trace.grad_norms[k] == 0.0 {
            break;
        }
        let x = alg.step(obj, &trace.iterates[k])?;
        trace.push(obj, x, dom)?;
        let slack = cert.map_or(f64::NAN, |c| {
            c.slack(trace.values[k], trace.values[k + 1], trace.grad_norms[k], trace.grad_norms[k + 1])
        });
        trace.per_step_violation.push(slack);
        observe(&trace)?;
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutcome {
    pub passed: bool,
    /// Largest `lhs − rhs` over all steps.
    pub worst_slack: f64,
    pub first_violation: Option<usize>,
}

/// Checks the certificate inequality on every consecutive pair of the trace.
pub fn certify(trace: &IterateTrace, cert: &DescentCertificate, tol: f64) -> CertifyOutcome {
    let mut worst = f64::NEG_INFINITY;
    let mut first = None;
    for k in 0..trace.len().saturating_sub(1) {
        let s = cert.slack(trace.values[k], trace.values[k + 1], trace.grad_norms[k], trace.grad_norms[k + 1]);
        if !(s <= tol) && first.is_none() {
            first = Some(k);
        }
        worst = worst.max(s);
    }
    if trace.len() < 2 {
        worst = 0.0;
    }
    CertifyOutcome {
        passed: first.is_none(),
        worst_slack: worst,
        first_violation: first,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use crate::objectives::{FrechetMean, Quadratic, SquaredDistance};

    fn quad(b: &[f64]) -> Quadratic {
        Quadratic::isotropic(DVector::from_column_slice(b)).unwrap()
    }

    fn h2_sqdist() -> (SquaredDistance, Point) {
        let m = Manifold::hyperboloid(2, 1.0).unwrap();
        let y0 = m.point_from_slice(&[1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
        let dom = DomainSpec::new(m.origin(), 1.5).unwrap();
        (SquaredDistance::new(y0, dom).unwrap(), m.origin())
    }

    #[test]
    fn rgd_unit_step_solves_isotropic_quadratic() {
        let q = quad(&[0.0, 0.0]);
        let x = q.manifold().point_from_slice(&[3.0, 4.0]).unwrap();
        let x1 = rgd_step(&q, &x, 1.0).unwrap();
        assert_eq!(x1.coords().as_slice(), &[0.0, 0.0]);
        assert!(rgd_step(&q, &x, 2.0).is_err());
        let star = q.known_solution().unwrap().x_star.clone();
        assert_eq!(rgd_step(&q, &star, 1.0).unwrap(), star);
    }

    #[test]
    fn rgd_decrease_on_h2() {
        let (f, x) = h2_sqdist();
        let l = f.metadata().l_smooth.unwrap();
        let eta = 0.1;
        let c = eta * (1.0 - l * eta / 2.0);
        let g = f.gradient(&x).unwrap().norm();
        let x1 = rgd_step(&f, &x, eta).unwrap();
        let drop = f.value(&x).unwrap() - f.value(&x1).unwrap();
        assert!(drop >= c * g * g);
    }

    #[test]
    fn proximal_matches_closed_form_on_quadratic() {
        let q = quad(&[0.0, 0.0]);
        let x = q.manifold().point_from_slice(&[2.0, 0.0]).unwrap();
        let out = proximal_step(&q, &x, 1.0, &ProxOptions::default()).unwrap();
        assert!((out.point.coords() - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-9);
        assert!(out.residual < 1e-9);

        let q = quad(&[0.5, -1.0]);
        let x = q.manifold().point_from_slice(&[2.0, 3.0]).unwrap();
        let eta = 0.7;
        let out = proximal_step(&q, &x, eta, &ProxOptions::default()).unwrap();
        let expect = (x.coords() + q.b() * eta) / (1.0 + eta);
        assert!((out.point.coords() - expect).norm() < 1e-9);
    }

    #[test]
    fn proximal_fixed_point_at_minimizer() {
        let (f, _) = h2_sqdist();
        let star = f.anchor().clone();
        let out = proximal_step(&f, &star, 1.0, &ProxOptions::default()).unwrap();
        assert_eq!(out.point, star);
        assert_eq!(out.inner_iterations, 0);
    }

    #[test]
    fn proximal_on_h2_moves_along_geodesic() {
        let (f, x) = h2_sqdist();
        let m = f.manifold();
        let eta = 1.5;
        let out = proximal_step(&f, &x, eta, &ProxOptions::default()).unwrap();
        let d0 = m.distance(&x, f.anchor()).unwrap();
        let d_new = m.distance(&out.point, f.anchor()).unwrap();
        assert!((d_new - d0 / (1.0 + eta)).abs() < 1e-6);
        let along = m.distance(&x, &out.point).unwrap() + d_new;
        assert!((along - d0).abs() < 1e-6);
    }

    #[test]
    fn cubic_step_solves_secular_equation_on_quadratic() {
        let q = quad(&[0.0, 0.0]);
        let x = q.manifold().point_from_slice(&[0.6, -0.8]).unwrap();
        let big_m = 2.0;
        let out = cubic_newton_step(&q, &x, big_m, 1.0).unwrap();
        // s = −g·t with t(1 + M‖g‖t) = 1
        let gn = 1.0;
        let t = (-1.0 + (1.0 + 4.0 * big_m * gn).sqrt()) / (2.0 * big_m * gn);
        let expect = -x.coords() * t;
        assert!((out.step.coords() - expect).norm() < 1e-14);
        assert!(out.model_decrease <= 0.0);
    }

    #[test]
    fn cubic_step_at_stationary_point_is_zero() {
        let q = quad(&[1.0, 2.0]);
        let star = q.known_solution().unwrap().x_star.clone();
        let out = cubic_newton_step(&q, &star, 1.0, 0.5).unwrap();
        assert_eq!(out.step.norm(), 0.0);
        assert_eq!(out.point, star);
    }

    #[test]
    fn cubic_hard_case_escapes_saddle() {
        // f = ½(x₁² − x₂²) near the saddle, gradient orthogonal to the negative direction
        let g = DVector::from_vec(vec![1e-3, 0.0]);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let s = cubic_subproblem(&g, &h, 1.0);
        let (val, grad) = cubic_model(&g, &h, 1.0, &s);
        assert!(val < 0.0);
        assert!(grad.norm() < 1e-12);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_certificate_on_h2() {
        let (mut f, x) = h2_sqdist();
        f.metadata_mut().rho = Some(2.0);
        let alg = CubicNewton::concise(&f).unwrap();
        assert!((alg.constant() - 1.0 / (12.0 * 2f64.sqrt() * 2f64.sqrt())).abs() < 1e-15);
        let x1 = alg.step(&f, &x).unwrap();
        let g1 = f.gradient(&x1).unwrap().norm();
        let drop = f.value(&x).unwrap() - f.value(&x1).unwrap();
        assert!(drop >= alg.constant() * g1.powf(1.5));
    }

    #[test]
    fn certify_detects_doubled_constant() {
        let q = quad(&[0.0]);
        let x0 = q.manifold().point_from_slice(&[1.0]).unwrap();
        let dom = DomainSpec::new(q.manifold().origin(), 2.0).unwrap();
        let alg = Rgd { eta: 0.5 };
        let trace = run_descent(&alg, &q, &x0, 5, &dom).unwrap();
        let cert = alg.certificate(&q).unwrap();
        assert_eq!(cert.c, 0.375);
        assert!(certify(&trace, &cert, 1e-12).passed);

        let alg = Rgd::unit(&q).unwrap();
        let trace = run_descent(&alg, &q, &x0, 5, &dom).unwrap();
        assert_eq!(trace.len(), 2);
        let cert = alg.certificate(&q).unwrap();
        let out = certify(&trace, &cert, 1e-12);
        assert!(out.passed);
        assert!(out.worst_slack.abs() < 1e-15);
        let doubled = DescentCertificate { c: 2.0 * cert.c, ..cert };
        let out = certify(&trace, &doubled, 1e-12);
        assert!(!out.passed);
        assert_eq!(out.first_violation, Some(0));
        assert!((out.worst_slack - 0.5).abs() < 1e-15);
    }

    #[test]
    fn certify_constant_trace() {
        let q = quad(&[0.0, 0.0]);
        let x = q.manifold().origin();
        let trace = IterateTrace {
            iterates: vec![x.clone(), x.clone(), x],
            values: vec![0.0; 3],
            grad_norms: vec![0.0; 3],
            per_step_violation: vec![0.0; 2],
            domain_exit: None,
        };
        let cert = DescentCertificate::new(2.0, 1.0, Direction::Forward).unwrap();
        let out = certify(&trace, &cert, 0.0);
        assert!(out.passed);
        assert_eq!(out.worst_slack, 0.0);
    }

    #[test]
    fn run_descent_zero_budget() {
        let q = quad(&[1.0]);
        let x = q.manifold().origin();
        let dom = DomainSpec::new(x.clone(), 1.0).unwrap();
        let trace = run_descent(&Rgd::unit(&q).unwrap(), &q, &x, 0, &dom).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(trace.per_step_violation.is_empty());
    }

    #[test]
    fn run_descent_flags_domain_exit() {
        let q = quad(&[3.0]);
        let x = q.manifold().origin();
        let dom = DomainSpec::new(x.clone(), 1.0).unwrap();
        let trace = run_descent(&Rgd { eta: 0.5 }, &q, &x, 10, &dom).unwrap();
        assert_eq!(trace.domain_exit, Some(1));
    }

    #[test]
    fn frechet_mean_rgd_converges() {
        use rand::SeedableRng;
        let m = Manifold::hyperboloid(2, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let ys: Vec<Point> = (0..10).map(|_| m.random_point_near(&m.origin(), 1.0, &mut rng).unwrap()).collect();
        let dom = DomainSpec::new(m.origin(), 1.0).unwrap();
        let f = FrechetMean::new(ys, dom.clone()).unwrap();
        let trace = run_descent(&Rgd::unit(&f).unwrap(), &f, &m.origin(), 200, &dom).unwrap();
        assert!(*trace.grad_norms.last().unwrap() < 1e-6);
        assert_eq!(trace.domain_exit, None);
    }

    #[test]
    fn rate_bound_substitutions() {
        let l = 3.0;
        let b = rate_bound_gconvex(2.0, 1.0 / (2.0 * l), 1.5, 4, Direction::Backward);
        assert!((b - 2.0 * l * 2.25 / 4.0).abs() < 1e-12);
        let b = rate_bound_gconvex(2.0, 0.2, 1.5, 4, Direction::Forward);
        assert!((b - 2.0 * 2.25 / (0.2 * 4.0)).abs() < 1e-12);
        let rho: f64 = 0.7;
        let c = 1.0 / (12.0 * 2f64.sqrt() * rho.sqrt());
        let b = rate_bound_gconvex(3.0, c, 2.0, 5, Direction::Forward);
        assert!((b - 36.0 * 288.0 * rho * 8.0 / 25.0).abs() < 1e-9 * b);
        let rc = RateConstants::new(2.5, 0.3);
        assert!(rc.c_bwd <= rc.c_fwd);

        assert_eq!(rate_bound_nonconvex(0.1, 2.0, 0.0, 3), 0.0);
        assert!((rate_bound_nonconvex(0.1, 2.0, 2.0, 5) - 2.0).abs() < 1e-15);

        assert_eq!(rate_bound_graddom(0.2, 0.5, 0, Direction::Backward, 3.0).unwrap(), 3.0);
        assert_eq!(rate_bound_graddom(0.25, 0.5, 2, Direction::Backward, 1.0).unwrap(), 0.25);
        assert!((rate_bound_graddom(0.5, 0.5, 3, Direction::Forward, 1.0).unwrap() - 0.125).abs() < 1e-16);
        assert!(rate_bound_graddom(0.6, 0.5, 3, Direction::Backward, 1.0).is_err());
    }
}
