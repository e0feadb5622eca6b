#![allow(dead_code)]

use geodescent_core::geometry::{DomainSpec, Manifold, Point, Tangent};
use geodescent_core::objectives::{FrechetMean, SquaredDistance};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn metric(m: &Manifold, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    match m {
        Manifold::Hyperboloid { .. } => a.dot(b) - 2.0 * a[0] * b[0],
        _ => a.dot(b),
    }
}

/// Acceleration of the geodesic equation in ambient coordinates.
fn geodesic_accel(m: &Manifold, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    match *m {
        Manifold::Euclidean { .. } => DVector::zeros(x.len()),
        Manifold::Sphere { radius, .. } => x * (-v.norm_squared() / (radius * radius)),
        Manifold::Hyperboloid { kappa, .. } => x * (kappa * metric(m, v, v)),
    }
}

/// Covariant-constancy rate `V'` along a curve with velocity `xd`.
fn transport_rate(m: &Manifold, x: &DVector<f64>, xd: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    match *m {
        Manifold::Euclidean { .. } => DVector::zeros(x.len()),
        Manifold::Sphere { radius, .. } => x * (-xd.dot(w) / (radius * radius)),
        Manifold::Hyperboloid { kappa, .. } => x * (kappa * metric(m, xd, w)),
    }
}

/// Integrates the geodesic with initial velocity `v` and parallel transports
/// `w` along it over `t ∈ [0, 1]` with classical RK4. Returns `(x(1), W(1))`.
pub fn rk4_geodesic(m: &Manifold, x0: &Point, v: &Tangent, w: &Tangent, steps: usize) -> (DVector<f64>, DVector<f64>) {
    let h = 1.0 / steps as f64;
    let mut x = x0.coords().clone();
    let mut xd = v.coords().clone();
    let mut ww = w.coords().clone();
    let f = |x: &DVector<f64>, xd: &DVector<f64>, ww: &DVector<f64>| {
        (xd.clone(), geodesic_accel(m, x, xd), transport_rate(m, x, xd, ww))
    };
    for _ in 0..steps {
        let (a1, b1, c1) = f(&x, &xd, &ww);
        let (a2, b2, c2) = f(&(&x + &a1 * (h / 2.0)), &(&xd + &b1 * (h / 2.0)), &(&ww + &c1 * (h / 2.0)));
        let (a3, b3, c3) = f(&(&x + &a2 * (h / 2.0)), &(&xd + &b2 * (h / 2.0)), &(&ww + &c2 * (h / 2.0)));
        let (a4, b4, c4) = f(&(&x + &a3 * h), &(&xd + &b3 * h), &(&ww + &c3 * h));
        x += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        xd += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
        ww += (c1 + c2 * 2.0 + c3 * 2.0 + c4) * (h / 6.0);
    }
    (x, ww)
}

pub fn h2() -> Manifold {
    Manifold::hyperboloid(2, 1.0).unwrap()
}

/// `½d(·, y₀)²` on ℍ² with `y₀` at distance 1 from the origin, domain of
/// radius 1.5 about the origin, start at `exp(o, e₂)`.
pub fn h2_squared_distance() -> (SquaredDistance, DomainSpec, Point) {
    let m = h2();
    let y0 = m.point_from_slice(&[1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
    let dom = DomainSpec::new(m.origin(), 1.5).unwrap();
    let x0 = m.point_from_slice(&[1f64.cosh(), 0.0, 1f64.sinh()]).unwrap();
    (SquaredDistance::new(y0, dom.clone()).unwrap(), dom, x0)
}

/// Fréchet mean of 12 seeded samples within distance 1 of the origin on ℍ²,
/// domain of radius 1, start at the boundary.
pub fn h2_frechet(seed: u64) -> (FrechetMean, DomainSpec, Point) {
    let m = h2();
    let mut r = rng(seed);
    let ys: Vec<Point> = (0..12).map(|_| m.random_point_near(&m.origin(), 1.0, &mut r).unwrap()).collect();
    let dom = DomainSpec::new(m.origin(), 1.0).unwrap();
    let x0 = m.point_from_slice(&[1f64.cosh(), -1f64.sinh(), 0.0]).unwrap();
    (FrechetMean::new(ys, dom.clone()).unwrap(), dom, x0)
}
