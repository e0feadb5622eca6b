//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use geodescent_core::acceleration::{
    conjugate_bound_sides, distortion_comparison, distortion_rate, linear_fit, ratio_trend, run_accelerated,
    shrink_diagnostics, xi_convergence_report, xi_solve, DeltaMode, DescentOracle, Schedule,
};
use geodescent_core::descent::{
    certify, default_tolerance, rate_bound_gconvex, rate_bound_graddom, rate_bound_nonconvex, run_descent,
    CubicNewton, DescentMethod, Proximal, Rgd,
};
use geodescent_core::geometry::{DomainSpec, Manifold, Point};
use geodescent_core::objectives::{estimate_hessian_lipschitz, FrechetMean, Objective, Quadratic, Rayleigh, SquaredDistance};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::{h2, h2_frechet, h2_squared_distance, rk4_geodesic, rng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn geometry_oracles() -> Outcome {
    let start = Instant::now();
    let manifolds = [
        Manifold::euclidean(3).unwrap(),
        Manifold::sphere(2, 1.0).unwrap(),
        Manifold::sphere(3, 2.0).unwrap(),
        Manifold::hyperboloid(2, 1.0).unwrap(),
        Manifold::hyperboloid(3, 0.5).unwrap(),
    ];
    let cases = 1000;
    let (mut inv, mut iso, mut ode) = (0f64, 0f64, 0f64);
    let mut r = rng(1);
    for m in &manifolds {
        let reach = match *m {
            Manifold::Sphere { radius, .. } => 0.9 * std::f64::consts::PI * radius,
            _ => 2.0,
        };
        for _ in 0..cases {
            let x = m.random_point_near(&m.origin(), reach, &mut r).unwrap();
            let v = m.random_tangent(&x, r.random::<f64>() * reach, &mut r).unwrap();
            let w = m.random_tangent(&x, 1.0, &mut r).unwrap();
            let y = m.exp(&x, &v).unwrap();
            inv = inv.max((&m.log(&x, &y).unwrap() - &v).norm());
            let p = m.random_point_near(&x, reach, &mut r).unwrap();
            inv = inv.max(m.distance(&m.exp(&x, &m.log(&x, &p).unwrap()).unwrap(), &p).unwrap());
            let tw = m.transport(&x, &y, &w).unwrap();
            iso = iso.max((tw.norm() - w.norm()).abs());
            let (xe, we) = rk4_geodesic(m, &x, &v, &w, 400);
            ode = ode.max((xe - y.coords()).amax()).max((we - tw.coords()).amax());
        }
    }
    let t = start.elapsed();
    let pass = inv < 1e-8 && iso < 1e-10 && ode < 1e-6 && within(t, 10.0);
    Outcome::new(
        pass,
        format!(
            "{} manifolds x {cases} cases: inversion {inv:.1e} (<1e-8), isometry {iso:.1e} (<1e-10), ODE {ode:.1e} (<1e-6), {:.2}s (<10s)",
            manifolds.len(),
            t.as_secs_f64()
        ),
    )
}

/// Benchmarks with their starting points and domains.
struct Bench {
    name: &'static str,
    obj: Box<dyn Objective>,
    dom: DomainSpec,
    x0: Point,
    convex: bool,
}

fn benches() -> Vec<Bench> {
    let mut out = Vec::new();
    let b = DVector::from_vec(vec![0.5, -1.0, 0.25, 2.0, 0.0]);
    let q = Quadratic::log_spaced(b, 0.1, 1.0).unwrap();
    let e = *q.manifold();
    let x0 = e.point_from_slice(&[1.0, 1.0, -1.0, 0.0, 2.0]).unwrap();
    let dom = DomainSpec::new(e.origin(), 5.0).unwrap();
    out.push(Bench { name: "quadratic R^5", obj: Box::new(q), dom, x0, convex: true });

    let (f, dom, x0) = h2_squared_distance();
    out.push(Bench { name: "squared distance H^2", obj: Box::new(f), dom, x0, convex: true });

    let (f, dom, x0) = h2_frechet(7);
    out.push(Bench { name: "Frechet mean H^2", obj: Box::new(f), dom, x0, convex: true });

    let s2 = Manifold::sphere(2, 1.0).unwrap();
    let anchor = s2.point_from_slice(&[0.3f64.sin(), 0.0, 0.3f64.cos()]).unwrap();
    let dom = DomainSpec::new(s2.origin(), 0.6).unwrap();
    let x0 = s2.point_from_slice(&[0.0, -(0.6f64.sin()), 0.6f64.cos()]).unwrap();
    out.push(Bench {
        name: "squared distance S^2 cap",
        obj: Box::new(SquaredDistance::new(anchor, dom.clone()).unwrap()),
        dom,
        x0,
        convex: true,
    });

    let mut r = rng(12);
    let ys: Vec<Point> = (0..8).map(|_| s2.random_point_near(&s2.origin(), 0.3, &mut r).unwrap()).collect();
    let dom = DomainSpec::new(s2.origin(), 0.35).unwrap();
    let x0 = s2.point_from_slice(&[0.35f64.sin(), 0.0, 0.35f64.cos()]).unwrap();
    out.push(Bench {
        name: "Frechet mean S^2 cap",
        obj: Box::new(FrechetMean::new(ys, dom.clone()).unwrap()),
        dom,
        x0,
        convex: true,
    });

    let (ray, x0) = rayleigh();
    let dom = DomainSpec::new(x0.clone(), 1.5).unwrap();
    out.push(Bench { name: "Rayleigh S^3", obj: Box::new(ray), dom, x0, convex: false });

    let mut r = rng(3);
    for bench in out.iter_mut().filter(|b| b.convex) {
        let rho = estimate_hessian_lipschitz(bench.obj.as_ref(), &bench.dom, 2000, &mut r).unwrap();
        let meta = bench.obj_mut().metadata_mut();
        meta.rho = Some(rho);
    }
    out
}

impl Bench {
    fn obj_mut(&mut self) -> &mut dyn Objective {
        self.obj.as_mut()
    }
}

fn rayleigh() -> (Rayleigh, Point) {
    let m = Manifold::sphere(3, 1.0).unwrap();
    let mut r = rng(11);
    let a = DMatrix::from_fn(4, 4, |_, _| r.random::<f64>() - 0.5);
    let q = (&a + a.transpose()) * 0.5;
    let x0 = m.project_point(DVector::from_vec(vec![1.0, -0.5, 0.3, 0.2])).unwrap();
    (Rayleigh::new(m, q).unwrap(), x0)
}

fn methods(obj: &dyn Objective, convex: bool) -> Vec<Box<dyn DescentMethod>> {
    let mut out: Vec<Box<dyn DescentMethod>> = vec![Box::new(Rgd::unit(obj).unwrap())];
    if convex {
        out.push(Box::new(Proximal::new(1.0)));
        out.push(Box::new(CubicNewton::concise(obj).unwrap()));
    }
    out
}

fn certificate_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut runs = 0;
    for b in benches() {
        let obj = b.obj.as_ref();
        for alg in methods(obj, b.convex) {
            let cert = alg.certificate(obj).unwrap();
            let trace = match run_descent(alg.as_ref(), obj, &b.x0, 200, &b.dom) {
                Ok(t) => t,
                Err(e) => {
                    failures.push(format!("{} on {}: {e}", alg.name(), b.name));
                    continue;
                }
            };
            let tol = default_tolerance(trace.values[0]);
            let out = certify(&trace, &cert, tol);
            runs += 1;
            worst = worst.max(out.worst_slack / tol);
            if !out.passed {
                failures.push(format!("{} on {} at step {:?}", alg.name(), b.name, out.first_violation));
            }
        }
    }
    let t = start.elapsed();
    Outcome::new(
        failures.is_empty() && within(t, 30.0),
        format!(
            "{runs} runs x 200 steps, worst slack {worst:.2} x tol, {:.2}s (<30s){}",
            t.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn gconvex_envelope() -> Outcome {
    let (mut f, dom, x0) = h2_frechet(7);
    let rho = estimate_hessian_lipschitz(&f, &dom, 2000, &mut rng(3)).unwrap();
    f.metadata_mut().rho = Some(rho);
    let f_star = f.known_solution().unwrap().f_star;
    let diam = dom.diameter();
    let mut parts = Vec::new();
    let mut pass = true;
    for alg in methods(&f, true) {
        let cert = alg.certificate(&f).unwrap();
        let trace = run_descent(alg.as_ref(), &f, &x0, 500, &dom).unwrap();
        let mut worst: f64 = 0.0;
        let mut ok = trace.domain_exit.is_none();
        for (k, gap) in trace.gaps(f_star).iter().enumerate().skip(1) {
            let bound = rate_bound_gconvex(cert.p, cert.c, diam, k, cert.direction);
            worst = worst.max(gap / bound);
            ok &= *gap <= bound;
        }
        pass &= ok;
        parts.push(format!("{} max gap/bound {worst:.1e}{}", alg.name(), if trace.domain_exit.is_some() { " (left domain)" } else { "" }));
    }
    Outcome::new(pass, format!("k in [1, 500]: {}", parts.join(", ")))
}

fn nonconvex_envelope() -> Outcome {
    let (f, x0) = rayleigh();
    let dom = DomainSpec::new(x0.clone(), 1.5).unwrap();
    let alg = Rgd::unit(&f).unwrap();
    let c = alg.certificate(&f).unwrap().c;
    let f_star = f.known_solution().unwrap().f_star;
    let trace = run_descent(&alg, &f, &x0, 500, &dom).unwrap();
    let gap0 = trace.values[0] - f_star;
    let mins = trace.running_min_grad();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (k, g) in mins.iter().enumerate().skip(1) {
        let bound = rate_bound_nonconvex(c, 2.0, gap0, k);
        worst = worst.max(g / bound);
        pass &= *g <= bound;
    }
    Outcome::new(pass, format!("{} steps, max min-grad/bound {worst:.2e}", mins.len() - 1))
}

fn graddom_envelope() -> Outcome {
    let (f, dom, x0) = h2_squared_distance();
    let tau = 0.5 / f.metadata().mu.unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    let algs: Vec<Box<dyn DescentMethod>> = vec![Box::new(Rgd::unit(&f).unwrap()), Box::new(Proximal::new(1.0))];
    for alg in algs {
        let cert = alg.certificate(&f).unwrap();
        let trace = run_descent(alg.as_ref(), &f, &x0, 500, &dom).unwrap();
        let gaps = trace.gaps(0.0);
        let tol = default_tolerance(gaps[0]);
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for (k, gap) in gaps.iter().enumerate() {
            let env = rate_bound_graddom(cert.c, tau, k, cert.direction, gaps[0]).unwrap();
            if *gap < f64::MIN_POSITIVE || env < f64::MIN_POSITIVE {
                break;
            }
            checked = k;
            if env >= tol {
                worst = worst.max(gap / env);
            }
            pass &= *gap <= env + tol;
        }
        parts.push(format!(
            "{} {:?} checked to k = {checked}, max gap/envelope {worst:.2e} while envelope >= tol",
            alg.name(),
            cert.direction
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn accelerated_gconvex_rate() -> Outcome {
    // flat case: weighted quadratic with log-spaced curvatures
    let n = 400;
    let q = Quadratic::log_spaced(DVector::zeros(n), 1e-9, 1.0).unwrap();
    let y0 = q.manifold().point(DVector::from_element(n, 1.0)).unwrap();
    let dom = DomainSpec::new(q.manifold().origin(), 100.0).unwrap();
    let oracle = DescentOracle::rgd_unit(&q).unwrap();
    let run = run_accelerated(&q, &y0, 1000, Schedule::GConvex, &oracle, &dom, DeltaMode::Unit).unwrap();
    let e0 = run.energies[0].e;
    let gaps = run.trace.gaps(0.0);
    let bound_ok = (1..=1000).all(|k| gaps[k] <= e0 / (k * k) as f64);
    let (lk, lg): (Vec<f64>, Vec<f64>) = (10..=1000).map(|k| ((k as f64).ln(), gaps[k].ln())).unzip();
    let slope = linear_fit(&lk, &lg).unwrap().0;

    // curved case: per-step energy bound with oracle distortion rates
    let (f, dom, y0) = h2_frechet(7);
    let oracle = DescentOracle::rgd_unit(&f).unwrap();
    let run = run_accelerated(&f, &y0, 300, Schedule::GConvex, &oracle, &dom, DeltaMode::Oracle).unwrap();
    let c = run.c;
    let diam = dom.diameter();
    let tol = default_tolerance(run.trace.values[0]);
    let mut worst = f64::NEG_INFINITY;
    let mut energy_ok = true;
    for k in 0..run.energies.len() - 1 {
        let delta = run.schedule[k + 1].delta;
        let allowance = 4.0 / c * (1.0 - 1.0 / delta) * diam * diam;
        let excess = run.energies[k + 1].e - run.energies[k].e - allowance;
        worst = worst.max(excess);
        energy_ok &= excess <= tol;
    }
    let exit = geodescent_core::acceleration::first_domain_exit(&run, &dom).unwrap();
    let delta_max = run.deltas().iter().cloned().fold(1.0, f64::max);
    Outcome::new(
        bound_ok && slope <= -1.9 && energy_ok,
        format!(
            "flat: gap <= E0/k^2 on [1, 1000] {bound_ok}, slope on [10, 1000] {slope:.3} (<= -1.9); H^2 oracle-delta: worst energy excess {worst:.2e} (tol {tol:.1e}), delta_max {delta_max:.4}, domain exit {exit:?}"
        ),
    )
}

fn strongly_run() -> (SquaredDistance, geodescent_core::acceleration::AccelRun) {
    let (f, dom, y0) = h2_squared_distance();
    let oracle = DescentOracle::rgd_unit(&f).unwrap();
    let mu = f.metadata().mu.unwrap();
    let run = run_accelerated(&f, &y0, 500, Schedule::Strongly { mu, xi0: None }, &oracle, &dom, DeltaMode::Analytic).unwrap();
    (f, run)
}

fn strongly_product() -> Outcome {
    let (f, run) = strongly_run();
    let mu = f.metadata().mu.unwrap();
    let e0 = run.energies[0].e;
    let tol = default_tolerance(run.trace.values[0]);
    let prods = run.xi_products();
    let gaps = run.trace.gaps(0.0);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in 1..gaps.len() {
        let bound = prods[k] * e0;
        ok &= gaps[k] <= bound + tol;
        if bound > 0.0 {
            worst = worst.max(gaps[k] / bound);
        }
    }
    let a = 2.0 * mu * run.c;
    let plain = (1.0 - a).powi(100);
    let delta_max = run.deltas().iter().cloned().fold(1.0, f64::max);
    let beats = prods[100] < plain;
    Outcome::new(
        ok && beats,
        format!(
            "max gap/(prod*E0) {worst:.2e} on [1, 500]; prod at k=100 {:.3e} vs (1-2 mu c)^100 {plain:.3e}; delta_max {delta_max:.4}",
            prods[100]
        ),
    )
}

fn xi_dynamics() -> Outcome {
    let (mu, c) = (1.0, 0.08);
    let a: f64 = 2.0 * mu * c;
    let fixed = (xi_solve(a.sqrt(), 1.0, mu, c).unwrap() - a.sqrt()).abs();
    let mut xis = vec![a + 1e-3];
    for _ in 0..200 {
        xis.push(xi_solve(*xis.last().unwrap(), 1.0, mu, c).unwrap());
    }
    let report = xi_convergence_report(&xis, mu, c, 1e-6);
    let monotone = xis.windows(2).all(|w| w[1] >= w[0]);

    let mut r = rng(8);
    let mut bad = 0;
    for _ in 0..100_000 {
        let mu = 10f64.powf(r.random_range(-2.0..1.0));
        let c = r.random_range(0.001..0.999) / (2.0 * mu);
        let a = 2.0 * mu * c;
        let xi_k = a + (1.0 - a) * r.random::<f64>() * 0.999_999;
        let delta = 10f64.powf(r.random_range(0.0..6.0));
        match xi_solve(xi_k, delta, mu, c) {
            Ok(x) if x >= a && x < 1.0 => {
                if xi_k <= a.sqrt() && x > a.sqrt() * (1.0 + 1e-12) {
                    bad += 1;
                }
            }
            _ => bad += 1,
        }
    }
    let pass = fixed < 1e-12 && report.first_within.is_some_and(|k| k <= 200) && monotone && bad == 0;
    Outcome::new(
        pass,
        format!(
            "fixed-point error {fixed:.1e}; from 2 mu c + 1e-3 within 1e-6 at k = {:?} (monotone {monotone}); bracket violations {bad} / 100000",
            report.first_within
        ),
    )
}

fn distortion_validity() -> Outcome {
    let m = h2();
    let o = m.origin();
    let mut r = rng(9);
    let n = 10_000;
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let xp = m.random_point_near(&o, 2.0, &mut r).unwrap();
        let zp = m.exp(&xp, &m.random_tangent(&xp, r.random::<f64>(), &mut r).unwrap()).unwrap();
        let xs = match i % 3 {
            0 => {
                let s = r.random::<f64>() * 10f64.powf(r.random_range(-4.0..0.0));
                m.exp(&zp, &m.random_tangent(&zp, s, &mut r).unwrap()).unwrap()
            }
            1 => m.exp(&xp, &m.random_tangent(&xp, r.random_range(0.0..6.0), &mut r).unwrap()).unwrap(),
            _ => m.random_point_near(&o, 4.0, &mut r).unwrap(),
        };
        let xn = match r.random_range(0..3) {
            0 => zp.clone(),
            1 => m.exp(&xp, &m.random_tangent(&xp, r.random_range(0.0..3.0), &mut r).unwrap()).unwrap(),
            _ => {
                let y = m.random_point_near(&o, 3.0, &mut r).unwrap();
                m.exp(&y, &m.log(&y, &zp).unwrap().scale(r.random::<f64>())).unwrap()
            }
        };
        let delta = distortion_rate(&m, &xp, &zp, &xn, DeltaMode::Analytic, None).unwrap();
        let lhs = m.projected_distance(&xn, &zp, &xs).unwrap().powi(2);
        let rhs = m.projected_distance(&xp, &zp, &xs).unwrap().powi(2);
        if lhs > delta * rhs + 1e-10 {
            bad += 1;
        }
        if rhs > 0.0 {
            worst = worst.max(lhs / (delta * rhs));
        }
    }
    Outcome::new(
        bad == 0,
        format!(
            "{bad} violations / {n} configurations, worst lhs/(delta*rhs) {worst:.6}, T(1) = {:.6}",
            distortion_comparison(1.0, 1.0)
        ),
    )
}

fn shrink() -> Outcome {
    let (f, run) = strongly_run();
    let mu = f.metadata().mu.unwrap();
    let recs = shrink_diagnostics(&f, &run, mu).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for rec in &recs {
        ok &= rec.d_y_star <= rec.envelope_y * (1.0 + 1e-9) + 1e-12;
        worst = worst.max(rec.d_y_star / rec.envelope_y);
    }
    let slope = ratio_trend(&recs, 1e-8).unwrap_or(f64::NAN);
    let max_ratio = recs.iter().map(|r| r.ratio).filter(|r| r.is_finite()).fold(0.0, f64::max);
    Outcome::new(
        ok && slope <= 0.05,
        format!("max d(y,x*)/envelope {worst:.3e}; ratio slope {slope:.2e} (<= 0.05), max ratio {max_ratio:.3}"),
    )
}

fn conjugate() -> Outcome {
    let mut r = rng(10);
    let n = 100_000;
    let mut bad = 0;
    for _ in 0..n {
        let d = r.random_range(1..7);
        let s = DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0));
        let u: DVector<f64> = DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0));
        let alpha = r.random_range(-3.0..3.0);
        let q = r.random_range(1.5..4.0);
        let (lhs, rhs) = conjugate_bound_sides(&s, &u, alpha, q);
        if lhs > rhs + 1e-12 {
            bad += 1;
        }
    }
    let mut eq: f64 = 0.0;
    for _ in 0..1000 {
        let d = r.random_range(1..7);
        let u: DVector<f64> = DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0));
        let alpha: f64 = r.random_range(-3.0..3.0);
        let q: f64 = r.random_range(1.5..4.0);
        let norm = (alpha.abs() * u.norm()).powf(1.0 / (q - 1.0));
        let s = &u * (alpha.signum() * norm / u.norm());
        let (lhs, rhs) = conjugate_bound_sides(&s, &u, alpha, q);
        eq = eq.max((lhs - rhs).abs());
    }
    Outcome::new(bad == 0 && eq < 1e-10, format!("{bad} violations / {n}; equality case max |lhs - rhs| {eq:.1e}"))
}

fn main() {
    let start = Instant::now();
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        ("geometry oracles", geometry_oracles),
        ("descent certificates", certificate_suite),
        ("g-convex envelope", gconvex_envelope),
        ("non-convex envelope", nonconvex_envelope),
        ("gradient-dominated envelope", graddom_envelope),
        ("accelerated g-convex rate", accelerated_gconvex_rate),
        ("accelerated strongly convex rate", strongly_product),
        ("xi dynamics", xi_dynamics),
        ("distortion validity", distortion_validity),
        ("distance shrinking diagnostics", shrink),
        ("conjugate bound", conjugate),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2}s]",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            t.elapsed().as_secs_f64()
        );
    }
    let total = start.elapsed().as_secs_f64();
    println!("acceptance: {} / {} passed in {total:.1}s (budget 300s)", criteria.len() - failed, criteria.len());
    if failed > 0 || total >= 300.0 {
        std::process::exit(1);
    }
}
