//! Executes one experiment: streams the trace, checks every guarantee the
//! config activates, and writes the JSON report.

use std::cell::RefCell;
use std::io;
use std::path::{Path, PathBuf};

use geodescent_core::acceleration::{
    first_domain_exit, run_accelerated_with, shrink_diagnostics, gconvex_accel_bound, xi_convergence_report, AccelRun,
    DescentOracle, Schedule,
};
use geodescent_core::descent::{
    default_tolerance, rate_bound_gconvex, rate_bound_graddom, rate_bound_nonconvex, run_descent_with, DescentCertificate,
    DescentMethod,
};
use geodescent_core::geometry::DomainSpec;
use geodescent_core::objectives::{ConvexityClass, Objective};
use geodescent_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, LoadedConfig, ObjectiveKind};
use crate::experiment::{build, BuildError, Method};
use crate::fit::{fit_rate, usable_end, RateFit};
use crate::trace::{finite, StepRecord, TraceHeader, TraceWriter};

pub const REPORT_SCHEMA: u32 = 1;
/// Start of the default rate-fit window.
pub const FIT_START: usize = 10;
/// Largest acceptable fitted slope of the distance ratio on strongly convex runs.
pub const RATIO_TREND_LIMIT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub name: String,
    pub passed: bool,
    /// Largest `lhs − rhs` over the checked steps.
    pub worst_slack: Option<f64>,
    /// Largest `lhs / rhs` over steps with `rhs > 0`.
    pub worst_ratio: Option<f64>,
    pub first_violation: Option<usize>,
    pub checked_steps: usize,
    pub detail: String,
}

impl GuaranteeCheck {
    fn failed(name: &str, detail: String) -> Self {
        GuaranteeCheck {
            name: name.into(),
            passed: false,
            worst_slack: None,
            worst_ratio: None,
            first_violation: None,
            checked_steps: 0,
            detail,
        }
    }
}

/// Accumulates `lhs − rhs` over steps and judges against a tolerance.
struct Check {
    name: &'static str,
    tol: f64,
    worst: f64,
    ratio: Option<f64>,
    first: Option<usize>,
    steps: usize,
}

impl Check {
    fn new(name: &'static str, tol: f64) -> Self {
        Check { name, tol, worst: f64::NEG_INFINITY, ratio: None, first: None, steps: 0 }
    }

    fn observe(&mut self, k: usize, lhs: f64, rhs: f64) {
        let s = lhs - rhs;
        self.steps += 1;
        if s.is_nan() || s > self.worst {
            self.worst = s;
        }
        if rhs > 0.0 && lhs.is_finite() {
            let r = lhs / rhs;
            self.ratio = Some(self.ratio.map_or(r, |x| x.max(r)));
        }
        if !(s <= self.tol) && self.first.is_none() {
            self.first = Some(k);
        }
    }

    fn finish(self, detail: String) -> GuaranteeCheck {
        GuaranteeCheck {
            name: self.name.into(),
            passed: self.first.is_none(),
            worst_slack: finite(self.worst),
            worst_ratio: self.ratio.and_then(finite),
            first_violation: self.first,
            checked_steps: self.steps,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSummary {
    pub kind: ObjectiveKind,
    pub name: String,
    pub l_smooth: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub convexity: ConvexityClass,
    pub f_star: f64,
    pub f_star_source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub kind: String,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub direction: Option<String>,
    pub parameters: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiRow {
    pub k: usize,
    pub xi: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiTable {
    pub target: f64,
    /// First `k` with `|ξ_k − target| ≤ 1e-6`.
    pub first_within: Option<usize>,
    pub log_slope: Option<f64>,
    pub rows: Vec<XiRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub name: String,
    pub config_hash: String,
    pub objective: ObjectiveSummary,
    pub algorithm: AlgorithmSummary,
    pub k_max: usize,
    pub iterations: usize,
    pub final_gap: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub domain_exit: Option<usize>,
    pub guarantees: Vec<GuaranteeCheck>,
    pub fits: Vec<RateFit>,
    pub fit_note: Option<String>,
    pub xi_table: Option<XiTable>,
    /// Fitted slope of `d(x_k, z_k)/envelope` on strongly convex runs.
    pub ratio_trend: Option<f64>,
    pub errors: Vec<String>,
    pub passed: bool,
    pub trace: PathBuf,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Build(#[from] BuildError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl HarnessError {
    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> HarnessError {
        let context = context.into();
        move |source| HarnessError::Io { context, source }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

pub fn objective_id(cfg: &ExperimentConfig) -> String {
    let v = serde_json::json!({ "manifold": cfg.manifold, "objective": cfg.objective });
    sha256_hex(&serde_json::to_vec(&v).expect("config serializes"))[..16].to_string()
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Runs `loaded` with outputs under `root/<name>/`. Module errors during
/// the run land in the report; only setup failures are returned as `Err`.
pub fn run_experiment(loaded: &LoadedConfig, root: &Path) -> Result<Report, HarnessError> {
    let cfg = &loaded.config;
    let exp = build(cfg)?;
    let obj = exp.objective.as_ref();
    let sol = obj
        .known_solution()
        .ok_or(BuildError { field: "objective", source: Error::MissingSolution("optimal value") })?;
    let f_star = sol.f_star;

    let dir = root.join(&loaded.name);
    std::fs::create_dir_all(&dir).map_err(HarnessError::io(format!("creating {}", dir.display())))?;
    let trace_path = resolve(&dir, &cfg.output.trace);
    let report_path = resolve(&dir, &cfg.output.report);
    for p in [&trace_path, &report_path] {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(HarnessError::io(format!("creating {}", parent.display())))?;
        }
    }

    let meta = obj.metadata();
    let objective = ObjectiveSummary {
        kind: cfg.objective_kind(),
        name: obj.name().to_string(),
        l_smooth: meta.l_smooth,
        mu: meta.mu,
        rho: meta.rho,
        convexity: meta.convexity,
        f_star,
        f_star_source: match cfg.objective_kind() {
            ObjectiveKind::FrechetMean => "reference minimization to gradient norm < 1e-12".into(),
            _ => "exact".into(),
        },
    };
    let header = TraceHeader {
        schema: REPORT_SCHEMA,
        name: loaded.name.clone(),
        objective_id: objective_id(cfg),
        objective: obj.name().to_string(),
        algorithm: cfg.algorithm_kind().as_str().to_string(),
        x0: exp.x0.to_vec(),
        f_star,
    };
    let writer = TraceWriter::create(&trace_path, &header)
        .map_err(HarnessError::io(format!("creating {}", trace_path.display())))?;

    let mut report = Report {
        schema: REPORT_SCHEMA,
        name: loaded.name.clone(),
        config_hash: config_hash(cfg),
        objective,
        algorithm: AlgorithmSummary {
            kind: header.algorithm.clone(),
            p: None,
            c: None,
            direction: None,
            parameters: serde_json::Value::Null,
        },
        k_max: cfg.k_max(),
        iterations: 0,
        final_gap: None,
        final_grad_norm: None,
        domain_exit: None,
        guarantees: Vec::new(),
        fits: Vec::new(),
        fit_note: None,
        xi_table: None,
        ratio_trend: None,
        errors: Vec::new(),
        passed: false,
        trace: trace_path.clone(),
    };

    let steps = match &exp.method {
        Method::Descent { alg, params } => {
            report.algorithm.parameters = params.clone();
            run_base(alg.as_ref(), obj, &exp.domain, &exp.x0, cfg.k_max(), writer, &mut report)
        }
        Method::Accelerated { schedule, oracle, delta_mode } => {
            report.algorithm.parameters = serde_json::json!({
                "schedule": schedule, "oracle": oracle, "delta_mode": delta_mode
            });
            run_accel(obj, &exp, *schedule, oracle, *delta_mode, cfg.k_max(), writer, &mut report)
        }
    };

    if let Some(last) = steps.last() {
        report.iterations = last.k;
        report.final_gap = finite(last.gap);
        report.final_grad_norm = finite(last.grad_norm);
    }
    let gaps: Vec<f64> = steps.iter().map(|s| s.gap).collect();
    match usable_end(&gaps, FIT_START, cfg.k_max()) {
        Some(end) => match fit_rate(&gaps, FIT_START, end) {
            Ok(fit) => report.fits.push(fit),
            Err(e) => report.fit_note = Some(e.to_string()),
        },
        None => report.fit_note = Some(format!("no gap above the floor from k = {FIT_START}")),
    }
    report.passed = report.errors.is_empty() && report.guarantees.iter().all(|g| g.passed);

    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    let tmp = report_path.with_extension("json.partial");
    std::fs::write(&tmp, text + "\n").map_err(HarnessError::io(format!("writing {}", tmp.display())))?;
    std::fs::rename(&tmp, &report_path).map_err(HarnessError::io(format!("writing {}", report_path.display())))?;
    Ok(report)
}

/// Trace writer shared with an observer callback; the first I/O error is
/// kept and reported after the run.
struct Sink {
    writer: TraceWriter,
    steps: Vec<StepRecord>,
    io_error: Option<io::Error>,
}

impl Sink {
    fn push(&mut self, rec: StepRecord) -> geodescent_core::Result<()> {
        if let Err(e) = self.writer.step(&rec) {
            self.io_error = Some(e);
            return Err(Error::InvalidParameter("trace write failed".into()));
        }
        self.steps.push(rec);
        Ok(())
    }

    fn finish(self, report: &mut Report, outcome: geodescent_core::Result<()>) -> Vec<StepRecord> {
        if let Some(e) = self.io_error {
            report.errors.push(format!("writing trace: {e}"));
        } else if let Err(e) = outcome {
            let k = self.steps.last().map_or(0, |s| s.k);
            report.errors.push(format!("run stopped after iterate {k}: {e}"));
        }
        self.steps
    }
}

/// Smallest active gap bound for a base method at `k`.
fn base_bound(
    cert: &DescentCertificate,
    obj: &dyn Objective,
    diam: f64,
    gap0: f64,
    k: usize,
) -> Option<f64> {
    let meta = obj.metadata();
    let mut best: Option<f64> = None;
    if meta.convexity != ConvexityClass::Nonconvex && k > 0 {
        best = Some(rate_bound_gconvex(cert.p, cert.c, diam, k, cert.direction));
    }
    if let Some(gd) = meta.grad_dom.filter(|gd| gd.p == cert.p) {
        if let Ok(b) = rate_bound_graddom(cert.c, gd.tau, k, cert.direction, gap0) {
            best = Some(best.map_or(b, |x| x.min(b)));
        }
    }
    best
}

fn run_base(
    alg: &dyn DescentMethod,
    obj: &dyn Objective,
    dom: &DomainSpec,
    x0: &geodescent_core::Point,
    k_max: usize,
    writer: TraceWriter,
    report: &mut Report,
) -> Vec<StepRecord> {
    let f_star = report.objective.f_star;
    let diam = dom.diameter();
    let cert = alg.certificate(obj);
    if let Ok(c) = &cert {
        report.algorithm.p = Some(c.p);
        report.algorithm.c = Some(c.c);
        report.algorithm.direction = Some(format!("{:?}", c.direction).to_lowercase());
    }
    let gap0 = obj.value(x0).map(|f| f - f_star).unwrap_or(f64::NAN);
    let sink = RefCell::new(Sink { writer, steps: Vec::new(), io_error: None });
    let mut domain_exit = None;
    let outcome = run_descent_with(alg, obj, x0, k_max, dom, &mut |t| {
        let k = t.len() - 1;
        domain_exit = t.domain_exit;
        let f = t.values[k];
        sink.borrow_mut().push(StepRecord {
            k,
            coords: t.iterates[k].to_vec(),
            f,
            gap: f - f_star,
            grad_norm: t.grad_norms[k],
            slack: k.checked_sub(1).and_then(|j| finite(t.per_step_violation[j])),
            bound: cert.as_ref().ok().and_then(|c| base_bound(c, obj, diam, gap0, k)).and_then(finite),
            ..Default::default()
        })
    })
    .map(|_| ());
    let steps = sink.into_inner().finish(report, outcome);
    report.domain_exit = domain_exit;

    let tol = default_tolerance(steps.first().map_or(0.0, |s| s.f));
    let cert = match cert {
        Ok(c) => c,
        Err(e) => {
            report.guarantees.push(GuaranteeCheck::failed("certificate", format!("no valid certificate: {e}")));
            return steps;
        }
    };
    let mut check = Check::new("certificate", tol);
    for s in steps.iter().skip(1) {
        check.observe(s.k, s.slack.unwrap_or(f64::NAN), 0.0);
    }
    let stopped = !report.errors.is_empty();
    let mut g = check.finish(format!(
        "{}-{:?} descent with c = {:.6e}, tolerance {tol:.3e}",
        cert.p, cert.direction, cert.c
    ));
    if stopped {
        g.passed = false;
        g.detail.push_str("; run stopped early");
    }
    report.guarantees.push(g);

    let meta = obj.metadata();
    if meta.convexity != ConvexityClass::Nonconvex {
        report.guarantees.push(domain_check(domain_exit, "iterates"));
        let mut check = Check::new("gconvex_envelope", tol);
        for s in steps.iter().skip(1) {
            check.observe(s.k, s.gap, rate_bound_gconvex(cert.p, cert.c, diam, s.k, cert.direction));
        }
        report.guarantees.push(check.finish(format!("gap against C diam^p / k^(p-1) with diam = {diam}")));
    }

    if gap0 > 0.0 {
        let mut check = Check::new("nonconvex_envelope", 0.0);
        let mut best = f64::INFINITY;
        for s in &steps {
            best = best.min(s.grad_norm);
            if s.k > 0 {
                let b = rate_bound_nonconvex(cert.c, cert.p, gap0, s.k);
                check.observe(s.k, best, b * (1.0 + 1e-9));
            }
        }
        report.guarantees.push(check.finish("running minimum gradient norm against (gap0/(c k))^((p-1)/p)".into()));
    }

    if let Some(gd) = meta.grad_dom.filter(|gd| gd.p == cert.p) {
        match rate_bound_graddom(cert.c, gd.tau, 1, cert.direction, gap0) {
            Ok(_) => {
                let mut check = Check::new("gradient_dominated_envelope", tol);
                for s in &steps {
                    let b = rate_bound_graddom(cert.c, gd.tau, s.k, cert.direction, gap0).unwrap_or(f64::NAN);
                    if !(b >= f64::MIN_POSITIVE) {
                        break;
                    }
                    check.observe(s.k, s.gap, b);
                }
                report
                    .guarantees
                    .push(check.finish(format!("linear envelope with tau = {}, checked until underflow", gd.tau)));
            }
            Err(e) => report.guarantees.push(GuaranteeCheck::failed("gradient_dominated_envelope", e.to_string())),
        }
    }
    steps
}

fn domain_check(exit: Option<usize>, what: &str) -> GuaranteeCheck {
    GuaranteeCheck {
        name: "domain_containment".into(),
        passed: exit.is_none(),
        worst_slack: None,
        worst_ratio: None,
        first_violation: exit,
        checked_steps: 0,
        detail: match exit {
            None => format!("{what} stayed in the domain"),
            Some(k) => format!("{what} left the domain at k = {k}"),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn run_accel(
    obj: &dyn Objective,
    exp: &crate::experiment::Experiment,
    schedule: Schedule,
    oracle: &DescentOracle,
    delta_mode: geodescent_core::acceleration::DeltaMode,
    k_max: usize,
    writer: TraceWriter,
    report: &mut Report,
) -> Vec<StepRecord> {
    let f_star = report.objective.f_star;
    let diam = exp.domain.diameter();
    if let Ok(c) = oracle.c(obj) {
        report.algorithm.p = Some(2.0);
        report.algorithm.c = Some(c);
        report.algorithm.direction = Some("backward".into());
    }
    let sink = RefCell::new(Sink { writer, steps: Vec::new(), io_error: None });
    let mut prod = 1.0;
    let mut delta_max: f64 = 1.0;
    let mut final_run: Option<AccelRun> = None;
    let outcome = run_accelerated_with(obj, &exp.x0, k_max, schedule, oracle, &exp.domain, delta_mode, &mut |run| {
        let k = run.trace.len() - 1;
        let s = &run.schedule[k];
        if k > 0 {
            if let Some(xi) = s.xi {
                prod *= 1.0 - xi;
            }
            delta_max = delta_max.max(s.delta);
        }
        let e = run.energies.get(k);
        let e0 = run.energies.first().map(|e| e.e);
        let bound = match (schedule, e0) {
            (Schedule::GConvex, Some(e0)) if k > 0 => Some(gconvex_accel_bound(e0, run.c, diam, delta_max, k)),
            (Schedule::Strongly { .. }, Some(e0)) => Some(prod * e0),
            _ => None,
        };
        let f = run.trace.values[k];
        sink.borrow_mut().push(StepRecord {
            k,
            coords: run.trace.iterates[k].to_vec(),
            f,
            gap: f - f_star,
            grad_norm: run.trace.grad_norms[k],
            slack: k.checked_sub(1).and_then(|j| finite(run.trace.per_step_violation[j])),
            bound: bound.and_then(finite),
            delta: finite(s.delta),
            xi: s.xi,
            a: finite(s.a),
            b: finite(s.b),
            e: e.and_then(|e| finite(e.e)),
            d_xy: e.map(|e| e.d_xy),
            d_xz: e.map(|e| e.d_xz),
            envelope: run.d0.map(|d0| (prod * d0).sqrt()).and_then(finite),
        })
    })
    .map(|run| final_run = Some(run));
    let oracle_violation = matches!(outcome, Err(Error::OracleViolation { .. }));
    let steps = sink.into_inner().finish(report, outcome);
    let tol = default_tolerance(steps.first().map_or(0.0, |s| s.f));

    let mut check = Check::new("oracle_certificate", tol);
    for s in steps.iter().skip(1) {
        check.observe(s.k, s.slack.unwrap_or(f64::NAN), 0.0);
    }
    let mut g = check.finish(format!("decrease contract of the {} oracle, tolerance {tol:.3e}", oracle_name(oracle)));
    if oracle_violation {
        g.passed = false;
        g.detail.push_str("; oracle contract violated");
    }
    report.guarantees.push(g);

    let Some(run) = final_run else { return steps };
    let exit = first_domain_exit(&run, &exp.domain).unwrap_or(Some(0));
    report.domain_exit = exit;
    report.guarantees.push(domain_check(exit, "x, y and z iterates"));
    let c = run.c;
    let e0 = run.energies.first().map(|e| e.e).unwrap_or(f64::NAN);
    match schedule {
        Schedule::GConvex => {
            let mut bound = Check::new("accelerated_gconvex_bound", tol);
            let mut energy = Check::new("energy_step_bound", tol);
            let mut dmax: f64 = 1.0;
            for k in 1..run.energies.len() {
                let delta = run.schedule[k].delta;
                dmax = dmax.max(delta);
                bound.observe(k, run.energies[k].f_gap, gconvex_accel_bound(e0, c, diam, dmax, k));
                let allowance = 4.0 / c * (1.0 - 1.0 / delta) * diam * diam;
                energy.observe(k - 1, run.energies[k].e - run.energies[k - 1].e, allowance);
            }
            report.guarantees.push(bound.finish(format!(
                "gap against E0/k^2 + (4/c) diam^2 (1 - 1/delta_max)/k with E0 = {e0:.6e}, delta_max = {dmax:.6}"
            )));
            report.guarantees.push(energy.finish("E_(k+1) - E_k against (4/c)(1 - 1/delta_(k+1)) diam^2".into()));
        }
        Schedule::Strongly { mu, .. } => {
            let prods = run.xi_products();
            let mut check = Check::new("strongly_product_bound", tol);
            for (k, (en, prod)) in run.energies.iter().zip(&prods).enumerate().skip(1) {
                check.observe(k, en.f_gap, prod * e0);
            }
            report.guarantees.push(check.finish(format!("gap against prod(1 - xi_j) E0 with E0 = {e0:.6e}")));
            if let Ok(recs) = shrink_diagnostics(obj, &run, mu) {
                let mut check = Check::new("distance_envelope", 1e-12);
                for r in &recs {
                    check.observe(r.k, r.d_y_star, r.envelope_y * (1.0 + 1e-9));
                }
                report.guarantees.push(check.finish("d(y_k, x*) against sqrt(2 prod D0 / mu)".into()));
                report.ratio_trend = geodescent_core::acceleration::ratio_trend(&recs, 1e-8);
            }
            let xis = run.xis();
            let xr = xi_convergence_report(&xis, mu, c, 1e-6);
            let rows = xis
                .iter()
                .enumerate()
                .filter(|(k, _)| *k < 4 || [5, 10, 20, 50].contains(k) || (*k >= 100 && k % 100 == 0))
                .map(|(k, &xi)| XiRow { k, xi, deviation: xi - xr.target })
                .collect();
            report.xi_table = Some(XiTable { target: xr.target, first_within: xr.first_within, log_slope: xr.log_slope, rows });
        }
    }
    steps
}

fn oracle_name(o: &DescentOracle) -> &'static str {
    match o {
        DescentOracle::Rgd { .. } => "gradient",
        DescentOracle::Proximal { .. } => "proximal",
    }
}
