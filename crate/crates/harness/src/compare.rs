//! Side-by-side comparison of traces on the same objective and start.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::trace::Trace;

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub k: usize,
    pub gaps: Vec<Option<f64>>,
    pub bounds: Vec<Option<f64>>,
    /// `gap_i − gap_0`; the first entry is always zero when present.
    pub diffs: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<CompareRow>,
    /// For every trace after the first: smallest `k` from which its gap stays
    /// strictly below the first trace's gap over the common range.
    pub crossovers: Vec<Option<usize>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompareError {
    #[error("nothing to compare")]
    Empty,
    #[error("{label} optimizes objective {found}, expected {expected}")]
    ObjectiveMismatch { label: String, expected: String, found: String },
    #[error("{label} starts from a different x0")]
    StartMismatch { label: String },
}

fn labels(traces: &[Trace]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let base = format!("{}:{}", t.header.name, t.header.algorithm);
        let label = if out.contains(&base) { format!("{base}#{i}") } else { base };
        out.push(label);
    }
    out
}

pub fn compare(traces: &[Trace]) -> Result<Comparison, CompareError> {
    let first = traces.first().ok_or(CompareError::Empty)?;
    let labels = labels(traces);
    for (t, label) in traces.iter().zip(&labels).skip(1) {
        if t.header.objective_id != first.header.objective_id {
            return Err(CompareError::ObjectiveMismatch {
                label: label.clone(),
                expected: first.header.objective_id.clone(),
                found: t.header.objective_id.clone(),
            });
        }
        if t.header.x0 != first.header.x0 {
            return Err(CompareError::StartMismatch { label: label.clone() });
        }
    }
    let len = traces.iter().map(|t| t.steps.len()).max().unwrap_or(0);
    let rows = (0..len)
        .map(|k| {
            let gaps: Vec<Option<f64>> = traces.iter().map(|t| t.steps.get(k).map(|s| s.gap)).collect();
            let bounds = traces.iter().map(|t| t.steps.get(k).and_then(|s| s.bound)).collect();
            let diffs = gaps.iter().map(|g| Some(g.as_ref()? - gaps[0]?)).collect();
            CompareRow { k, gaps, bounds, diffs }
        })
        .collect();

    let crossovers = traces
        .iter()
        .skip(1)
        .map(|t| {
            let n = t.steps.len().min(first.steps.len());
            let mut from = None;
            for k in (0..n).rev() {
                if t.steps[k].gap < first.steps[k].gap {
                    from = Some(k);
                } else {
                    break;
                }
            }
            from
        })
        .collect();
    Ok(Comparison { labels, rows, crossovers })
}

fn cell(x: Option<f64>) -> String {
    x.map_or(String::new(), |x| format!("{x:e}"))
}

pub fn to_csv(c: &Comparison) -> String {
    let mut out = String::from("k");
    for l in &c.labels {
        let _ = write!(out, ",gap[{l}],bound[{l}],diff[{l}]");
    }
    out.push('\n');
    for r in &c.rows {
        out.push_str(&r.k.to_string());
        for i in 0..c.labels.len() {
            let _ = write!(out, ",{},{},{}", cell(r.gaps[i]), cell(r.bounds[i]), cell(r.diffs[i]));
        }
        out.push('\n');
    }
    out
}

/// Rows at `k = 0..10`, then `20, 50, 100, 200, 500, ...`, and the last row.
fn shown(k: usize, last: usize) -> bool {
    if k <= 10 || k == last {
        return true;
    }
    let mut m = 10;
    while m <= k {
        if k == 2 * m || k == 5 * m || k == 10 * m {
            return true;
        }
        m *= 10;
    }
    false
}

pub fn to_text(c: &Comparison) -> String {
    let mut out = String::new();
    let w = 14;
    let _ = write!(out, "{:>6}", "k");
    for l in &c.labels {
        let _ = write!(out, "  {:>w$}", truncate(l, w));
    }
    out.push('\n');
    let last = c.rows.len().saturating_sub(1);
    for r in c.rows.iter().filter(|r| shown(r.k, last)) {
        let _ = write!(out, "{:>6}", r.k);
        for g in &r.gaps {
            let _ = write!(out, "  {:>w$}", g.map_or("-".into(), |g| format!("{g:.6e}")));
        }
        out.push('\n');
    }
    for (l, x) in c.labels.iter().skip(1).zip(&c.crossovers) {
        match x {
            Some(k) => {
                let _ = writeln!(out, "{l} stays below {} from k = {k}", c.labels[0]);
            }
            None => {
                let _ = writeln!(out, "{l} does not stay below {}", c.labels[0]);
            }
        }
    }
    out
}

fn truncate(s: &str, w: usize) -> &str {
    match s.char_indices().nth(w) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Whitespace-separated `k gap` lines for gnuplot.
pub fn plot_data(t: &Trace) -> String {
    let mut out = format!("# {} {}\n# k gap\n", t.header.name, t.header.algorithm);
    for s in &t.steps {
        let _ = writeln!(out, "{} {:e}", s.k, s.gap);
    }
    out
}

/// Writes one `<label>.dat` file per trace into `dir`.
pub fn write_plot_files(traces: &[Trace], dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    labels(traces)
        .iter()
        .zip(traces)
        .map(|(l, t)| {
            let name: String = l.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
            let p = dir.join(format!("{name}.dat"));
            std::fs::write(&p, plot_data(t))?;
            Ok(p)
        })
        .collect()
}
