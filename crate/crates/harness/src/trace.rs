//! JSON-lines traces. The first line is a header; every later line is one
//! iterate. Each line is flushed as soon as it is written, so a trace cut at
//! any line boundary still parses.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: u32,
    pub name: String,
    /// Hash of the manifold and objective sections; traces with equal ids
    /// optimize the same function.
    pub objective_id: String,
    pub objective: String,
    pub algorithm: String,
    pub x0: Vec<f64>,
    pub f_star: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Ambient coordinates of the tracked iterate (`y_k` for accelerated runs).
    pub coords: Vec<f64>,
    pub f: f64,
    pub gap: f64,
    pub grad_norm: f64,
    /// Certificate slack of the step that produced this iterate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    /// Gap bound in force at `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_xy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_xz: Option<f64>,
    /// `√(∏(1−ξ_j)·D₀)` on strongly convex accelerated runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Header(TraceHeader),
    Step(StepRecord),
}

/// Maps non-finite values to `None`; JSON has no NaN.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path, header: &TraceHeader) -> io::Result<Self> {
        let mut w = TraceWriter { out: BufWriter::new(File::create(path)?) };
        w.line(&TraceLine::Header(header.clone()))?;
        Ok(w)
    }

    pub fn step(&mut self, rec: &StepRecord) -> io::Result<()> {
        self.line(&TraceLine::Step(rec.clone()))
    }

    fn line(&mut self, line: &TraceLine) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    /// True when the final line was cut off and dropped.
    pub truncated: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace has no header line")]
    MissingHeader,
}

/// Reads a trace, tolerating an unterminated last line.
pub fn read_trace(path: &Path) -> Result<Trace, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut steps = Vec::new();
    let mut truncated = false;
    let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
    let n = lines.len();
    for (i, text) in lines.iter().enumerate() {
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceLine>(text) {
            Ok(TraceLine::Header(h)) if i == 0 => header = Some(h),
            Ok(TraceLine::Header(_)) => {
                return Err(TraceError::Malformed { line: i + 1, message: "second header".into() })
            }
            Ok(TraceLine::Step(s)) => steps.push(s),
            Err(_) if i + 1 == n => truncated = true,
            Err(e) => return Err(TraceError::Malformed { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(Trace { header: header.ok_or(TraceError::MissingHeader)?, steps, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_fields_are_omitted() {
        let rec = StepRecord { k: 3, coords: vec![1.0], f: 2.0, gap: 1.0, grad_norm: 0.5, ..Default::default() };
        let s = serde_json::to_string(&TraceLine::Step(rec)).unwrap();
        assert_eq!(s, r#"{"type":"step","k":3,"coords":[1.0],"f":2.0,"gap":1.0,"grad_norm":0.5}"#);
    }

    #[test]
    fn energy_fields_use_capitals() {
        let rec = StepRecord { a: Some(1.0), b: Some(2.0), e: Some(3.0), ..Default::default() };
        let s = serde_json::to_string(&rec).unwrap();
        assert!(s.contains(r#""A":1.0"#) && s.contains(r#""B":2.0"#) && s.contains(r#""E":3.0"#));
    }

    #[test]
    fn non_finite_values_are_dropped() {
        assert_eq!(finite(f64::NAN), None);
        assert_eq!(finite(f64::INFINITY), None);
        assert_eq!(finite(1.5), Some(1.5));
    }
}
