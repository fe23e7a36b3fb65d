//! Run reports and file artifacts: CSV tables and binary P6 heatmaps.

use std::fmt::{self, Display, Write as _};

/// Named output files, in creation order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

/// Minimal CSV writer with a fixed header. Numbers use the shortest round-trip form.
#[derive(Clone, Debug)]
pub struct Csv {
    text: String,
    columns: usize,
}

/// One CSV cell; `Empty` writes nothing between the separators.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        let line: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Header of the time-series files.
pub const SERIES_HEADER: [&str; 5] = ["t", "fidelity", "<y2>", "P_left", "P_right"];

/// Blue -> cyan -> green -> yellow -> red, linear between the five stops at 0, 1/4, 1/2,
/// 3/4, 1. Values outside [0, 1] are clamped; NaN maps to blue.
pub fn colormap(s: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 255.0],
        [0.0, 255.0, 255.0],
        [0.0, 255.0, 0.0],
        [255.0, 255.0, 0.0],
        [255.0, 0.0, 0.0],
    ];
    let s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
    let x = s * 4.0;
    let k = (x.floor() as usize).min(3);
    let f = x - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (STOPS[k][c] + (STOPS[k + 1][c] - STOPS[k][c]) * f).round() as u8;
    }
    out
}

/// Binary P6 image of `values` (row-major, row 0 at the top), colour-scaled over [0, max].
pub fn heatmap_ppm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "heatmap size");
    let max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * values.len());
    for &v in values {
        let s = if max > 0.0 { v / max } else { 0.0 };
        out.extend_from_slice(&colormap(s));
    }
    out
}

/// One checked property of a run: measured against expected.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
}

/// Everything a run reports: ordered metrics, checks, gate counts, notes and files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub metrics: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub gate_counts: Vec<(String, usize)>,
    pub notes: Vec<String>,
    pub artifacts: Artifacts,
}

impl RunReport {
    pub fn metric(&mut self, key: impl Into<String>, value: impl Display) {
        self.metrics.push((key.into(), value.to_string()));
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        measured: impl Display,
        expected: impl Into<String>,
        pass: bool,
    ) {
        self.checks.push(Check {
            name: name.into(),
            measured: measured.to_string(),
            expected: expected.into(),
            pass,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn gates(&mut self, name: impl Into<String>, count: usize) {
        self.gate_counts.push((name.into(), count));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Plain-text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}: {v}");
        }
        if !self.gate_counts.is_empty() {
            let _ = writeln!(s, "gate counts:");
            for (k, v) in &self.gate_counts {
                let _ = writeln!(s, "  {k:<28} {v}");
            }
        }
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{tag} {}: measured {} (expected {})",
                c.name, c.measured, c.expected
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}
