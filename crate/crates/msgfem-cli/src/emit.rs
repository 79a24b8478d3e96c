//! CSV tables and SVG line plots for study results.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// A table cell. Floats are written with `{:e}` (shortest round-trip form),
/// so re-emitting the same result is bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => if *b { "pass" } else { "fail" }.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// One evaluated post-condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, value: f64, threshold: f64, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value, threshold, pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyResult {
    pub study: String,
    pub config_hash: String,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub checks: Vec<Check>,
    /// `(phase, seconds)`.
    pub timings: Vec<(String, f64)>,
}

impl StudyResult {
    pub fn new(study: &str, config_hash: &str) -> Self {
        Self { study: study.into(), config_hash: config_hash.into(), ..Default::default() }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Pass/fail rows of every check, as a table.
    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "value", "threshold", "result", "detail"]);
        for c in &self.checks {
            t.push(vec![c.name.clone().into(), c.value.into(), c.threshold.into(), c.pass.into(), c.detail.clone().into()]);
        }
        t
    }

    /// Wall time per phase.
    pub fn timings_table(&self) -> Table {
        let mut t = Table::new("timings", &["phase", "seconds"]);
        for (phase, secs) in &self.timings {
            t.push(vec![phase.clone().into(), (*secs).into()]);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
}

impl std::str::FromStr for Formats {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut f = Formats { csv: false, svg: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                other => return Err(format!("unknown format '{other}' (expected csv, svg)")),
            }
        }
        if !f.csv && !f.svg {
            return Err("no output format selected".into());
        }
        Ok(f)
    }
}

/// CSV text with a `#` provenance header. Header-only when the table is empty.
pub fn csv_string(result: &StudyResult, table: &Table) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "# msgfem-csv v{SCHEMA_VERSION} study={} table={} config={} version={}",
        result.study,
        table.name,
        result.config_hash,
        env!("CARGO_PKG_VERSION")
    )
    .unwrap();
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&table.columns).unwrap();
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).unwrap();
    }
    s.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    s
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot with markers; the y axis is log₁₀ when `log_y` is set
/// (non-positive values are skipped).
pub fn svg_string(result: &StudyResult, plot: &Plot) -> String {
    let (w, h) = (720.0, 480.0);
    let (l, r, t, b) = (80.0, 170.0, 40.0, 60.0);
    let ty = |y: f64| if plot.log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = plot
        .series
        .iter()
        .map(|s| s.points.iter().filter(|p| !plot.log_y || p.1 > 0.0).map(|&(x, y)| (x, ty(y))).filter(|p| p.0.is_finite() && p.1.is_finite()).collect())
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |a, p| {
        (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1))
    });
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    if plot.log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, "<!-- msgfem-svg v{SCHEMA_VERSION} study={} plot={} config={} -->", result.study, plot.name, result.config_hash).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (w - r + l) / 2.0, escape(&plot.title)).unwrap();
    writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - l - r, h - t - b).unwrap();
    for x in nice_ticks(x0, x1) {
        writeln!(s, r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"##, px(x), t, h - b, h - b + 16.0, x).unwrap();
    }
    let yticks: Vec<f64> = if plot.log_y { (y0 as i64..=y1 as i64).map(|v| v as f64).collect() } else { nice_ticks(y0, y1) };
    for y in yticks {
        let label = if plot.log_y { format!("1e{}", y as i64) } else { format!("{y}") };
        writeln!(s, r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#ddd"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##, l, py(y), w - r, l - 6.0, py(y) + 4.0, label).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (w - r + l) / 2.0, h - 16.0, escape(&plot.x_label)).unwrap();
    writeln!(s, r#"<text transform="translate(20,{}) rotate(-90)" text-anchor="middle">{}</text>"#, (h - b + t) / 2.0, escape(&plot.y_label)).unwrap();
    for (i, (series, p)) in plot.series.iter().zip(&pts).enumerate() {
        let c = COLORS[i % COLORS.len()];
        if !p.is_empty() {
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
            for &(x, y) in p {
                writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#, px(x), py(y)).unwrap();
            }
        }
        let ly = t + 10.0 + 18.0 * i as f64;
        writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, w - r + 10.0, w - r + 30.0, w - r + 36.0, ly + 4.0, escape(&series.label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every table (plus the checks table) and plot into `dir`. File
/// names carry the study, the item name and the config hash, so outputs of
/// distinct configurations never collide. Returns the written paths.
pub fn emit(result: &StudyResult, dir: &Path, formats: Formats) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> io::Result<()> {
        let path = dir.join(name);
        let tmp = path.with_extension("part");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        written.push(path);
        Ok(())
    };
    if formats.csv {
        let extra = [result.checks_table(), result.timings_table()];
        for table in result.tables.iter().chain(&extra) {
            put(format!("{}-{}-{}.csv", result.study, table.name, result.config_hash), csv_string(result, table))?;
        }
    }
    if formats.svg {
        for plot in &result.plots {
            put(format!("{}-{}-{}.svg", result.study, plot.name, result.config_hash), svg_string(result, plot))?;
        }
    }
    Ok(written)
}
