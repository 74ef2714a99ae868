//! Result rendering: CSV (the stable machine format) and its JSON-lines
//! mirror with identical field names.
//!
//! Record rows:  `kind,N,W,run,seed,capacity,log2_Z,wall_clock_s`
//! Summary rows: `summary,N,W,runs,mean,stderr,mse,mean_wall_clock_s`
//! Exact rows:   `kind,rows,cols,method,capacity,log2_Z`
//!
//! Floats are printed with Rust's shortest round-trip formatting, so equal
//! values render identically across runs and thread counts.

use serde::Serialize;

use crate::bench::{BenchOutput, BenchRecord, BenchSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

/// Header for estimator result rows (estimate output and bench records).
pub const RESULT_HEADER: &str = "kind,N,W,run,seed,capacity,log2_Z,wall_clock_s";
/// Header for exact-computation rows.
pub const EXACT_HEADER: &str = "kind,rows,cols,method,capacity,log2_Z";

#[derive(Debug, Serialize)]
pub struct ResultRow {
    pub kind: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub run: usize,
    pub seed: u64,
    pub capacity: f64,
    #[serde(rename = "log2_Z")]
    pub log2_z: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub kind: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub runs: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mse: f64,
    pub mean_wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
pub struct ExactRow {
    pub kind: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub method: String,
    pub capacity: f64,
    #[serde(rename = "log2_Z")]
    pub log2_z: f64,
}

impl ResultRow {
    pub fn from_record(r: &BenchRecord) -> Self {
        Self {
            kind: "record",
            n: r.n_particles,
            w: r.strip_width,
            run: r.run,
            seed: r.seed,
            capacity: r.capacity,
            log2_z: r.log2_z,
            wall_clock_s: r.wall_clock_s,
        }
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kind, self.n, self.w, self.run, self.seed, self.capacity, self.log2_z,
            self.wall_clock_s
        )
    }
}

impl SummaryRow {
    fn from_summary(s: &BenchSummary) -> Self {
        Self {
            kind: "summary",
            n: s.n_particles,
            w: s.strip_width,
            runs: s.runs,
            mean: s.mean,
            stderr: s.stderr,
            mse: s.mse,
            mean_wall_clock_s: s.mean_wall_clock_s,
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kind, self.n, self.w, self.runs, self.mean, self.stderr, self.mse,
            self.mean_wall_clock_s
        )
    }
}

impl ExactRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.kind, self.rows, self.cols, self.method, self.capacity, self.log2_z
        )
    }
}

fn json_line<T: Serialize>(row: &T) -> String {
    serde_json::to_string(row).expect("rows serialize")
}

/// Renders estimator result rows (one per run).
pub fn render_results(rows: &[ResultRow], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(RESULT_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&row.csv());
                out.push('\n');
            }
        }
        Format::JsonLines => {
            for row in rows {
                out.push_str(&json_line(row));
                out.push('\n');
            }
        }
    }
    out
}

/// Renders a full benchmark: records first, then summaries.
pub fn render_bench(output: &BenchOutput, format: Format) -> String {
    let records: Vec<ResultRow> = output.records.iter().map(ResultRow::from_record).collect();
    let summaries: Vec<SummaryRow> = output
        .summaries
        .iter()
        .map(SummaryRow::from_summary)
        .collect();
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(RESULT_HEADER);
            out.push('\n');
            for row in &records {
                out.push_str(&row.csv());
                out.push('\n');
            }
            for row in &summaries {
                out.push_str(&row.csv());
                out.push('\n');
            }
        }
        Format::JsonLines => {
            for row in &records {
                out.push_str(&json_line(row));
                out.push('\n');
            }
            for row in &summaries {
                out.push_str(&json_line(row));
                out.push('\n');
            }
        }
    }
    out
}

/// Summary lines only, for echoing to standard output.
pub fn summary_lines(output: &BenchOutput) -> String {
    let mut out = String::new();
    for s in &output.summaries {
        out.push_str(&SummaryRow::from_summary(s).csv());
        out.push('\n');
    }
    out
}

/// Renders one exact-computation row.
pub fn render_exact(row: &ExactRow, format: Format) -> String {
    match format {
        Format::Csv => format!("{EXACT_HEADER}\n{}\n", row.csv()),
        Format::JsonLines => format!("{}\n", json_line(row)),
    }
}
