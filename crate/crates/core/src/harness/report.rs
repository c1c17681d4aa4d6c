//! Aggregated results and their CSV / markdown rendering.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::model::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Mse,
    Acc,
    Precision,
    Recall,
    Selected,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Acc => "acc",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Selected => "selected",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Star {
    None,
    One,
    Two,
}

impl Star {
    /// `**` below 0.01, `*` below 0.05.
    pub fn from_p_value(p: f64) -> Self {
        if p < 0.01 {
            Star::Two
        } else if p < 0.05 {
            Star::One
        } else {
            Star::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Star::None => "",
            Star::One => "*",
            Star::Two => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::BadConfig(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    /// Repetitions contributing to `mean`.
    pub count: usize,
    /// Paired test against the statistical lasso; `None` on its own rows, when
    /// it was not run, or when the test is undefined.
    pub p_value: Option<f64>,
    pub star: Star,
}

/// One repetition that failed for one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    /// `key=value` echo of the configuration that produced the table.
    pub config: Vec<(String, String)>,
    pub base_seed: u64,
    pub failures: Vec<FailureRecord>,
    /// Not rendered, so reports stay byte-identical across runs.
    pub wall_clock: Duration,
}

impl ReportTable {
    pub fn empty() -> Self {
        Self {
            rows: Vec::new(),
            config: Vec::new(),
            base_seed: 0,
            failures: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    pub fn row(&self, method: Method, metric: Metric) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.metric == metric)
    }
}

pub const CSV_HEADER: &str = "method,metric,mean,sd,p_value,star";

fn fixed(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "NA".to_string()
    }
}

pub fn render_csv(table: &ReportTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let p = r.p_value.map(|p| fixed(p, 4)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.metric,
            fixed(r.mean, 3),
            fixed(r.sd, 3),
            p,
            r.star.as_str()
        );
    }
    out
}

/// One table per metric, methods in row order, `mean (sd)` cells.
pub fn render_markdown(table: &ReportTable) -> String {
    let mut metrics: Vec<Metric> = Vec::new();
    for r in &table.rows {
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    let mut out = String::new();
    for (i, metric) in metrics.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {metric}\n");
        out.push_str("| method | mean (sd) | p-value |\n|---|---|---|\n");
        for r in table.rows.iter().filter(|r| r.metric == *metric) {
            let p = r.p_value.map(|p| fixed(p, 4)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "| {} | {}{} ({}) | {} |",
                r.method,
                fixed(r.mean, 3),
                r.star.as_str(),
                fixed(r.sd, 3),
                p
            );
        }
    }
    out
}

pub fn render(table: &ReportTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(table),
        ReportFormat::Markdown => render_markdown(table),
    }
}

pub fn write_report(table: &ReportTable, path: &Path, format: ReportFormat) -> Result<()> {
    std::fs::write(path, render(table, format))?;
    Ok(())
}

/// `rep,seed,method,error`, one line per failure.
pub fn render_failure_log(failures: &[FailureRecord]) -> String {
    let mut out = String::from("rep,seed,method,error\n");
    for f in failures {
        let msg = f.error.replace(['\n', ','], " ");
        let _ = writeln!(out, "{},{},{},{}", f.rep, f.seed, f.method, msg);
    }
    out
}
