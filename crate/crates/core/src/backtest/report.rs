//! Metric tables: one per metric, methods by objective, winner in bold and
//! runner-up in italic.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{BacktestReport, ObjectiveKind};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Sr,
    Return,
    Variance,
    Turnover,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Sr,
        Metric::Return,
        Metric::Variance,
        Metric::Turnover,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Metric::Sr => "sr",
            Metric::Return => "return",
            Metric::Variance => "variance",
            Metric::Turnover => "turnover",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Metric::Sr => "SR",
            Metric::Return => "Return",
            Metric::Variance => "Variance",
            Metric::Turnover => "Turnover",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Sr => "Out-of-sample Sharpe ratio",
            Metric::Return => "Out-of-sample mean net return",
            Metric::Variance => "Out-of-sample variance of net returns",
            Metric::Turnover => "Average turnover",
        }
    }

    /// Larger is better for SR and return, smaller for variance and turnover.
    pub fn maximize(self) -> bool {
        matches!(self, Metric::Sr | Metric::Return)
    }

    fn of(self, report: &BacktestReport) -> Option<f64> {
        report.aggregates.map(|a| match self {
            Metric::Sr => a.sharpe,
            Metric::Return => a.mean_net,
            Metric::Variance => a.variance_net,
            Metric::Turnover => a.mean_turnover,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emphasis {
    Plain,
    Bold,
    Italic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    /// One entry per table column; `None` marks a failed cell.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: Metric,
    pub columns: Vec<ObjectiveKind>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportHeader {
    pub run_id: String,
    pub window_len: usize,
    pub cost: f64,
    pub rho1: f64,
    pub sigma: f64,
}

/// Four decimals, with negative zero printed as zero.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

impl MetricTable {
    pub fn new(metric: Metric, columns: Vec<ObjectiveKind>, rows: Vec<TableRow>) -> Self {
        Self {
            metric,
            columns,
            rows,
        }
    }

    /// Rows in first-seen label order, all three objective columns; objectives
    /// without a report stay empty. A benchmark report fills every column.
    pub fn from_reports(
        metric: Metric,
        reports: &[BacktestReport],
        benchmark: Option<&BacktestReport>,
    ) -> Self {
        let columns = ObjectiveKind::ALL.to_vec();
        let mut rows: Vec<TableRow> = Vec::new();
        for r in reports {
            let idx = match rows.iter().position(|row| row.label == r.label) {
                Some(i) => i,
                None => {
                    rows.push(TableRow {
                        label: r.label.clone(),
                        cells: vec![None; columns.len()],
                    });
                    rows.len() - 1
                }
            };
            if let Some(col) = r
                .objective
                .and_then(|o| columns.iter().position(|&c| c == o))
            {
                rows[idx].cells[col] = metric.of(r);
            }
        }
        if let Some(b) = benchmark {
            rows.push(TableRow {
                label: b.label.clone(),
                cells: vec![metric.of(b); columns.len()],
            });
        }
        Self {
            metric,
            columns,
            rows,
        }
    }

    /// Emphasis per cell. Ranking is over the whole table on the printed
    /// four-decimal values; ties share the mark.
    pub fn emphasis(&self) -> Vec<Vec<Emphasis>> {
        let rounded = |v: f64| {
            format_value(v)
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
        };
        let mut distinct: Vec<f64> = self
            .rows
            .iter()
            .flat_map(|r| r.cells.iter().flatten().copied().filter_map(rounded))
            .collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if self.metric.maximize() {
            distinct.reverse();
        }
        let best = distinct.first().copied();
        let second = distinct.get(1).copied();
        self.rows
            .iter()
            .map(|r| {
                r.cells
                    .iter()
                    .map(|c| match c.and_then(rounded) {
                        Some(v) if Some(v) == best => Emphasis::Bold,
                        Some(v) if Some(v) == second => Emphasis::Italic,
                        _ => Emphasis::Plain,
                    })
                    .collect()
            })
            .collect()
    }
}

fn cell_text(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_else(|| "NA".into())
}

/// Aligned plain text; `**x**` marks the winner and `*x*` the runner-up.
pub fn render_text(table: &MetricTable, header: &ReportHeader) -> String {
    let marks = table.emphasis();
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .zip(&marks)
        .map(|(row, m)| {
            row.cells
                .iter()
                .zip(m)
                .map(|(&v, e)| {
                    let s = cell_text(v);
                    match e {
                        Emphasis::Bold => format!("**{s}**"),
                        Emphasis::Italic => format!("*{s}*"),
                        Emphasis::Plain => s,
                    }
                })
                .collect()
        })
        .collect();
    let label_w = table
        .rows
        .iter()
        .map(|r| r.label.len())
        .chain([6])
        .max()
        .unwrap();
    let cell_w = cells
        .iter()
        .flatten()
        .map(String::len)
        .chain([8])
        .max()
        .unwrap();

    let mut out = String::new();
    let _ = writeln!(out, "# {}", table.metric.title());
    let _ = writeln!(
        out,
        "# run={} T_I={} cost={} rho1={} sigma={}",
        header.run_id, header.window_len, header.cost, header.rho1, header.sigma
    );
    let _ = write!(out, "{:<label_w$}", "method");
    for c in &table.columns {
        let _ = write!(out, "  {:>cell_w$}", c.label());
    }
    out.push('\n');
    for (row, cs) in table.rows.iter().zip(&cells) {
        let _ = write!(out, "{:<label_w$}", row.label);
        for c in cs {
            let _ = write!(out, "  {c:>cell_w$}");
        }
        out.push('\n');
    }
    out
}

/// `method,GMV,MSR,MV` with unmarked values; failed cells are `NA`.
pub fn render_csv(table: &MetricTable) -> String {
    let mut out = String::from("method");
    for c in &table.columns {
        out.push(',');
        out.push_str(c.label());
    }
    out.push('\n');
    for row in &table.rows {
        let label = if row.label.contains([',', '"']) {
            format!("\"{}\"", row.label.replace('"', "\"\""))
        } else {
            row.label.clone()
        };
        out.push_str(&label);
        for &v in &row.cells {
            out.push(',');
            out.push_str(&cell_text(v));
        }
        out.push('\n');
    }
    out
}

/// Tabular body rows: `Label & {\bf x} & {\it y} & z \\`.
pub fn render_latex(table: &MetricTable) -> String {
    let marks = table.emphasis();
    let mut out = String::from("Method");
    for c in &table.columns {
        let _ = write!(out, " & {}-{}", c.label(), table.metric.short());
    }
    out.push_str(" \\\\\n");
    for (row, m) in table.rows.iter().zip(&marks) {
        out.push_str(&row.label.replace('&', "\\&"));
        for (&v, e) in row.cells.iter().zip(m) {
            let s = cell_text(v);
            match e {
                Emphasis::Bold => write!(out, " & {{\\bf {s}}}"),
                Emphasis::Italic => write!(out, " & {{\\it {s}}}"),
                Emphasis::Plain => write!(out, " & {s}"),
            }
            .unwrap();
        }
        out.push_str(" \\\\\n");
    }
    out
}

/// Write `<run_id>_<metric>.csv` and `.txt` for every metric into `dir`.
pub fn write_tables(
    dir: &Path,
    header: &ReportHeader,
    reports: &[BacktestReport],
    benchmark: Option<&BacktestReport>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for metric in Metric::ALL {
        let table = MetricTable::from_reports(metric, reports, benchmark);
        let stem = format!("{}_{}", header.run_id, metric.slug());
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, render_csv(&table))?;
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&txt, render_text(&table, header))?;
        written.push(csv);
        written.push(txt);
    }
    Ok(written)
}
