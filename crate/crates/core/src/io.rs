//! Plain-text problem files, JSON reports and CSV matrices.
//!
//! Measures are one number per line (`p/q` fractions accepted); matrices are
//! comma-separated rows. Every number written by this module carries at
//! most 12 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{AotError, Result};
use crate::measures::{check_problem_shape, CostMatrix, DiscreteMeasure, SolveReport, TransportPlan};

/// Significant digits kept by every writer in this module.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`]; non-finite values pass through.
pub fn round_sig(value: f64) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, value)
        .parse()
        .expect("formatted float parses")
}

/// Shortest round-trip text for `round_sig(value)`: integers without a
/// fraction, exponent form for very large or small magnitudes.
pub fn format_number(value: f64) -> String {
    let r = round_sig(value);
    if r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{r:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemFile {
    pub mu: PathBuf,
    pub nu: PathBuf,
    pub cost: PathBuf,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AotError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| AotError::io(path, e))
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> AotError {
    AotError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// A finite decimal or a `p/q` fraction.
fn parse_number(token: &str) -> Option<f64> {
    let token = token.trim();
    let value = match token.split_once('/') {
        Some((p, q)) => {
            let q: f64 = q.trim().parse().ok()?;
            if q == 0.0 {
                return None;
            }
            p.trim().parse::<f64>().ok()? / q
        }
        None => token.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

/// One weight per nonblank line.
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = read_text(path)?;
    let mut weights = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let column = line.len() - line.trim_start().len() + 1;
        let w = parse_number(trimmed)
            .ok_or_else(|| parse_error(path, k + 1, column, format!("expected a number, found {trimmed:?}")))?;
        weights.push(w);
    }
    if weights.is_empty() {
        return Err(parse_error(path, 1, 1, "empty measure file"));
    }
    DiscreteMeasure::new(weights)
}

/// Comma-separated numeric rows; `skip_header` drops the first record.
/// Error columns are 1-based field indices.
fn read_matrix(path: &Path, skip_header: bool) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(1, |p| p.line() as usize);
            parse_error(path, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_error(
                path,
                line,
                expected.min(record.len()) + 1,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let v = parse_number(field)
                .ok_or_else(|| parse_error(path, line, col + 1, format!("expected a number, found {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_error(path, 1, 1, "empty matrix file"))?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

pub fn read_cost(path: &Path) -> Result<CostMatrix> {
    CostMatrix::new(read_matrix(path, false)?)
}

/// Reads a plan written by [`write_plan`] (header row skipped).
pub fn read_plan(path: &Path) -> Result<TransportPlan> {
    TransportPlan::new(read_matrix(path, true)?)
}

pub fn load_problem(files: &ProblemFile) -> Result<(DiscreteMeasure, DiscreteMeasure, CostMatrix)> {
    let mu = read_measure(&files.mu)?;
    let nu = read_measure(&files.nu)?;
    let cost = read_cost(&files.cost)?;
    check_problem_shape(&mu, &nu, &cost)?;
    Ok((mu, nu, cost))
}

pub fn write_measure(measure: &DiscreteMeasure, path: &Path) -> Result<()> {
    let text: String = measure.weights().iter().map(|&w| format_number(w) + "\n").collect();
    write_text(path, &text)
}

fn matrix_csv(matrix: ArrayView2<f64>, header: Option<&[usize]>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| AotError::Validation(format!("csv encoding failed: {e}"));
    if let Some(ids) = header {
        writer.write_record(ids.iter().map(|id| id.to_string())).map_err(csv_err)?;
    }
    for row in matrix.rows() {
        writer.write_record(row.iter().map(|&v| format_number(v))).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| AotError::Validation(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn write_cost(cost: &CostMatrix, path: &Path) -> Result<()> {
    write_text(path, &matrix_csv(cost.entries().view(), None)?)
}

/// Plan CSV with a header of 1-based column ids.
pub fn write_plan(plan: &TransportPlan, path: &Path) -> Result<()> {
    export_heatmap(plan.mass().view(), path, &HeatmapOrder::Input)
}

/// Row and column order of an exported matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeatmapOrder {
    Input,
    /// Stable sort of rows and columns by class label.
    LabelSorted { row_labels: Vec<usize>, col_labels: Vec<usize> },
}

fn sorted_by_label(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    order
}

/// Writes the matrix as CSV under a header of 1-based column ids, in the
/// requested order.
pub fn export_heatmap(matrix: ArrayView2<f64>, path: &Path, order: &HeatmapOrder) -> Result<()> {
    let (n, m) = matrix.dim();
    let (rows, cols) = match order {
        HeatmapOrder::Input => ((0..n).collect(), (0..m).collect()),
        HeatmapOrder::LabelSorted { row_labels, col_labels } => {
            if row_labels.len() != n || col_labels.len() != m {
                return Err(AotError::Shape(format!(
                    "{} row labels and {} column labels for a {n}x{m} matrix",
                    row_labels.len(),
                    col_labels.len()
                )));
            }
            (sorted_by_label(row_labels), sorted_by_label(col_labels))
        }
    };
    let permuted = Array2::from_shape_fn((n, m), |(i, j)| matrix[[rows[i], cols[j]]]);
    let ids: Vec<usize> = cols.iter().map(|j| j + 1).collect();
    write_text(path, &matrix_csv(permuted.view(), Some(&ids))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AotExact,
    AotSinkhorn,
    Ot,
    Pot,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AotExact => "aot-exact",
            Method::AotSinkhorn => "aot-sinkhorn",
            Method::Ot => "ot",
            Method::Pot => "pot",
        }
    }
}

/// JSON summary of one solve. Index lists are 1-based; numbers are rounded
/// to 12 significant digits when the document is built, so writing and
/// reading it back is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub method: Method,
    pub objective: f64,
    pub mass: f64,
    pub saturated_rows: Vec<usize>,
    pub saturated_cols: Vec<usize>,
    pub duality_gap: Option<f64>,
    pub iterations: usize,
    /// `None` when the method makes no mass-allocation claim.
    pub theorem1_passed: Option<bool>,
    pub active_rows: Vec<usize>,
    pub active_cols: Vec<usize>,
    /// Solver parameters echoed back.
    pub params: BTreeMap<String, f64>,
}

impl ReportDocument {
    pub fn new(
        method: Method,
        report: &SolveReport,
        theorem1_passed: Option<bool>,
        active: (&[usize], &[usize]),
        params: BTreeMap<String, f64>,
    ) -> Self {
        let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect();
        Self {
            method,
            objective: round_sig(report.objective()),
            mass: round_sig(report.mass()),
            saturated_rows: one_based(&report.summary.saturated_rows),
            saturated_cols: one_based(&report.summary.saturated_cols),
            duality_gap: report.duality_gap.filter(|g| g.is_finite()).map(round_sig),
            iterations: report.iterations,
            theorem1_passed,
            active_rows: one_based(active.0),
            active_cols: one_based(active.1),
            params: params.into_iter().map(|(k, v)| (k, round_sig(v))).collect(),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| AotError::Validation(format!("cannot encode {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

pub fn write_report(report: &ReportDocument, path: &Path) -> Result<()> {
    write_json(report, path)
}

fn json_error(path: &Path, e: serde_json::Error) -> AotError {
    parse_error(path, e.line().max(1), e.column().max(1), e.to_string())
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    serde_json::from_str(&read_text(path)?).map_err(|e| json_error(path, e))
}

/// Deserializes any JSON document, mapping syntax and schema errors to
/// [`AotError::Parse`].
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| json_error(path, e))
}

/// CSV text of a table with a header row; numbers get 12 significant digits.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| AotError::Validation(format!("csv encoding failed: {e}"));
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row.iter().map(|&v| format_number(v))).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| AotError::Validation(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_text(path, &table_csv(header, rows)?)
}
