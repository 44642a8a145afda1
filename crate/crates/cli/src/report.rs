//! Emitted artifacts: JSON reports, the series CSV and the sweep table.
//!
//! Every float in CSV is written with 17 significant digits; JSON uses the
//! shortest representation that re-parses to the same bits. Both are
//! byte-stable for identical inputs.

use decoq_core::entropy::FdEstimate;
use decoq_core::evolution::TdEstimate;
use decoq_core::models::LimitResult;
use decoq_core::{EntropySeries, Td, TdResult};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Report {
    Td(TdReport),
    Series(SeriesReport),
    Validate(ValidateReport),
    Sweep(SweepReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub strong: LimitResult,
    pub weak: LimitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdReport {
    pub model: String,
    pub model_hash: String,
    pub closed_form: TdResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub model: String,
    pub estimate: TdEstimate,
    pub series: EntropySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differences {
    pub direct_eq3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_fd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq3_fd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub model: String,
    pub model_hash: String,
    pub step: f64,
    pub s2_direct: f64,
    pub s2_eq3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_order2: Option<FdEstimate>,
    /// Unchecked third-derivative estimate, informative when `s2` vanishes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_order3: Option<FdEstimate>,
    pub relative_differences: Differences,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub advice: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub model_hash: String,
    pub td_full: Td,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_strong: Option<Td>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_weak: Option<Td>,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Slopes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_full: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_strong: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_weak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: String,
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    /// Log-log slopes of each t_d column against the parameter.
    pub slopes: Slopes,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const SERIES_HEADER: &str = "t,entropy";
pub const SWEEP_HEADER: &str = "parameter,td_full,td_strong,td_weak,s2";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn td_cell(td: Option<Td>) -> String {
    match td {
        Some(Td::Finite(t)) => num(t),
        Some(Td::Unbounded) => "UNBOUNDED".into(),
        None => String::new(),
    }
}

pub fn series_csv(series: &EntropySeries) -> String {
    let mut out = String::with_capacity(40 * (series.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for (t, s) in series.times.iter().zip(&series.values) {
        let _ = writeln!(out, "{},{}", num(*t), num(*s));
    }
    out
}

/// Parse a `t,entropy` table back into `(times, values)`.
pub fn parse_series_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), ParseError> {
    let mut lines = text.split('\n');
    let bad = |line: usize, msg: String| ParseError::Csv { line, msg };
    match lines.next() {
        Some(SERIES_HEADER) => {}
        Some(h) => return Err(bad(1, format!("expected header {SERIES_HEADER:?}, found {h:?}"))),
        None => return Err(bad(1, "empty input".into())),
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let (t, s) = line.split_once(',').ok_or_else(|| bad(line_no, "expected two columns".into()))?;
        let parse = |field: &str| -> Result<f64, ParseError> {
            let x: f64 = field.parse().map_err(|_| bad(line_no, format!("not a number: {field:?}")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(bad(line_no, format!("non-finite value {field:?}")))
            }
        };
        times.push(parse(t)?);
        values.push(parse(s)?);
    }
    Ok((times, values))
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.parameter),
            td_cell(Some(r.td_full)),
            td_cell(r.td_strong),
            td_cell(r.td_weak),
            num(r.s2)
        );
    }
    out
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn parse_report(text: &str) -> Result<Report, ParseError> {
    Ok(serde_json::from_str(text)?)
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless there are at
/// least two points and every coordinate is positive and finite.
pub fn loglog_slope(points: &[(f64, Option<f64>)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let y = y?;
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return None;
        }
        logs.push((x.ln(), y.ln()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
