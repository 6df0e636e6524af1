//! Power/type-I result tables as header-first CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::atomic::{read_bytes, write_atomic};
use crate::actgraph::NormKind;
use crate::error::{Error, Result};
use crate::shifts::{Intensity, ShiftKind};
use crate::stats::{PowerMode, PowerReport};

pub const REPORT_COLUMNS: [&str; 12] = [
    "feature_kind",
    "layer",
    "norm",
    "shift_kind",
    "intensity",
    "delta",
    "sample_size",
    "repetitions",
    "mode",
    "estimate",
    "ci_half_width",
    "seed",
];

/// Minimum significant digits written for floating-point columns.
pub const MIN_SIGNIFICANT_DIGITS: usize = 6;

/// One estimated rejection rate. `layer` and `norm` are empty for
/// confidence-vector features; `intensity` is empty for shifts given by
/// explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub feature_kind: String,
    pub layer: Option<usize>,
    pub norm: Option<NormKind>,
    pub shift_kind: String,
    pub intensity: Option<Intensity>,
    pub delta: f64,
    pub sample_size: usize,
    pub repetitions: usize,
    pub mode: PowerMode,
    pub estimate: f64,
    pub ci_half_width: f64,
    pub seed: u64,
}

impl ReportRow {
    pub fn from_report(
        report: &PowerReport,
        shift: &ShiftKind,
        intensity: Option<Intensity>,
        delta: f64,
    ) -> Self {
        ReportRow {
            feature_kind: report.feature.name().to_string(),
            layer: report.feature.layer(),
            norm: report.feature.norm(),
            shift_kind: shift.to_string(),
            intensity,
            delta,
            sample_size: report.sample_size,
            repetitions: report.repetitions,
            mode: report.mode,
            estimate: report.estimate,
            ci_half_width: report.half_width,
            seed: report.seed,
        }
    }

    /// Feature label used to group rows into plot series.
    pub fn feature_label(&self) -> String {
        match (self.layer, self.norm) {
            (Some(l), Some(n)) => format!("{}[{l},{n}]", self.feature_kind),
            _ => self.feature_kind.clone(),
        }
    }

    fn fields(&self) -> [String; 12] {
        [
            self.feature_kind.clone(),
            self.layer.map(|l| l.to_string()).unwrap_or_default(),
            self.norm.map(|n| n.to_string()).unwrap_or_default(),
            self.shift_kind.clone(),
            self.intensity.map(|i| i.to_string()).unwrap_or_default(),
            format_float(self.delta),
            self.sample_size.to_string(),
            self.repetitions.to_string(),
            self.mode.to_string(),
            format_float(self.estimate),
            format_float(self.ci_half_width),
            self.seed.to_string(),
        ]
    }
}

/// Shortest round-trip decimal, zero-padded to at least
/// [`MIN_SIGNIFICANT_DIGITS`] significant digits.
pub fn format_float(v: f64) -> String {
    let short = format!("{v}");
    if !v.is_finite() {
        return short;
    }
    let digits = short
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if digits >= MIN_SIGNIFICANT_DIGITS {
        return short;
    }
    let magnitude = if v == 0.0 { 0 } else { v.abs().log10().floor() as i32 };
    let decimals = (MIN_SIGNIFICANT_DIGITS as i32 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn encode_report_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::input(format!("writing CSV: {e}"));
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::input(format!("writing CSV: {e}")))
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_atomic(path, &encode_report_csv(rows)?)
}

pub fn parse_report_csv(bytes: &[u8], path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r
        .headers()
        .map_err(|e| Error::parse(path, format!("line 1: {e}")))?;
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(Error::parse(
            path,
            format!("line 1: expected header {}", REPORT_COLUMNS.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.deserialize::<ReportRow>().enumerate() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(k as u64 + 2, |p| p.line());
            Error::parse(path, format!("line {line}: {e}"))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    parse_report_csv(&read_bytes(path)?, path)
}
