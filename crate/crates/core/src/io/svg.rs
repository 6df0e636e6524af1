//! Power curves as standalone SVG 1.1 documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::report::ReportRow;
use crate::error::{Error, Result};
use crate::shifts::Intensity;
use crate::stats::PowerMode;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const REFERENCE_LEVEL: f64 = 0.05;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    /// Log-scaled sample size.
    SampleSize,
    /// Intensity levels I..VI, evenly spaced.
    Intensity,
}

impl FromStr for XAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample_size" => Ok(XAxis::SampleSize),
            "intensity" => Ok(XAxis::Intensity),
            other => Err(Error::input(format!("unknown x axis '{other}'"))),
        }
    }
}

/// Top of the plotting area; an estimate of 1.0 is drawn at this `y`.
pub fn plot_top() -> f64 {
    TOP
}

fn y_of(v: f64) -> f64 {
    TOP + (1.0 - v.clamp(0.0, 1.0)) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn series_label(row: &ReportRow) -> String {
    match row.mode {
        PowerMode::Power => row.feature_label(),
        PowerMode::Type1 => format!("{} type-I", row.feature_label()),
    }
}

fn x_value(row: &ReportRow, axis: XAxis) -> Result<f64> {
    match axis {
        XAxis::SampleSize => Ok(row.sample_size as f64),
        XAxis::Intensity => row
            .intensity
            .map(|i| f64::from(i.level()))
            .ok_or_else(|| Error::input("row without intensity level on an intensity axis")),
    }
}

/// Renders one curve per feature (and mode) with ±half-width whiskers and a
/// dashed reference line at 0.05. `description` is embedded verbatim in the
/// document's `<desc>` element.
pub fn emit_power_plot(rows: &[ReportRow], axis: XAxis, title: &str, description: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::input("no rows to plot"));
    }
    let mut series: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in rows {
        series
            .entry(series_label(row))
            .or_default()
            .push((x_value(row, axis)?, row.estimate, row.ci_half_width));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    let (x_lo, x_hi) = match axis {
        XAxis::SampleSize => {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min).max(1.0).log10();
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1.0).log10();
            (lo, hi)
        }
        XAxis::Intensity => (1.0, Intensity::COUNT as f64),
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let x_of = |x: f64| -> f64 {
        let t = match axis {
            XAxis::SampleSize => x.max(1.0).log10(),
            XAxis::Intensity => x,
        };
        if x_hi > x_lo {
            LEFT + (t - x_lo) / (x_hi - x_lo) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>{}</desc>", escape(description));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // horizontal gridlines and y labels
    for k in 0..=4 {
        let v = f64::from(k) / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    // x ticks
    let mut ticks: Vec<f64> = match axis {
        XAxis::SampleSize => xs.clone(),
        XAxis::Intensity => (1..=Intensity::COUNT).map(|l| l as f64).collect(),
    };
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    let axis_y = y_of(0.0);
    for t in ticks {
        let x = x_of(t);
        let label = match axis {
            XAxis::SampleSize => format!("{t}"),
            XAxis::Intensity => Intensity::new(t as u8)?.to_string(),
        };
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{axis_y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
            axis_y + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#,
            axis_y + 18.0
        );
    }
    let axis_name = match axis {
        XAxis::SampleSize => "sample size (log scale)",
        XAxis::Intensity => "intensity",
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{axis_name}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let ref_y = y_of(REFERENCE_LEVEL);
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.2}" y1="{ref_y:.2}" x2="{:.2}" y2="{ref_y:.2}" stroke="#555555" stroke-width="1" stroke-dasharray="6,4"/>"##,
        LEFT + plot_w
    );

    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g stroke="{color}" fill="{color}">"#);
        if pts.len() >= 2 {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, v, _)| format!("{:.2},{:.2}", x_of(x), y_of(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke-width="2"/>"#,
                coords.join(" ")
            );
        }
        for &(x, v, hw) in pts {
            let px = x_of(x);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke-width="1"/>"#,
                y_of(v - hw),
                y_of(v + hw)
            );
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{:.2}" r="3"/>"#, y_of(v));
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10"/>"#,
            ly - 9.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11" stroke="none">{}</text>"#,
            lx + 14.0,
            escape(label)
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
