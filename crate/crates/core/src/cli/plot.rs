//! Minimal SVG line plots with log-scaled axes.

use std::fmt::Write;

use crate::checks::p_slices;
use crate::experiments::{Metric, PointAggregate};

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn log_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let (mut a, mut b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        a -= 1.0;
        b += 1.0;
    }
    Some((a, b))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Panel {
    /// Renders into a group translated by `(ox, 0)`. Non-positive values are
    /// dropped, since both axes are logarithmic.
    fn render(&self, out: &mut String, ox: f64) {
        let _ = writeln!(out, r#"<g transform="translate({ox},0)">"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            PANEL_W / 2.0,
            esc(&self.title)
        );
        let pts = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let (Some((x0, x1)), Some((y0, y1))) = (log_range(pts().map(|p| p.0)), log_range(pts().map(|p| p.1)))
        else {
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text></g>"#, PANEL_W / 2.0, PANEL_H / 2.0);
            return;
        };
        let (left, right, top, bottom) = (MARGIN_L, PANEL_W - MARGIN_R, MARGIN_T, PANEL_H - MARGIN_B);
        let sx = |x: f64| left + (x.log10() - x0) / (x1 - x0) * (right - left);
        let sy = |y: f64| bottom - (y.log10() - y0) / (y1 - y0) * (bottom - top);

        let _ = writeln!(
            out,
            r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            right - left,
            bottom - top
        );
        for e in (x0 as i32)..=(x1 as i32) {
            let x = sx(10f64.powi(e));
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{bottom}" x2="{x:.1}" y2="{top}" stroke="#ddd"/><text x="{x:.1}" y="{}" text-anchor="middle" font-size="11">1e{e}</text>"##,
                bottom + 16.0
            );
        }
        for e in (y0 as i32)..=(y1 as i32) {
            let y = sy(10f64.powi(e));
            let _ = writeln!(
                out,
                r##"<line x1="{left}" y1="{y:.1}" x2="{right}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end" font-size="11">1e{e}</text>"##,
                left - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            (left + right) / 2.0,
            PANEL_H - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {0})">{1}</text>"#,
            (top + bottom) / 2.0,
            esc(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
                .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
            let ly = top + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{2}" y="{3}" font-size="11">{4}</text>"#,
                right - 150.0,
                right - 125.0,
                right - 120.0,
                ly + 4.0,
                esc(&s.label)
            );
        }
        let _ = writeln!(out, "</g>");
    }
}

pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        panel.render(&mut out, PANEL_W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn slice_label(a: &PointAggregate, many: bool) -> String {
    if many {
        format!(" ({}, d={}, n={}, γ={})", a.variant.label(), a.d, a.n, a.gamma)
    } else {
        String::new()
    }
}

fn median_series(slice: &[&PointAggregate], metric: Metric) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> =
        slice.iter().filter_map(|a| a.summary(metric).map(|s| (a.p as f64, s.median))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Median risks (left) and median forgetting ratio (right) against `p`.
pub fn sweep_svg(aggregates: &[PointAggregate]) -> String {
    let slices = p_slices(aggregates);
    let many = slices.len() > 1;
    let mut risk = Panel {
        title: "Median risk".into(),
        x_label: "p".into(),
        y_label: "risk".into(),
        series: Vec::new(),
    };
    let mut ratio = Panel {
        title: "Median forgetting ratio".into(),
        x_label: "p".into(),
        y_label: "ratio".into(),
        series: Vec::new(),
    };
    for slice in &slices {
        let tag = slice_label(slice[0], many);
        risk.series.push(Series { label: format!("R(A){tag}"), points: median_series(slice, Metric::RiskA), dashed: false });
        risk.series.push(Series { label: format!("R(BA){tag}"), points: median_series(slice, Metric::RiskBa), dashed: true });
        ratio.series.push(Series { label: format!("ratio{tag}"), points: median_series(slice, Metric::Ratio), dashed: false });
    }
    render(&[risk, ratio])
}
