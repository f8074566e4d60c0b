//! Standalone two-panel SVG: estimates with dashed true values on top,
//! `log₁₀ ‖ϑ̃‖` below.

use std::fmt::Write as _;
use std::path::Path;

use super::ScenarioResult;
use crate::error::{Error, Result};

/// Error norms are clamped here before taking the logarithm.
pub const ERR_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 720.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const PANEL_H: f64 = 280.0;
const TOP_Y: f64 = 50.0;
const BOTTOM_Y: f64 = 400.0;
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PARAM_DASH: [&str; 4] = ["", "6 2", "2 2", "8 3 2 3"];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Data extents padded by 5% on each side.
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn map(&self, v: f64, px_lo: f64, px_hi: f64) -> f64 {
        px_lo + (v - self.lo) / (self.hi - self.lo) * (px_hi - px_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0)
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

fn sampled_indices(n: usize) -> impl Iterator<Item = usize> {
    let s = stride(n);
    (0..n)
        .step_by(s)
        .chain((n > 0 && !(n - 1).is_multiple_of(s)).then_some(n - 1))
}

fn frame(svg: &mut String, title: &str, y0: f64, xa: &Axis, ya: &Axis, ylabel: &str) {
    let x_hi = WIDTH - RIGHT;
    let y1 = y0 + PANEL_H;
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{y0}" width="{}" height="{PANEL_H}" fill="none" stroke="#333"/>"##,
        x_hi - LEFT
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + x_hi) / 2.0,
        y0 - 10.0,
        escape(title)
    );
    for t in xa.ticks() {
        let x = xa.map(t, LEFT, x_hi);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{t:.3}</text>"#,
            y1 + 14.0
        );
    }
    for v in ya.ticks() {
        let y = ya.map(v, y1, y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{v:.3}</text>"#,
            LEFT - 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">t [s]</text>"#,
        (LEFT + x_hi) / 2.0,
        y1 + 30.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="11" transform="rotate(-90 16 {:.2})" text-anchor="middle">{ylabel}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
}

fn polyline(svg: &mut String, class: &str, color: &str, dash: &str, pts: &[(f64, f64)]) {
    let _ = write!(
        svg,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.4""#
    );
    if !dash.is_empty() {
        let _ = write!(svg, r#" stroke-dasharray="{dash}""#);
    }
    svg.push_str(" points=\"");
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            svg.push(' ');
        }
        let _ = write!(svg, "{x:.2},{y:.2}");
    }
    svg.push_str("\"/>\n");
}

/// Renders the result as an SVG document.
pub fn render_svg(result: &ScenarioResult) -> String {
    let x_hi = WIDTH - RIGHT;
    let xa = Axis::fit(
        result
            .estimators
            .iter()
            .flat_map(|e| e.trajectory.times.iter().copied()),
    );
    let top = Axis::fit(
        result
            .estimators
            .iter()
            .flat_map(|e| e.trajectory.estimates.iter().flatten().copied())
            .chain(result.true_params.iter().copied()),
    );
    let log_err = |e: f64| e.max(ERR_FLOOR).log10();
    let bottom = Axis::fit(
        result
            .estimators
            .iter()
            .flat_map(|e| e.trajectory.err_norms.iter().map(|&v| log_err(v))),
    );

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    frame(
        &mut svg,
        &format!("{}: parameter estimates", result.name),
        TOP_Y,
        &xa,
        &top,
        "estimate",
    );
    frame(
        &mut svg,
        "parametric error norm",
        BOTTOM_Y,
        &xa,
        &bottom,
        "log10 |error|",
    );

    for &theta in &result.true_params {
        let y = top.map(theta, TOP_Y + PANEL_H, TOP_Y);
        let _ = writeln!(
            svg,
            r##"<line class="truth" x1="{LEFT}" y1="{y:.2}" x2="{x_hi}" y2="{y:.2}" stroke="#555" stroke-dasharray="5 4"/>"##
        );
    }

    for (ei, e) in result.estimators.iter().enumerate() {
        let color = PALETTE[ei % PALETTE.len()];
        let tr = &e.trajectory;
        let idx: Vec<usize> = sampled_indices(tr.len()).collect();
        for p in 0..result.true_params.len() {
            let pts: Vec<(f64, f64)> = idx
                .iter()
                .map(|&k| {
                    (
                        xa.map(tr.times[k], LEFT, x_hi),
                        top.map(tr.estimates[k][p], TOP_Y + PANEL_H, TOP_Y),
                    )
                })
                .collect();
            polyline(
                &mut svg,
                "estimate",
                color,
                PARAM_DASH[p % PARAM_DASH.len()],
                &pts,
            );
        }
        let pts: Vec<(f64, f64)> = idx
            .iter()
            .map(|&k| {
                (
                    xa.map(tr.times[k], LEFT, x_hi),
                    bottom.map(log_err(tr.err_norms[k]), BOTTOM_Y + PANEL_H, BOTTOM_Y),
                )
            })
            .collect();
        polyline(&mut svg, "error", color, "", &pts);

        let ly = TOP_Y + 14.0 + 20.0 * ei as f64;
        let _ = writeln!(
            svg,
            r##"<line class="legend" x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"##,
            x_hi + 12.0,
            x_hi + 36.0
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            x_hi + 42.0,
            ly + 4.0,
            escape(&e.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(result: &ScenarioResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(result)).map_err(|e| Error::io(path, e))
}
