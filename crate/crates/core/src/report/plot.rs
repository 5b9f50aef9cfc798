//! Minimal SVG line charts for step responses.
//!
//! Output is a pure function of the input: fixed layout, fixed palette and
//! fixed-precision coordinates, so identical curves give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TimeSeries;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
/// Longer curves are decimated to roughly this many vertices.
const MAX_VERTICES: usize = 2000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Renders one polyline per curve with labelled axes and a legend.
pub fn render_step_plot(curves: &[(String, TimeSeries)]) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument("no curves to plot".into()));
    }
    let (t0, t1) = extent(curves.iter().flat_map(|(_, s)| s.times().iter().copied()));
    let (y0, y1) = extent(curves.iter().flat_map(|(_, s)| s.values().iter().copied()));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
    let y = |v: f64| TOP + (y1 - v) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    );
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let tv = t0 + f * (t1 - t0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b5:.2}" stroke="black"/><text x="{px:.2}" y="{bt:.2}" text-anchor="middle">{label}</text>"#,
            px = x(tv),
            b = TOP + plot_h,
            b5 = TOP + plot_h + 5.0,
            bt = TOP + plot_h + 18.0,
            label = tick_label(tv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{l5:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{lt:.2}" y="{pyt:.2}" text-anchor="end">{label}</text>"#,
            l5 = LEFT - 5.0,
            lt = LEFT - 8.0,
            py = y(yv),
            pyt = y(yv) + 4.0,
            label = tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 18 {cy:.2})">output</text>"#,
        cy = TOP + plot_h / 2.0
    );

    for (i, (name, series)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let stride = series.len().div_ceil(MAX_VERTICES).max(1);
        let mut points = String::new();
        let last = series.len() - 1;
        for (k, (t, v)) in series.iter().enumerate() {
            if k % stride == 0 || k == last {
                let _ = write!(points, "{:.2},{:.2} ", x(t), y(v));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_step_plot(curves: &[(String, TimeSeries)], path: &Path) -> Result<()> {
    let svg = render_step_plot(curves)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
