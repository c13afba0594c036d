//! Minimal static SVG line and scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Logarithmic axes; each series is annotated with its least-squares slope.
    pub log_log: bool,
    pub lines: bool,
    pub markers: bool,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_log: false,
            lines: true,
            markers: false,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo <= 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions (in axis units) with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            if a <= b && b - a <= 12 {
                return (a..=b).map(|k| (k as f64, format!("1e{k}"))).collect();
            }
            if a <= b {
                let stride = ((b - a) / 6).max(1);
                return (a..=b)
                    .step_by(stride as usize)
                    .map(|k| (k as f64, format!("1e{k}")))
                    .collect();
            }
            let mid = 0.5 * (self.lo + self.hi);
            return vec![(mid, format!("{:.3e}", 10f64.powf(mid)))];
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|k| {
                let v = k as f64 * step;
                let label = format!("{:.*}", decimals, v);
                (v, if label == "-0" { "0".into() } else { label })
            })
            .collect()
    }
}

/// Renders the series as an SVG 1.1 document. Identical inputs give identical bytes.
pub fn render_svg(series: &[Series], style: &PlotStyle) -> CliResult<String> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::Other("cannot plot an empty series".into()));
    }
    let tf = |v: f64| if style.log_log { v.log10() } else { v };
    for s in series {
        if s.points.iter().any(|&(x, y)| !tf(x).is_finite() || !tf(y).is_finite()) {
            return Err(CliError::Other(format!(
                "series '{}' has points that cannot be drawn{}",
                s.label,
                if style.log_log { " on log axes" } else { "" }
            )));
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::new(all().map(|p| tf(p.0)), style.log_log);
    let ya = Axis::new(all().map(|p| tf(p.1)), style.log_log);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&style.title)
    );
    let _ = writeln!(
        w,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(
            w,
            r#"<line class="tick" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            escape(&label)
        );
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(
            w,
            r#"<line class="tick" x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&style.y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| (px(tf(x)), py(tf(y)))).collect();
        if style.lines && pts.len() >= 2 {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                w,
                r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
        }
        if style.markers || pts.len() == 1 {
            for (x, y) in &pts {
                let _ = writeln!(
                    w,
                    r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
                );
            }
        }
        let mut label = s.label.clone();
        if style.log_log {
            let logs: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
            if let Some(slope) = ls_slope(&logs) {
                let _ = write!(label, " (slope {slope:.3})");
            }
        }
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="3" fill="{color}"/>"#,
            LEFT + 10.0,
            ly - 4.0
        );
        let _ = writeln!(
            w,
            r#"<text class="legend" x="{:.2}" y="{ly:.2}">{}</text>"#,
            LEFT + 26.0,
            escape(&label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(path: &Path, series: &[Series], style: &PlotStyle) -> CliResult<()> {
    let svg = render_svg(series, style)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ticks_are_round() {
        let axis = Axis::new([0.0, 1.0].into_iter(), false);
        let labels: Vec<String> = axis.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0"]);
    }

    #[test]
    fn log_ticks_are_decades() {
        let axis = Axis::new([-3.0, -1.0].into_iter(), true);
        let labels: Vec<String> = axis.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["1e-3", "1e-2", "1e-1"]);
    }

    #[test]
    fn log_axes_reject_non_positive_values() {
        let style = PlotStyle {
            log_log: true,
            ..PlotStyle::default()
        };
        assert!(render_svg(&[Series::new("bad", vec![(1.0, 0.0), (2.0, 1.0)])], &style).is_err());
    }
}
