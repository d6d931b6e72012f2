//! Minimal SVG line plots of E (red), n (green) and u (blue) against t.

use std::fmt::Write;

use oscctl_core::Trajectory;

use crate::error::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const MAX_POINTS: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Energy,
    Bath,
    Drive,
}

impl Series {
    fn color(self) -> &'static str {
        match self {
            Series::Energy => "red",
            Series::Bath => "green",
            Series::Drive => "blue",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Series::Energy => "E(t)",
            Series::Bath => "n(t)",
            Series::Drive => "u(t)",
        }
    }

    fn value(self, traj: &Trajectory, i: usize) -> f64 {
        match self {
            Series::Energy => traj.states[i].energy,
            Series::Bath => traj.controls[i].n,
            Series::Drive => traj.controls[i].u,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureStyle {
    pub title: String,
    pub series: Vec<Series>,
}

impl Default for FigureStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            series: vec![Series::Energy, Series::Bath, Series::Drive],
        }
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders every requested series of every trajectory on shared axes.
pub fn render(trajectories: &[&Trajectory], style: &FigureStyle) -> Result<String> {
    if trajectories.iter().all(|t| t.is_empty()) || style.series.is_empty() {
        return Err(CliError::Output("no data to plot".into()));
    }
    let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for traj in trajectories {
        for (i, &t) in traj.times.iter().enumerate() {
            t0 = t0.min(t);
            t1 = t1.max(t);
            for s in &style.series {
                let v = s.value(traj, i);
                if v.is_finite() {
                    y0 = y0.min(v);
                    y1 = y1.max(v);
                }
            }
        }
    }
    if !(y0.is_finite() && y1.is_finite()) {
        return Err(CliError::Output("no finite data to plot".into()));
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pad = if y1 > y0 {
        0.05 * (y1 - y0)
    } else {
        0.5f64.max(0.05 * y0.abs())
    };
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + (t - t0) / (t1 - t0) * pw;
    let y = |v: f64| MARGIN_TOP + (y1 - v) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&style.title)
    );
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1" fill="none"><rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}"/></g>"#
    );
    let _ = writeln!(
        svg,
        r#"<g font-family="sans-serif" font-size="11" fill="black">"#
    );
    for t in ticks(t0, t1) {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"#,
            x(t),
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0,
            MARGIN_TOP + ph + 18.0,
            tick_label(t)
        );
    }
    for v in ticks(y0, y1) {
        let label = tick_label(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{2:.2}" x2="{1:.2}" y2="{2:.2}" stroke="black"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{label}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT,
            y(v),
            MARGIN_LEFT - 8.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text></g>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 8.0
    );

    for traj in trajectories {
        let stride = traj.len().div_ceil(MAX_POINTS).max(1);
        for s in &style.series {
            let mut points = String::new();
            let mut idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();
            if idx.last() != Some(&(traj.len() - 1)) {
                idx.push(traj.len() - 1);
            }
            for i in idx {
                let v = s.value(traj, i);
                if v.is_finite() {
                    let _ = write!(points, "{:.2},{:.2} ", x(traj.times[i]), y(v));
                }
            }
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                s.color(),
                points.trim_end()
            );
        }
    }

    let _ = writeln!(svg, r#"<g font-family="sans-serif" font-size="12">"#);
    for (k, s) in style.series.iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + pw - 80.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            s.color(),
            lx + 26.0,
            ly + 4.0,
            s.label()
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}
