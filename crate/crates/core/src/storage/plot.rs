//! Waveform reconstruction as a standalone SVG or a gnuplot-style text table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use super::series::Series;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    /// Blocks of `time_s value` lines, one block per series.
    Text,
}

impl PlotFormat {
    /// `.txt`, `.dat` and `.tsv` select text; anything else is SVG.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt" | "dat" | "tsv") => PlotFormat::Text,
            _ => PlotFormat::Svg,
        }
    }
}

/// Per-trace numbers describing what was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub label: String,
    pub unit: String,
    pub points: usize,
    pub min: f64,
    pub max: f64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub traces: Vec<TraceSummary>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn check(series: &[Series]) -> Result<DateTime<Utc>, PlotError> {
    if series.is_empty() {
        return Err(PlotError::Usage("no series given".into()));
    }
    if let Some(s) = series.iter().find(|s| s.is_empty()) {
        return Err(PlotError::Usage(format!("series {:?} is empty", s.label())));
    }
    Ok(series
        .iter()
        .map(|s| s.points()[0].0)
        .min()
        .expect("non-empty"))
}

fn seconds_since(t0: DateTime<Utc>, t: DateTime<Utc>) -> f64 {
    (t - t0).num_milliseconds() as f64 / 1000.0
}

fn summarize(series: &[Series], t0: DateTime<Utc>) -> PlotSummary {
    let traces = series
        .iter()
        .map(|s| {
            let pts = s.points();
            let (min, max) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                    (lo.min(v), hi.max(v))
                });
            TraceSummary {
                label: s.label().to_string(),
                unit: s.unit().to_string(),
                points: pts.len(),
                min,
                max,
                start_s: seconds_since(t0, pts[0].0),
                end_s: seconds_since(t0, pts[pts.len() - 1].0),
            }
        })
        .collect();
    PlotSummary { traces }
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

/// Expands a value range to whole tick steps; flat ranges get ±1 (or ±5 %).
fn axis_range(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (lo, hi) = if hi - lo < 1e-12 {
        let pad = (lo.abs() * 0.05).max(1.0);
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    };
    let step = nice_step(hi - lo, 6);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    format!("{v:.decimals$}")
}

/// Renders the series as a standalone SVG document. Series are grouped by
/// unit; the first unit uses the left axis and a second one the right axis.
pub fn render_svg(series: &[Series]) -> Result<(String, PlotSummary), PlotError> {
    let t0 = check(series)?;
    let summary = summarize(series, t0);
    let mut units: Vec<&str> = Vec::new();
    for s in series {
        if !units.contains(&s.unit()) {
            units.push(s.unit());
        }
    }
    if units.len() > 2 {
        return Err(PlotError::Usage(format!(
            "at most two units per plot, got {}",
            units.join(", ")
        )));
    }

    let t_end = summary
        .traces
        .iter()
        .map(|t| t.end_s)
        .fold(0.0f64, f64::max);
    let (time_scale, time_unit) = if t_end > 7200.0 {
        (3600.0, "h")
    } else if t_end > 600.0 {
        (60.0, "min")
    } else {
        (1.0, "s")
    };
    let (x_lo, x_hi, x_step) = axis_range(0.0, (t_end / time_scale).max(1e-9));
    let axes: Vec<(f64, f64, f64)> = units
        .iter()
        .map(|u| {
            let (lo, hi) = summary
                .traces
                .iter()
                .filter(|t| t.unit == *u)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                    (lo.min(t.min), hi.max(t.max))
                });
            axis_range(lo, hi)
        })
        .collect();

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |axis: usize, y: f64| {
        let (lo, hi, _) = axes[axis];
        TOP + plot_h - (y - lo) / (hi - lo) * plot_h
    };

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    // time axis
    let mut x = x_lo;
    while x <= x_hi + x_step * 1e-6 {
        let sx = px(x);
        let _ = writeln!(
            w,
            r##"<line x1="{sx:.2}" y1="{TOP}" x2="{sx:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            w,
            r#"<text x="{sx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            fmt_tick(x, x_step)
        );
        x += x_step;
    }
    let _ = writeln!(
        w,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">time ({time_unit})</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );

    // value axes
    for (i, (&(lo, hi, step), unit)) in axes.iter().zip(&units).enumerate() {
        let (tx, anchor, lx) = if i == 0 {
            (LEFT - 6.0, "end", 20.0)
        } else {
            (LEFT + plot_w + 6.0, "start", WIDTH - 20.0)
        };
        let mut y = lo;
        while y <= hi + step * 1e-6 {
            let sy = py(i, y);
            if i == 0 {
                let _ = writeln!(
                    w,
                    r##"<line x1="{LEFT}" y1="{sy:.2}" x2="{:.2}" y2="{sy:.2}" stroke="#eeeeee"/>"##,
                    LEFT + plot_w
                );
            }
            let _ = writeln!(
                w,
                r#"<text x="{tx:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
                sy + 4.0,
                fmt_tick(y, step)
            );
            y += step;
        }
        let cy = TOP + plot_h / 2.0;
        let _ = writeln!(
            w,
            r#"<text class="axis-label" x="{lx}" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 {lx} {cy:.2})">{}</text>"#,
            escape(unit)
        );
    }

    // traces
    for (k, s) in series.iter().enumerate() {
        let axis = units.iter().position(|u| *u == s.unit()).unwrap_or(0);
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points()
            .iter()
            .map(|&(t, v)| {
                format!(
                    "{:.2},{:.2}",
                    px(seconds_since(t0, t) / time_scale),
                    py(axis, v)
                )
            })
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(s.label()),
            pts.join(" ")
        );
    }

    // legend
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let y = TOP + 16.0 + 18.0 * k as f64;
        let x0 = LEFT + plot_w - 180.0;
        let _ = writeln!(
            w,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#,
            y - 4.0,
            x0 + 20.0,
            y - 4.0
        );
        let _ = writeln!(
            w,
            r#"<text class="legend" x="{:.2}" y="{y:.2}">{} ({})</text>"#,
            x0 + 26.0,
            escape(s.label()),
            escape(s.unit())
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok((svg, summary))
}

/// Renders `time_s value` blocks separated by blank lines, each headed by a
/// `# label (unit)` comment. Time is seconds since the earliest point.
pub fn render_text(series: &[Series]) -> Result<(String, PlotSummary), PlotError> {
    let t0 = check(series)?;
    let mut out = String::new();
    for (k, s) in series.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {} ({})", s.label(), s.unit());
        let _ = writeln!(out, "# time_s value");
        for &(t, v) in s.points() {
            let _ = writeln!(out, "{:.3} {}", seconds_since(t0, t), v);
        }
    }
    Ok((out, summarize(series, t0)))
}

/// Writes the series to `out_path`, choosing the format from its extension.
pub fn reconstruct_waveform(series: &[Series], out_path: &Path) -> Result<PlotSummary, PlotError> {
    reconstruct_waveform_as(series, out_path, PlotFormat::from_path(out_path))
}

pub fn reconstruct_waveform_as(
    series: &[Series],
    out_path: &Path,
    format: PlotFormat,
) -> Result<PlotSummary, PlotError> {
    let (body, summary) = match format {
        PlotFormat::Svg => render_svg(series)?,
        PlotFormat::Text => render_text(series)?,
    };
    std::fs::write(out_path, body).map_err(|source| PlotError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(summary)
}
