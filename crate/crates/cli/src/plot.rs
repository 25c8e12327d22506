//! Static SVG figures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lagflow::PointBatch;

use crate::error::{io_err, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Affine map from data bounds to the plotting area.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>, log_x: bool, pad: f64) -> Self {
        let (mut x0, mut x1) = bounds(xs.map(|x| if log_x { x.log10() } else { x }));
        let (mut y0, mut y1) = bounds(ys);
        let px = (x1 - x0) * pad;
        let py = (y1 - y0) * pad;
        x0 -= px;
        x1 += px;
        y0 -= py;
        y1 += py;
        Self { x0, x1, y0, y1, log_x }
    }

    fn x(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let w = lo.abs().max(1.0) * 0.5;
        return (lo - w, hi + w);
    }
    (lo, hi)
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: &[f64]) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r##"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="#333"/>"##
    );
    for &x in xticks {
        let px = f.x(x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="#333"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            b + 5.0,
            b + 18.0,
            fmt_tick(x)
        );
    }
    for k in 0..=4 {
        let y = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let py = f.y(y);
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="#333"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            fmt_tick(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn polyline(f: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in pts {
        let _ = write!(s, "{:.2},{:.2} ", f.x(x), f.y(y));
    }
    s
}

/// Source and terminal endpoints (black), target samples (grey) and the
/// solver trajectories (olive) projected on the first two coordinates.
///
/// `path` holds the recorded states in time order; at most `max_paths`
/// polylines are drawn.
pub fn trajectory_svg(
    title: &str,
    target: &PointBatch,
    path: &[PointBatch],
    max_paths: usize,
) -> String {
    let coords = |b: &PointBatch| -> Vec<(f64, f64)> {
        b.rows().map(|r| (r[0], r.get(1).copied().unwrap_or(0.0))).collect()
    };
    let all: Vec<(f64, f64)> = path
        .iter()
        .chain(std::iter::once(target))
        .flat_map(|b| coords(b))
        .collect();
    let f = Frame::fit(all.iter().map(|p| p.0), all.iter().map(|p| p.1), false, 0.05);

    let mut out = String::new();
    open(&mut out, title);
    let _ = writeln!(out, r##"<g fill="#9a9a9a" fill-opacity="0.5">"##);
    for (x, y) in coords(target) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, f.x(x), f.y(y));
    }
    let _ = writeln!(out, "</g>");
    if let (Some(first), Some(last)) = (path.first(), path.last()) {
        let n = first.len().min(max_paths);
        let _ = writeln!(out, r##"<g fill="none" stroke="#808000" stroke-opacity="0.6" stroke-width="0.8">"##);
        for i in 0..n {
            let pts = path.iter().map(|b| {
                let r = b.row(i);
                (r[0], r.get(1).copied().unwrap_or(0.0))
            });
            let _ = writeln!(out, r#"<polyline points="{}"/>"#, polyline(&f, pts));
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(out, r##"<g fill="black">"##);
        for b in [first, last] {
            for &(x, y) in coords(b).iter().take(n) {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8"/>"#, f.x(x), f.y(y));
            }
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

/// One line of a metric-vs-axis plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Mean curves with shaded ±1 std bands, one colour per series.
pub fn metric_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool) -> String {
    let log_x = log_x && series.iter().flat_map(|s| &s.x).all(|&x| x > 0.0);
    let xs = series.iter().flat_map(|s| s.x.iter().copied());
    let ys = series.iter().flat_map(|s| {
        s.mean
            .iter()
            .zip(&s.std)
            .flat_map(|(m, sd)| [m - sd, m + sd])
    });
    let f = Frame::fit(xs, ys, log_x, 0.04);
    let mut ticks: Vec<f64> = series.iter().flat_map(|s| s.x.iter().copied()).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    if ticks.len() > 10 {
        let (lo, hi) = (ticks[0], ticks[ticks.len() - 1]);
        ticks = (0..=5).map(|k| lo + (hi - lo) * k as f64 / 5.0).collect();
    }

    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel, &ticks);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let upper = s.x.iter().zip(&s.mean).zip(&s.std).map(|((&x, &m), &sd)| (x, m + sd));
        let lower: Vec<(f64, f64)> = s.x.iter().zip(&s.mean).zip(&s.std).map(|((&x, &m), &sd)| (x, m - sd)).collect();
        let band = polyline(&f, upper.chain(lower.into_iter().rev()));
        let _ = writeln!(
            out,
            r#"<polygon points="{band}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#
        );
        let line = polyline(&f, s.x.iter().copied().zip(s.mean.iter().copied()));
        let _ = writeln!(
            out,
            r#"<polyline points="{line}" fill="none" stroke="{colour}" stroke-width="2"/>"#
        );
        for (&x, &m) in s.x.iter().zip(&s.mean).filter(|_| s.x.len() <= 50) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                f.x(x),
                f.y(m)
            );
        }
        let ly = MARGIN + 16.0 * k as f64 + 8.0;
        let lx = WIDTH - MARGIN - 110.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn save(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(io_err(path))
}
