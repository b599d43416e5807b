//! Minimal SVG line plots of summary rows.
//!
//! One series per `(eps, fixed key)` pair: a solid `polyline` for the mean,
//! a translucent `polygon` for the mean +- std band and, for absolute
//! errors, a dot-dashed `polyline` for the expected-error bound.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::SummaryRow;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    /// Number of marginals, log scale.
    Marginals,
    /// Input dimension, linear scale.
    Dimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Absolute,
    Relative,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub x_axis: XAxis,
    pub metric: Metric,
    pub title: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

struct Point {
    x: f64,
    mean: f64,
    lo: f64,
    hi: f64,
    bound: f64,
}

fn series(rows: &[SummaryRow], opts: &PlotOptions) -> BTreeMap<(u64, usize), Vec<Point>> {
    let mut out: BTreeMap<(u64, usize), Vec<Point>> = BTreeMap::new();
    for r in rows {
        let (mean, std) = match opts.metric {
            Metric::Absolute => (r.mean_abs, r.std_abs),
            Metric::Relative => match (r.mean_rel, r.std_rel) {
                (Some(m), Some(s)) => (m, s),
                _ => continue,
            },
        };
        let (x, fixed) = match opts.x_axis {
            XAxis::Marginals => (r.n as f64, r.d),
            XAxis::Dimension => (r.d as f64, r.n),
        };
        // Positive eps order like their bit patterns.
        out.entry((r.epsilon.to_bits(), fixed))
            .or_default()
            .push(Point {
                x,
                mean,
                lo: mean - std,
                hi: mean + std,
                bound: r.expected_bound,
            });
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
    out
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    pix_lo: f64,
    pix_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        let t = if self.log {
            (v.max(self.lo).log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        };
        self.pix_lo + t * (self.pix_hi - self.pix_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (
                self.lo.log10().floor() as i32,
                self.hi.log10().ceil() as i32,
            );
            (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|t| *t >= self.lo * 0.999 && *t <= self.hi * 1.001)
                .collect()
        } else {
            let span = self.hi - self.lo;
            let step = if span <= 10.0 {
                1.0
            } else {
                (span / 10.0).ceil()
            };
            let mut t = self.lo.ceil();
            let mut out = Vec::new();
            while t <= self.hi + 1e-9 {
                out.push(t);
                t += step;
            }
            out
        }
    }
}

fn padded_range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let vals: Vec<f64> = values
        .filter(|v| v.is_finite() && (!log || *v > 0.0))
        .collect();
    let (mut lo, mut hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return if log { (1e-3, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        if hi <= lo {
            lo /= 2.0;
            hi *= 2.0;
        }
        (lo / 1.3, hi * 1.3)
    } else {
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        format!("{v}")
    }
}

fn points_attr(pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_svg(rows: &[SummaryRow], opts: &PlotOptions) -> String {
    let groups = series(rows, opts);
    let all = || groups.values().flatten();
    let x_log = opts.x_axis == XAxis::Marginals;
    let with_bound = opts.metric == Metric::Absolute;
    let (x_lo, x_hi) = padded_range(all().map(|p| p.x), x_log);
    let y_values = all().flat_map(|p| {
        let b = if with_bound { Some(p.bound) } else { None };
        [Some(p.mean), Some(p.hi), Some(p.lo), b]
            .into_iter()
            .flatten()
    });
    let (y_lo, y_hi) = padded_range(y_values, true);
    let xs = Scale {
        lo: x_lo,
        hi: x_hi,
        log: x_log,
        pix_lo: LEFT,
        pix_hi: WIDTH - RIGHT,
    };
    let ys = Scale {
        lo: y_lo,
        hi: y_hi,
        log: true,
        pix_lo: HEIGHT - BOTTOM,
        pix_hi: TOP,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&opts.title)
    );

    // axes
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for t in xs.ticks() {
        let px = xs.map(t);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            fmt_tick(t)
        );
    }
    for t in ys.ticks() {
        let py = ys.map(t);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            py + 4.0,
            fmt_tick(t)
        );
    }
    let x_label = match opts.x_axis {
        XAxis::Marginals => "number of marginals n",
        XAxis::Dimension => "input dimension d",
    };
    let y_label = match opts.metric {
        Metric::Absolute => "absolute error",
        Metric::Relative => "relative error",
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{y_label}</text>"#,
        (y0 + y1) / 2.0
    );

    for (idx, ((eps_bits, fixed), pts)) in groups.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let eps = f64::from_bits(*eps_bits);
        let band = pts
            .iter()
            .map(|p| (xs.map(p.x), ys.map(p.hi)))
            .chain(pts.iter().rev().map(|p| (xs.map(p.x), ys.map(p.lo))));
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            points_attr(band)
        );
        let _ = writeln!(
            s,
            r#"<polyline class="data" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points_attr(pts.iter().map(|p| (xs.map(p.x), ys.map(p.mean))))
        );
        if with_bound {
            let _ = writeln!(
                s,
                r#"<polyline class="bound" points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="8,3,2,3"/>"#,
                points_attr(pts.iter().map(|p| (xs.map(p.x), ys.map(p.bound))))
            );
        }
        let ly = TOP + 10.0 + 18.0 * idx as f64;
        let key = match opts.x_axis {
            XAxis::Marginals => format!("eps={eps}, d={fixed}"),
            XAxis::Dimension => format!("eps={eps}, n={fixed}"),
        };
        let _ = writeln!(
            s,
            r#"<line class="legend" x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            x1 + 35.0,
            ly + 4.0,
            escape(&key)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_svg(rows: &[SummaryRow], path: impl AsRef<Path>, opts: &PlotOptions) -> Result<()> {
    std::fs::write(path, render_svg(rows, opts))?;
    Ok(())
}
