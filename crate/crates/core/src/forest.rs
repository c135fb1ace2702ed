//! Forest plots and heterogeneity density plots as plain SVG.
//!
//! Each study gets its estimate with confidence interval (black) and, just
//! below, its shrinkage interval (grey); the overall effect is drawn as a
//! diamond and the prediction interval as a bar. The output depends only on
//! the input, so identical reports give byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{AnalysisReport, GridPosterior, Summary};
use crate::dist::HeterogeneityPrior;
use crate::report::fmt2;
use crate::special::norm_quantile;

/// Scale on which the horizontal axis is labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisTransform {
    #[default]
    Identity,
    /// Values are log ratios; ticks and numbers show `exp(x)`.
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub shrinkage: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestPlotSpec {
    pub rows: Vec<ForestRow>,
    pub mean: Summary,
    pub prediction: Summary,
    pub tau: Summary,
    pub axis: AxisTransform,
    pub title: Option<String>,
}

impl ForestPlotSpec {
    /// Study rows in input order, with `y ± z·σ` intervals at the report's level.
    pub fn from_report(report: &AnalysisReport, axis: AxisTransform) -> Self {
        let z = norm_quantile(0.5 * (1.0 + report.mu.level));
        let rows = report
            .studies
            .iter()
            .zip(&report.shrinkage)
            .map(|(s, sh)| ForestRow {
                label: s.label.clone(),
                estimate: s.y,
                lower: s.y - z * s.sigma,
                upper: s.y + z * s.sigma,
                shrinkage: *sh,
            })
            .collect();
        Self {
            rows,
            mean: report.mu,
            prediction: report.prediction,
            tau: report.tau,
            axis,
            title: None,
        }
    }
}

const WIDTH: f64 = 820.0;
const LABEL_X: f64 = 12.0;
const PLOT_LEFT: f64 = 250.0;
const PLOT_RIGHT: f64 = 580.0;
const TEXT_X: f64 = 600.0;
const ROW: f64 = 30.0;
const TOP: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// "Nice" step (1, 2 or 5 times a power of ten) giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Tick positions (on the plotted scale) and their labels.
pub fn axis_ticks(lo: f64, hi: f64, axis: AxisTransform) -> Vec<(f64, String)> {
    match axis {
        AxisTransform::Identity => {
            let step = nice_step(hi - lo, 6.0);
            let first = (lo / step).ceil() as i64;
            let last = (hi / step).floor() as i64;
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            (first..=last)
                .map(|i| {
                    let x = i as f64 * step;
                    let x = if x == 0.0 { 0.0 } else { x };
                    (x, format!("{:.*}", decimals, x))
                })
                .collect()
        }
        AxisTransform::Exp => {
            // Ratios at powers of two, thinned to at most eight ticks.
            let l2 = std::f64::consts::LN_2;
            let first = (lo / l2).ceil() as i64;
            let last = (hi / l2).floor() as i64;
            let every = (((last - first) as f64 + 1.0) / 8.0).ceil().max(1.0) as i64;
            (first..=last)
                .filter(|i| i.rem_euclid(every) == 0)
                .map(|i| {
                    let ratio = 2f64.powi(i as i32);
                    (i as f64 * l2, ratio_label(ratio))
                })
                .collect()
        }
    }
}

fn ratio_label(r: f64) -> String {
    if r >= 1.0 {
        format!("{r}")
    } else {
        let s = format!("{r:.4}");
        s.trim_end_matches('0').to_string()
    }
}

fn show(x: f64, axis: AxisTransform) -> String {
    match axis {
        AxisTransform::Identity => fmt2(x),
        AxisTransform::Exp => fmt2(x.exp()),
    }
}

fn interval_text(m: f64, lo: f64, hi: f64, axis: AxisTransform) -> String {
    format!("{} [{}, {}]", show(m, axis), show(lo, axis), show(hi, axis))
}

/// Renders the forest plot.
pub fn render_forest(spec: &ForestPlotSpec) -> String {
    let mut lo = spec.mean.ci_lo.min(spec.prediction.ci_lo);
    let mut hi = spec.mean.ci_hi.max(spec.prediction.ci_hi);
    for r in &spec.rows {
        lo = lo.min(r.lower).min(r.shrinkage.ci_lo);
        hi = hi.max(r.upper).max(r.shrinkage.ci_hi);
    }
    lo = lo.min(0.0);
    hi = hi.max(0.0);
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let px = |x: f64| PLOT_LEFT + (x - lo) / (hi - lo) * (PLOT_RIGHT - PLOT_LEFT);

    let n_rows = spec.rows.len() as f64 + 2.0;
    let plot_bottom = TOP + ROW * (n_rows + 0.5);
    let height = plot_bottom + 90.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = &spec.title {
        let _ = writeln!(s, r#"<text x="{LABEL_X}" y="20" font-weight="bold">{}</text>"#, escape(t));
    }
    let level = (spec.mean.level * 100.0).round();
    let _ = writeln!(s, r#"<text x="{LABEL_X}" y="{:.1}" font-weight="bold">study</text>"#, TOP - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="{TEXT_X}" y="{:.1}" font-weight="bold">estimate [{level}% CI]</text>"#,
        TOP - 15.0
    );
    // reference line at no effect
    let _ = writeln!(
        s,
        r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#888888" stroke-dasharray="4,3"/>"##,
        px(0.0),
        TOP - 5.0,
        plot_bottom
    );

    for (i, r) in spec.rows.iter().enumerate() {
        let y = TOP + ROW * (i as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{LABEL_X}" y="{:.2}">{}</text>"#, y + 4.0, escape(&r.label));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="1.5"/>"#,
            px(r.lower),
            px(r.upper)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="black"/>"#,
            px(r.estimate) - 3.5,
            y - 3.5
        );
        let ys = y + 8.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{ys:.2}" x2="{:.2}" y2="{ys:.2}" stroke="#999999" stroke-width="1.5"/>"##,
            px(r.shrinkage.ci_lo),
            px(r.shrinkage.ci_hi)
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{ys:.2}" r="2.5" fill="#999999"/>"##,
            px(r.shrinkage.median)
        );
        let _ = writeln!(
            s,
            r#"<text x="{TEXT_X}" y="{:.2}">{}</text>"#,
            y + 4.0,
            interval_text(r.estimate, r.lower, r.upper, spec.axis)
        );
    }

    let ym = TOP + ROW * (spec.rows.len() as f64 + 0.5);
    let m = &spec.mean;
    let _ = writeln!(s, r#"<text x="{LABEL_X}" y="{:.2}" font-weight="bold">mean</text>"#, ym + 4.0);
    let _ = writeln!(
        s,
        r#"<polygon points="{:.2},{ym:.2} {:.2},{:.2} {:.2},{ym:.2} {:.2},{:.2}" fill="black"/>"#,
        px(m.ci_lo),
        px(m.median),
        ym - 6.0,
        px(m.ci_hi),
        px(m.median),
        ym + 6.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{TEXT_X}" y="{:.2}">{}</text>"#,
        ym + 4.0,
        interval_text(m.median, m.ci_lo, m.ci_hi, spec.axis)
    );

    let yp = ym + ROW;
    let p = &spec.prediction;
    let _ = writeln!(s, r#"<text x="{LABEL_X}" y="{:.2}" font-weight="bold">prediction</text>"#, yp + 4.0);
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="6" fill="#777777"/>"##,
        px(p.ci_lo),
        yp - 3.0,
        px(p.ci_hi) - px(p.ci_lo)
    );
    let _ = writeln!(
        s,
        r#"<text x="{TEXT_X}" y="{:.2}">{}</text>"#,
        yp + 4.0,
        interval_text(p.median, p.ci_lo, p.ci_hi, spec.axis)
    );

    // horizontal axis
    let _ = writeln!(
        s,
        r#"<line x1="{PLOT_LEFT:.2}" y1="{plot_bottom:.2}" x2="{PLOT_RIGHT:.2}" y2="{plot_bottom:.2}" stroke="black"/>"#
    );
    for (x, label) in axis_ticks(lo, hi, spec.axis) {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{plot_bottom:.2}" x2="{0:.2}" y2="{1:.2}" stroke="black"/>"#,
            px(x),
            plot_bottom + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            plot_bottom + 20.0,
            label
        );
    }
    let t = &spec.tau;
    let _ = writeln!(
        s,
        r#"<text x="{LABEL_X}" y="{:.2}">Heterogeneity (tau): {} [{}, {}]</text>"#,
        plot_bottom + 50.0,
        fmt2(t.median),
        fmt2(t.ci_lo),
        fmt2(t.ci_hi)
    );
    s.push_str("</svg>\n");
    s
}

/// Line plot of the posterior density of τ, with the prior density dashed
/// when the prior is proper.
pub fn render_tau_density(gp: &GridPosterior, prior: &HeterogeneityPrior) -> String {
    let (w, h) = (600.0, 360.0);
    let (left, right, top, bottom) = (60.0, 580.0, 20.0, 320.0);
    let upper = gp.tau_quantile(0.995).max(f64::MIN_POSITIVE);
    let n = 200;
    let xs: Vec<f64> = (0..=n).map(|i| upper * i as f64 / n as f64).collect();
    let post: Vec<f64> = xs.iter().map(|&x| gp.tau_density(x)).collect();
    let pri: Option<Vec<f64>> = if prior.is_proper() {
        Some(xs.iter().map(|&x| prior.density(x).unwrap_or(0.0)).collect())
    } else {
        None
    };
    let ymax = post
        .iter()
        .chain(pri.iter().flatten())
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.05;
    let px = |x: f64| left + x / upper * (right - left);
    let py = |y: f64| bottom - y.min(ymax) / ymax * (bottom - top);
    let path = |ys: &[f64]| -> String {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(if y.is_finite() { y } else { ymax })))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    if let Some(pr) = &pri {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#888888" stroke-dasharray="5,4"/>"##,
            path(pr)
        );
    }
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#, path(&post));
    for (x, label) in axis_ticks(0.0, upper, AxisTransform::Identity) {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{bottom}" x2="{0:.2}" y2="{1}" stroke="black"/><text x="{0:.2}" y="{2}" text-anchor="middle">{label}</text>"#,
            px(x),
            bottom + 5.0,
            bottom + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">heterogeneity tau</text>"#,
        0.5 * (left + right),
        h - 5.0
    );
    s.push_str("</svg>\n");
    s
}
