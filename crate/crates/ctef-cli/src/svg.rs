//! Self-contained SVG output: box plots for benchmark error distributions
//! and scatter overlays with fitted ellipse outlines. Geometry is computed
//! here; no plotting dependency.

use std::fmt::Write as _;

use ctef::Ellipsoid;
use nalgebra::{DMatrix, DVector};

/// Five-number summary with Tukey whiskers at 1.5 times the interquartile
/// range; points beyond the whiskers are outliers.
#[derive(Debug, Clone)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (the numpy default).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let position = q * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    let fraction = position - lower as f64;
    sorted[lower] + fraction * (sorted[upper] - sorted[lower])
}

/// Computes box-plot statistics, ignoring non-finite values. Returns `None`
/// when no finite values remain.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut sorted: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let low_fence = q1 - 1.5 * iqr;
    let high_fence = q3 + 1.5 * iqr;
    let whisker_low = sorted
        .iter()
        .cloned()
        .find(|&v| v >= low_fence)
        .unwrap_or(q1);
    let whisker_high = sorted
        .iter()
        .rev()
        .cloned()
        .find(|&v| v <= high_fence)
        .unwrap_or(q3);
    let outliers = sorted
        .iter()
        .cloned()
        .filter(|&v| v < whisker_low || v > whisker_high)
        .collect();
    Some(BoxStats {
        n: sorted.len(),
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders one box per label into an SVG document.
pub fn box_plot_svg(title: &str, x_label: &str, labels: &[String], stats: &[Option<BoxStats>]) -> String {
    assert_eq!(labels.len(), stats.len());
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for s in stats.iter().flatten() {
        min_v = min_v.min(s.whisker_low).min(s.outliers.iter().cloned().fold(f64::INFINITY, f64::min));
        max_v = max_v.max(s.whisker_high).max(s.outliers.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    if !min_v.is_finite() || !max_v.is_finite() {
        min_v = 0.0;
        max_v = 1.0;
    }
    if max_v - min_v < 1e-300 {
        max_v = min_v + 1.0;
    }
    let pad = 0.05 * (max_v - min_v);
    min_v -= pad;
    max_v += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - min_v) / (max_v - min_v));
    let slot = plot_w / labels.len() as f64;
    let box_w = (0.5 * slot).min(80.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    // Y ticks.
    for k in 0..=5 {
        let v = min_v + (max_v - min_v) * k as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_LEFT}" y2="{y:.1}" stroke="black"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        x_label
    );

    for (i, (label, stat)) in labels.iter().zip(stats.iter()).enumerate() {
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_TOP + plot_h + 20.0,
            label
        );
        let Some(stat) = stat else {
            let _ = writeln!(
                svg,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">no data</text>"#,
                MARGIN_TOP + plot_h / 2.0
            );
            continue;
        };
        let (yq1, yq3) = (y_of(stat.q1), y_of(stat.q3));
        let (ylo, yhi) = (y_of(stat.whisker_low), y_of(stat.whisker_high));
        let ymed = y_of(stat.median);
        let half = box_w / 2.0;
        // Whiskers with caps.
        let _ = writeln!(svg, r#"<line x1="{cx:.1}" y1="{yhi:.1}" x2="{cx:.1}" y2="{yq3:.1}" stroke="black"/>"#);
        let _ = writeln!(svg, r#"<line x1="{cx:.1}" y1="{yq1:.1}" x2="{cx:.1}" y2="{ylo:.1}" stroke="black"/>"#);
        for y in [ylo, yhi] {
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        // Box and median.
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{yq3:.1}" width="{box_w:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            (yq1 - yq3).max(0.5)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{ymed:.1}" x2="{:.1}" y2="{ymed:.1}" stroke="#d95f02" stroke-width="2"/>"##,
            cx - half,
            cx + half
        );
        for &o in &stat.outliers {
            let _ = writeln!(
                svg,
                r#"<circle cx="{cx:.1}" cy="{:.1}" r="2" fill="none" stroke="black"/>"#,
                y_of(o)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Scatter of 2-dimensional points colored by cluster, with the outline of
/// each fitted ellipse drawn on top.
pub fn cluster_scatter_svg(
    data: &DMatrix<f64>,
    assignments: &[usize],
    ellipses: &[Option<&Ellipsoid>],
) -> String {
    assert_eq!(data.ncols(), 2, "scatter overlay requires 2-d data");
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut consider = |x: f64, y: f64| {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    };
    for i in 0..data.nrows() {
        consider(data[(i, 0)], data[(i, 1)]);
    }
    let outline_points: Vec<(usize, Vec<(f64, f64)>)> = ellipses
        .iter()
        .enumerate()
        .filter_map(|(j, e)| e.map(|e| (j, e)))
        .map(|(j, e)| {
            let pts: Vec<(f64, f64)> = (0..=256)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
                    let eta = DVector::from_vec(vec![t.cos(), t.sin()]);
                    let x = ctef::geometry::sample_surface(e, &eta).expect("unit direction");
                    (x[0], x[1])
                })
                .collect();
            (j, pts)
        })
        .collect();
    for (_, pts) in &outline_points {
        for &(x, y) in pts {
            consider(x, y);
        }
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let scale = (plot_w / span_x).min(plot_h / span_y) * 0.95;
    let cx = MARGIN_LEFT + plot_w / 2.0;
    let cy = MARGIN_TOP + plot_h / 2.0;
    let sx = |x: f64| cx + (x - 0.5 * (min_x + max_x)) * scale;
    let sy = |y: f64| cy - (y - 0.5 * (min_y + max_y)) * scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for i in 0..data.nrows() {
        let color = PALETTE[assignments[i] % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
            sx(data[(i, 0)]),
            sy(data[(i, 1)])
        );
    }
    for (j, pts) in &outline_points {
        let color = PALETTE[*j % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}
