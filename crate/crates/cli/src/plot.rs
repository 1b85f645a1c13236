//! Learning-curve plots as standalone SVG.

use std::fmt::Write as _;

use lfoeq::analysis::SeedSummary;
use lfoeq::imitation::LearningCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Per-step mean and standard deviation across seeds, over the common
/// prefix of the curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub steps: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Band {
    pub fn from_curves(label: &str, curves: &[LearningCurve]) -> Option<Self> {
        let len = curves.iter().map(|c| c.points.len()).min()?;
        if len == 0 {
            return None;
        }
        let mut band = Band { label: label.to_string(), steps: vec![], mean: vec![], std: vec![] };
        for i in 0..len {
            let ys: Vec<f64> = curves.iter().map(|c| c.points[i].eval_return_mean).collect();
            let s = SeedSummary::of(&ys);
            band.steps.push(curves[0].points[i].env_steps as f64);
            band.mean.push(s.mean);
            band.std.push(s.std);
        }
        Some(band)
    }
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean line with a shaded ±std band per series, x = environment steps.
pub fn render(title: &str, bands: &[Band]) -> String {
    let xs = bands.iter().flat_map(|b| b.steps.iter().copied());
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let ys = bands
        .iter()
        .flat_map(|b| b.mean.iter().zip(&b.std).flat_map(|(m, s)| [m - s, m + s]));
    let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi.max(x_lo + 1.0)) } else { (0.0, 1.0) };
    let (y_lo, y_hi) = if y_lo.is_finite() { nice_range(y_lo, y_hi) } else { (0.0, 1.0) };
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // axes
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.0}</text>"#,
            px(fx),
            y0 + 16.0,
            fx
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.1}</text>"#,
            x0 - 6.0,
            py(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">environment steps</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" font-family="sans-serif" font-size="12">average episode return</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, b) in bands.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let upper = b.steps.iter().zip(b.mean.iter().zip(&b.std)).map(|(x, (m, s))| (px(*x), py(m + s)));
        let lower = b.steps.iter().zip(b.mean.iter().zip(&b.std)).rev().map(|(x, (m, s))| (px(*x), py(m - s)));
        let poly: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
        let line: Vec<String> = b.steps.iter().zip(&b.mean).map(|(x, m)| format!("{:.2},{:.2}", px(*x), py(*m))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH - MARGIN - 84.0,
            ly + 4.0,
            escape(&b.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
