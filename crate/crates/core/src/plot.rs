//! Minimal SVG line plots: stacked panels, several traces per panel.

use std::fmt::Write as _;

use crate::dsp::SampleSeries;

const WIDTH: f64 = 960.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN: f64 = 48.0;
const MAX_POINTS: usize = 1500;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub traces: Vec<(String, SampleSeries)>,
}

/// Time span drawn behind every panel, e.g. a stimulus segment.
#[derive(Debug, Clone)]
pub struct Shade {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

/// Bucket maxima so long traces keep their peaks at screen resolution.
fn decimate(x: &SampleSeries) -> Vec<(f64, f64)> {
    let n = x.len();
    let bucket = n.div_ceil(MAX_POINTS).max(1);
    x.samples()
        .chunks(bucket)
        .enumerate()
        .map(|(i, c)| {
            let t = (i * bucket) as f64 / x.rate();
            (t, c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(title: &str, panels: &[Panel], shades: &[Shade]) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL_HEIGHT + MARGIN);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="15">{}</text>"#,
        MARGIN,
        escape(title)
    );
    let plot_w = WIDTH - 2.0 * MARGIN;
    for (p, panel) in panels.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL_HEIGHT + MARGIN);
        let traces: Vec<Vec<(f64, f64)>> = panel.traces.iter().map(|(_, s)| decimate(s)).collect();
        let t_max = panel
            .traces
            .iter()
            .map(|(_, s)| s.duration_s())
            .fold(0.0, f64::max)
            .max(1e-9);
        let finite = traces
            .iter()
            .flatten()
            .map(|p| p.1)
            .filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let (lo, hi) = if lo < hi {
            (lo, hi)
        } else {
            (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
        };
        let x = |t: f64| MARGIN + plot_w * t / t_max;
        let y = |v: f64| top + PANEL_HEIGHT * (1.0 - (v - lo) / (hi - lo));

        let _ = writeln!(svg, r#"<g class="panel">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{:.1}">{}</text>"#,
            top - 6.0,
            escape(&panel.title)
        );
        for s in shades.iter().filter(|s| s.start_s < t_max) {
            let _ = writeln!(
                svg,
                r##"<rect class="shade" x="{:.1}" y="{top:.1}" width="{:.1}" height="{PANEL_HEIGHT}" fill="#eeeeee"><title>{}</title></rect>"##,
                x(s.start_s),
                x(s.end_s.min(t_max)) - x(s.start_s),
                escape(&s.label)
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{top:.1}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.1}">{}</text>"#,
            top + 10.0,
            fmt_tick(hi)
        );
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.1}">{}</text>"#,
            top + PANEL_HEIGHT,
            fmt_tick(lo)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{} s</text>"#,
            WIDTH - MARGIN,
            top + PANEL_HEIGHT + 14.0,
            fmt_tick(t_max)
        );
        for (k, ((label, _), pts)) in panel.traces.iter().zip(&traces).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let mut points = String::new();
            for &(t, v) in pts.iter().filter(|p| p.1.is_finite()) {
                let _ = write!(points, "{:.1},{:.1} ", x(t), y(v));
            }
            let _ = writeln!(
                svg,
                r#"<polyline class="trace" fill="none" stroke="{color}" stroke-width="1" points="{}"><title>{}</title></polyline>"#,
                points.trim_end(),
                escape(label)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN - 4.0,
                top + 16.0 + 14.0 * k as f64,
                escape(label)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
