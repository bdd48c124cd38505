//! Static SVG figures: the xy, xz and yz orthographic projections of one or
//! more trajectories, one color per condition tag.

use std::fmt::Write;

use crate::trajectory::Trajectory;

const PANEL: f64 = 320.0;
const MARGIN: f64 = 28.0;
/// Polylines are decimated to at most this many vertices.
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 6] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
];
const PROJECTIONS: [(usize, usize, &str); 3] = [(0, 1, "xy"), (0, 2, "xz"), (1, 2, "yz")];

pub fn render_svg(trajectories: &[&Trajectory]) -> String {
    let mut tags: Vec<&str> = Vec::new();
    for t in trajectories {
        if !tags.contains(&t.condition_tag.as_str()) {
            tags.push(&t.condition_tag);
        }
    }
    let color =
        |tag: &str| PALETTE[tags.iter().position(|t| *t == tag).unwrap_or(0) % PALETTE.len()];

    let width = 3.0 * PANEL + 4.0 * MARGIN;
    let legend_h = 18.0 * tags.len() as f64 + MARGIN;
    let height = PANEL + 2.0 * MARGIN + legend_h;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (p, &(a, b, name)) in PROJECTIONS.iter().enumerate() {
        let x0 = MARGIN + p as f64 * (PANEL + MARGIN);
        let y0 = MARGIN;
        let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for t in trajectories {
            for row in t.coords.row_iter() {
                lo_a = lo_a.min(row[a]);
                hi_a = hi_a.max(row[a]);
                lo_b = lo_b.min(row[b]);
                hi_b = hi_b.max(row[b]);
            }
        }
        // Equal scale on both axes so the projection is not distorted.
        let span = (hi_a - lo_a).max(hi_b - lo_b).max(1e-12);
        let (mid_a, mid_b) = ((lo_a + hi_a) / 2.0, (lo_b + hi_b) / 2.0);
        let sx = |v: f64| x0 + PANEL / 2.0 + (v - mid_a) / span * (PANEL - 8.0);
        let sy = |v: f64| y0 + PANEL / 2.0 - (v - mid_b) / span * (PANEL - 8.0);

        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{name}</text>"#,
            x0 + PANEL / 2.0,
            y0 - 8.0
        );
        for t in trajectories {
            let stride = t.len().div_ceil(MAX_POINTS).max(1);
            let mut points = String::new();
            for row in t.coords.row_iter().step_by(stride) {
                let _ = write!(points, "{:.2},{:.2} ", sx(row[a]), sy(row[b]));
            }
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="0.8" stroke-opacity="0.8" points="{}"/>"#,
                color(&t.condition_tag),
                points.trim_end()
            );
        }
    }

    for (i, tag) in tags.iter().enumerate() {
        let y = PANEL + 2.0 * MARGIN + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 10.0,
            color(tag),
            MARGIN + 18.0,
            y,
            escape(tag)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
