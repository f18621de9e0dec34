//! Ternary trajectory plot: the 2-simplex drawn as an equilateral triangle,
//! one polyline per run, a red square on each start and a black circle on
//! each end. Output is deterministic byte-for-byte for identical inputs
//! (fixed palette, fixed `{:.3}` coordinate formatting).

use evodyn_core::TrajectoryRecord;
use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const MARGIN: f64 = 60.0;
const SIDE: f64 = WIDTH - 2.0 * MARGIN;
const SQRT3_2: f64 = 0.866_025_403_784_438_6;
/// Keep at most this many points per polyline.
const MAX_POINTS: usize = 500;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b",
];

fn height() -> f64 {
    2.0 * MARGIN + SIDE * SQRT3_2
}

/// Map a 3-strategy state to canvas coordinates. Strategies 1, 2, 3 sit at
/// the triangle corners (0,0), (1,0), (0.5, sqrt(3)/2) in barycentric terms;
/// the y axis is flipped for SVG.
fn project(x: &[f64]) -> (f64, f64) {
    let px = x[1] + 0.5 * x[2];
    let py = SQRT3_2 * x[2];
    (MARGIN + SIDE * px, MARGIN + SIDE * SQRT3_2 - SIDE * py)
}

pub struct PlotRun<'a> {
    pub rule_label: &'a str,
    pub rule_index: usize,
    pub trajectory: &'a TrajectoryRecord,
}

/// Render runs over a 3-strategy simplex. Panics if a state is not
/// 3-dimensional; callers guard on `n == 3`.
pub fn ternary_svg(title: &str, runs: &[PlotRun<'_>]) -> String {
    let h = height();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{h:.0}" viewBox="0 0 {WIDTH:.0} {h:.0}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{WIDTH:.0}" height="{h:.0}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        xml_escape(title)
    );

    // Triangle outline and corner labels.
    let corners = [
        project(&[1.0, 0.0, 0.0]),
        project(&[0.0, 1.0, 0.0]),
        project(&[0.0, 0.0, 1.0]),
    ];
    let _ = writeln!(
        svg,
        r##"<polygon points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        corners[0].0, corners[0].1, corners[1].0, corners[1].1, corners[2].0, corners[2].1
    );
    let label_offsets = [(-14.0, 16.0), (14.0, 16.0), (0.0, -10.0)];
    for (i, ((cx, cy), (dx, dy))) in corners.iter().zip(label_offsets).enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            cx + dx,
            cy + dy,
            i + 1
        );
    }

    // Legend: one entry per distinct rule index, in first-appearance order.
    let mut seen: Vec<(usize, &str)> = Vec::new();
    for run in runs {
        if !seen.iter().any(|(i, _)| *i == run.rule_index) {
            seen.push((run.rule_index, run.rule_label));
        }
    }
    for (slot, (rule_index, label)) in seen.iter().enumerate() {
        let color = PALETTE[rule_index % PALETTE.len()];
        let y = MARGIN + 20.0 * slot as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}" stroke-width="2"/>"#,
            10.0,
            y,
            34.0,
            y,
            color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
            40.0,
            y + 4.0,
            xml_escape(label)
        );
    }

    for run in runs {
        let states = &run.trajectory.states;
        if states.is_empty() {
            continue;
        }
        let color = PALETTE[run.rule_index % PALETTE.len()];
        let stride = states.len().div_ceil(MAX_POINTS).max(1);
        let mut points = String::new();
        for (k, state) in states.iter().enumerate() {
            if k % stride != 0 && k != states.len() - 1 {
                continue;
            }
            let (x, y) = project(state.entries());
            let _ = write!(points, "{x:.3},{y:.3} ");
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
            points.trim_end(),
            color
        );
    }

    // Markers drawn last so they sit on top of every path.
    for run in runs {
        let states = &run.trajectory.states;
        if states.is_empty() {
            continue;
        }
        let (sx, sy) = project(states[0].entries());
        let _ = writeln!(
            svg,
            r##"<rect x="{:.3}" y="{:.3}" width="6" height="6" fill="#d62728"/>"##,
            sx - 3.0,
            sy - 3.0
        );
        let (ex, ey) = project(states[states.len() - 1].entries());
        let _ = writeln!(
            svg,
            r##"<circle cx="{ex:.3}" cy="{ey:.3}" r="3.5" fill="#000000"/>"##
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
