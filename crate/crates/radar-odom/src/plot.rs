//! Self-contained SVG overlay of estimated and ground-truth XY paths.

use std::fmt::Write as _;
use std::path::Path;

use radar_odom_core::{Error as CoreError, Trajectory};

use crate::formats::FormatError;

pub const ESTIMATE_COLOR: &str = "#d62728";
pub const GROUND_TRUTH_COLOR: &str = "#1f77b4";

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

// 1, 2 or 5 times a power of ten, giving roughly `target` intervals over `span`.
fn grid_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(1e-9);
    let base = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * base)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * base)
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.min_x) * self.scale,
            MARGIN + (self.max_y - y) * self.scale,
        )
    }
}

fn path(out: &mut String, traj: &Trajectory, frame: &Frame, color: &str, label: &str) {
    let pts: Vec<(f64, f64)> = traj.poses().map(|p| frame.px(p.x, p.y)).collect();
    let _ = writeln!(out, r#"<g id="{label}">"#);
    if pts.len() > 1 {
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points=""#
        );
        for (i, (x, y)) in pts.iter().enumerate() {
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(out, "{sep}{x:.2},{y:.2}");
        }
        out.push_str("\"/>\n");
    }
    let (sx, sy) = pts[0];
    let _ = writeln!(
        out,
        r#"<circle class="marker start" cx="{sx:.2}" cy="{sy:.2}" r="5" fill="{color}"/>"#
    );
    if pts.len() > 1 {
        let (ex, ey) = pts[pts.len() - 1];
        let _ = writeln!(
            out,
            r#"<rect class="marker end" x="{:.2}" y="{:.2}" width="10" height="10" fill="none" stroke="{color}" stroke-width="2"/>"#,
            ex - 5.0,
            ey - 5.0
        );
    }
    out.push_str("</g>\n");
}

/// Renders `estimate`, and `ground_truth` if given, on a shared metric grid.
pub fn render_svg(estimate: &Trajectory, ground_truth: Option<&Trajectory>) -> Result<String, CoreError> {
    if estimate.is_empty() || ground_truth.is_some_and(|g| g.is_empty()) {
        return Err(CoreError::Input("cannot plot an empty trajectory".into()));
    }
    let all = || estimate.poses().chain(ground_truth.into_iter().flat_map(|g| g.poses()));
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in all() {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let pad = 0.05 * span;
    let (min_x, max_x, min_y, max_y) = (min_x - pad, max_x + pad, min_y - pad, max_y + pad);
    let span = (max_x - min_x).max(max_y - min_y);
    let frame = Frame {
        min_x,
        max_y,
        scale: (SIZE - 2.0 * MARGIN) / span,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let step = grid_step(span, 8.0);
    let _ = writeln!(out, r##"<g id="grid" stroke="#dddddd" stroke-width="1">"##);
    let mut gx = (min_x / step).ceil() * step;
    while gx <= min_x + span {
        let (x, _) = frame.px(gx, 0.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}"/>"#,
            SIZE - MARGIN
        );
        gx += step;
    }
    let mut gy = (min_y / step).ceil() * step;
    while gy <= min_y + span {
        let (_, y) = frame.px(0.0, gy);
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
            SIZE - MARGIN
        );
        gy += step;
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.0}" font-family="sans-serif" font-size="12">grid {step} m</text>"#,
        SIZE - 12.0
    );

    if let Some(gt) = ground_truth {
        path(&mut out, gt, &frame, GROUND_TRUTH_COLOR, "ground_truth");
    }
    path(&mut out, estimate, &frame, ESTIMATE_COLOR, "estimate");
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(path: &Path, estimate: &Trajectory, ground_truth: Option<&Trajectory>) -> Result<(), FormatError> {
    let svg = render_svg(estimate, ground_truth)?;
    std::fs::write(path, svg).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}
