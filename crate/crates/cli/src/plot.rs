//! Static phase-plane SVG: trajectories in the `(x1, x2)` plane with the
//! safety line and the target ellipse overlaid.

use anyhow::bail;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

/// Render trajectories (each a list of state rows, first two coordinates
/// used) with the line `x2 = safety_level` and the ellipse
/// `x1^2/a^2 + x2^2/b^2 = 1`.
pub fn phase_plane_svg(
    trajectories: &[Vec<Vec<f64>>],
    safety_level: f64,
    ellipse_a: f64,
    ellipse_b: f64,
) -> anyhow::Result<String> {
    for (i, t) in trajectories.iter().enumerate() {
        if t.iter().any(|row| row.len() < 2) {
            bail!("trajectory {i} has states with fewer than 2 coordinates");
        }
    }
    // Data bounds include the overlays so they is always visible.
    let mut x_lo = -ellipse_a;
    let mut x_hi = ellipse_a;
    let mut y_lo = -ellipse_b.min(2.0 * safety_level.abs().max(1.0));
    let mut y_hi = safety_level.max(ellipse_b.min(2.0 * safety_level.abs().max(1.0)));
    for t in trajectories {
        for row in t {
            x_lo = x_lo.min(row[0]);
            x_hi = x_hi.max(row[0]);
            y_lo = y_lo.min(row[1]);
            y_hi = y_hi.max(row[1]);
        }
    }
    let pad_x = 0.08 * (x_hi - x_lo).max(1e-6);
    let pad_y = 0.15 * (y_hi - y_lo).max(1e-6);
    let frame = Frame {
        x_lo: x_lo - pad_x,
        x_hi: x_hi + pad_x,
        y_lo: y_lo - pad_y,
        y_hi: y_hi + pad_y,
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes box.
    svg.push_str(&format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#444\"/>\n",
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    ));

    // Safety line x2 = level.
    let (sx0, sy) = frame.to_px(frame.x_lo, safety_level);
    let (sx1, _) = frame.to_px(frame.x_hi, safety_level);
    svg.push_str(&format!(
        "<line x1=\"{sx0:.2}\" y1=\"{sy:.2}\" x2=\"{sx1:.2}\" y2=\"{sy:.2}\" \
         stroke=\"#c00\" stroke-width=\"1.5\" stroke-dasharray=\"8 4\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#c00\">x2 = {safety_level}</text>\n",
        sx0 + 6.0,
        sy - 6.0
    ));

    // Target ellipse.
    let (cx, cy) = frame.to_px(0.0, 0.0);
    let (ex, _) = frame.to_px(ellipse_a, 0.0);
    let (_, ey) = frame.to_px(0.0, ellipse_b);
    svg.push_str(&format!(
        "<ellipse cx=\"{cx:.2}\" cy=\"{cy:.2}\" rx=\"{:.2}\" ry=\"{:.2}\" \
         fill=\"none\" stroke=\"#080\" stroke-width=\"1.5\"/>\n",
        (ex - cx).abs(),
        (cy - ey).abs()
    ));

    // Trajectories.
    let palette = ["#1f77b4", "#2ca02c", "#111111", "#9467bd", "#ff7f0e", "#8c564b"];
    for (i, t) in trajectories.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        let color = palette[i % palette.len()];
        let points: Vec<String> = t
            .iter()
            .map(|row| {
                let (px, py) = frame.to_px(row[0], row[1]);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" \
             stroke-opacity=\"0.8\"/>\n",
            points.join(" ")
        ));
        // Mark the endpoint.
        let (px, py) = frame.to_px(t[t.len() - 1][0], t[t.len() - 1][1]);
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.2\" fill=\"{color}\"/>\n"
        ));
    }

    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#222\">x1</text>\n",
        WIDTH / 2.0,
        HEIGHT - MARGIN / 3.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#222\" \
         transform=\"rotate(-90 {x:.2} {y:.2})\" >x2</text>\n",
        MARGIN / 3.0,
        HEIGHT / 2.0,
        x = MARGIN / 3.0,
        y = HEIGHT / 2.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
