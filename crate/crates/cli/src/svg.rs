//! Minimal SVG heatmaps for grid outputs.

use std::fmt::Write;

use georisk_core::RegularGrid;

const RAMP: [(u8, u8, u8); 9] = [
    (0x44, 0x01, 0x54),
    (0x47, 0x2d, 0x7b),
    (0x3b, 0x52, 0x8b),
    (0x2c, 0x72, 0x8e),
    (0x21, 0x91, 0x8c),
    (0x28, 0xae, 0x80),
    (0x5e, 0xc9, 0x62),
    (0xad, 0xdc, 0x30),
    (0xfd, 0xe7, 0x25),
];

const MASKED: &str = "#d9d9d9";
const CELL: f64 = 8.0;
const MARGIN: f64 = 40.0;
const LEGEND_W: f64 = 90.0;

/// Color for `t` in `[0, 1]`, linearly interpolated between the ramp stops.
pub fn color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (RAMP.len() - 1) as f64;
    let k = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - k as f64;
    let (a, b) = (RAMP[k], RAMP[k + 1]);
    let mix = |x: u8, y: u8| (x as f64 + f * (y as f64 - x as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of `values` on `grid`; the color scale spans `range`, or the data range when `None`.
pub fn heatmap(grid: &RegularGrid, values: &[Option<f64>], title: &str, range: Option<(f64, f64)>) -> String {
    let [nx, ny] = grid.dims();
    let (lo, hi) = range.unwrap_or_else(|| {
        let finite = values.iter().flatten().copied();
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) }
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (nx as f64 * CELL, ny as f64 * CELL);
    let total_w = w + 2.0 * MARGIN + LEGEND_W;
    let total_h = h + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN + w / 2.0,
        MARGIN / 2.0 + 5.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for j in 0..ny {
        for i in 0..nx {
            let fill = match values.get(j * nx + i).copied().flatten() {
                Some(v) => color((v - lo) / span),
                None => MASKED.to_string(),
            };
            // row 0 is the southern edge
            let x = MARGIN + i as f64 * CELL;
            let y = MARGIN + (ny - 1 - j) as f64 * CELL;
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#);
        }
    }
    let _ = writeln!(s, "</g>");

    let lx = MARGIN + w + 20.0;
    let _ = writeln!(s, "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">");
    for (k, c) in RAMP.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<stop offset="{}" stop-color="{}"/>"#,
            k as f64 / (RAMP.len() - 1) as f64,
            format_args!("#{:02x}{:02x}{:02x}", c.0, c.1, c.2)
        );
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(s, r#"<rect x="{lx}" y="{MARGIN}" width="16" height="{h}" fill="url(#ramp)" stroke="black" stroke-width="0.5"/>"#);
    for (frac, v) in [(0.0, lo), (0.5, lo + 0.5 * (hi - lo)), (1.0, hi)] {
        let y = MARGIN + h * (1.0 - frac) + 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 22.0,
            format_label(v)
        );
    }
    let (o, sp) = (grid.origin(), grid.spacing());
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10">x: {} to {}, y: {} to {}</text>"#,
        MARGIN + h + 18.0,
        format_label(o[0]),
        format_label(o[0] + sp[0] * (nx.max(2) - 1) as f64),
        format_label(o[1]),
        format_label(o[1] + sp[1] * (ny.max(2) - 1) as f64),
    );
    s.push_str("</svg>\n");
    s
}

fn format_label(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e5) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.3e}")
    }
}
