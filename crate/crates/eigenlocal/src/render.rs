//! SVG output: per-triangle flat-shaded eigenfunction heatmaps and log-log
//! localization plots. All geometry is written with fixed decimal precision
//! so identical inputs produce byte-identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sweep::{format_g, PowerLawFit};

/// Diverging colormap on [-vmax, vmax]: blue through white to red, with
/// lightness monotone on each half and the neutral color exactly at 0.
#[derive(Debug, Clone)]
pub struct ColorMap {
    pub vmax: f64,
}

impl ColorMap {
    pub fn new(vmax: f64) -> Result<Self> {
        if !(vmax > 0.0) {
            return Err(Error::Parameter(format!(
                "colormap vmax must be positive, got {vmax}"
            )));
        }
        Ok(ColorMap { vmax })
    }

    /// RGB for a value, clamped to [-vmax, vmax].
    pub fn rgb(&self, v: f64) -> [u8; 3] {
        let t = (v / self.vmax).clamp(-1.0, 1.0);
        let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s;
        let (lo, hi): ([f64; 3], [f64; 3]) = if t < 0.0 {
            // white -> blue as |t| grows
            ([255.0, 255.0, 255.0], [33.0, 68.0, 170.0])
        } else {
            // white -> red
            ([255.0, 255.0, 255.0], [178.0, 24.0, 43.0])
        };
        let s = t.abs();
        [
            lerp(lo[0], hi[0], s).round() as u8,
            lerp(lo[1], hi[1], s).round() as u8,
            lerp(lo[2], hi[2], s).round() as u8,
        ]
    }

    pub fn hex(&self, v: f64) -> String {
        let [r, g, b] = self.rgb(v);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.3}")
}

/// Render a P1 field as one filled polygon per triangle (flat fill at the
/// vertex-average value). `u` is expected normalized; the color scale is
/// vmax = max |u|.
pub fn render_mode_svg(mesh: &Mesh, u: &[f64]) -> Result<String> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::Parameter(format!(
            "field has {} entries for a mesh with {} vertices",
            u.len(),
            mesh.n_vertices()
        )));
    }
    let vmax = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cmap = ColorMap::new(if vmax > 0.0 { vmax } else { 1.0 })?;
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &mesh.vertices {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let pad = 0.02 * (xmax - xmin).max(ymax - ymin).max(1e-12);
    let width = 800.0;
    let scale = (width - 2.0) / (xmax - xmin + 2.0 * pad);
    let height = ((ymax - ymin + 2.0 * pad) * scale + 2.0).ceil();
    // SVG y grows downward; flip
    let tx = |x: f64| (x - xmin + pad) * scale + 1.0;
    let ty = |y: f64| (ymax + pad - y) * scale + 1.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    for tri in &mesh.triangles {
        let avg = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        let color = cmap.hex(avg);
        let pts: Vec<String> = tri
            .iter()
            .map(|&v| {
                let p = mesh.vertices[v];
                format!("{},{}", fmt_coord(tx(p.x)), fmt_coord(ty(p.y)))
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" stroke=\"{color}\" stroke-width=\"0.4\"/>",
            pts.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render positive (x, y) points on log-log axes with the fitted line and
/// a "y = a x^b" annotation.
pub fn render_loglog_svg(points: &[(f64, f64)], fit: &PowerLawFit, title: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Parameter("log-log plot needs at least one point".into()));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Parameter(format!(
                "log-log plot requires positive points, got ({x}, {y})"
            )));
        }
    }
    let (width, height) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let pad_range = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.08 * span, hi + 0.08 * span)
    };
    let (x0, x1) = pad_range(
        lx.iter().cloned().fold(f64::INFINITY, f64::min),
        lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = pad_range(
        ly.iter().cloned().fold(f64::INFINITY, f64::min),
        ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |l: f64| ml + (l - x0) / (x1 - x0) * (width - ml - mr);
    let py = |l: f64| height - mb - (l - y0) / (y1 - y0) * (height - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    // axes
    let _ = writeln!(
        svg,
        "<path d=\"M {ml} {mt} L {ml} {} L {} {}\" fill=\"none\" stroke=\"#000000\"/>",
        height - mb,
        width - mr,
        height - mb
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>",
        width / 2.0,
        xml_escape(title)
    );
    // fitted line across the x range
    let fit_y = |l: f64| fit.a.ln() + fit.b * l;
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#b2182b\" stroke-width=\"1.5\"/>",
        fmt_coord(px(x0)),
        fmt_coord(py(fit_y(x0))),
        fmt_coord(px(x1)),
        fmt_coord(py(fit_y(x1)))
    );
    for (&x, &y) in lx.iter().zip(&ly) {
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#2166ac\"/>",
            fmt_coord(px(x)),
            fmt_coord(py(y))
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
        ml + 12.0,
        mt + 20.0,
        xml_escape(&fit_annotation(fit))
    );
    // axis tick labels at the data extremes
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">h (log scale)</text>",
        width / 2.0,
        height - 12.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Annotation in the paper's style, e.g. "y = 11.25x^3.909".
pub fn fit_annotation(fit: &PowerLawFit) -> String {
    format!("y = {}x^{}", format_g(fit.a, 4), format_g(fit.b, 4))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Documented output name: {family}_h{h}_mode{i}_{kind}.svg
pub fn output_filename(family: &str, h: f64, mode: usize, kind: &str) -> String {
    format!("{family}_h{h}_mode{mode}_{kind}.svg")
}
