//! Plot data: position and credible-ellipse CSVs, arrow CSVs and a small
//! self-contained SVG scatter renderer.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::network::NodeSet;

/// 0.95 quantile of the chi-square distribution with 2 degrees of freedom.
pub const CHI2_2DF_95: f64 = 5.991464547107979;

/// One set of positions to plot, e.g. a view's `z~_k` or the fused `z_bar`.
#[derive(Debug, Clone, Copy)]
pub struct PositionLayer<'a> {
    pub view: &'a str,
    /// `"per_view"` or `"fused"`.
    pub source: &'a str,
    pub positions: &'a DMatrix<f64>,
    pub cov: &'a DMatrix<f64>,
}

/// 95% region of a 2-D Gaussian: semi-axes `sqrt(5.991 lambda)` along the
/// eigenvectors, `angle` (radians) of the major axis from the x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
}

pub fn credible_ellipse(cov: &DMatrix<f64>) -> Option<Ellipse> {
    if cov.shape() != (2, 2) {
        return None;
    }
    let eig = SymmetricEigen::new(cov.clone());
    let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let v = eig.eigenvectors.column(major);
    // fold the sign ambiguity of the eigenvector into [0, pi)
    let mut angle = v[1].atan2(v[0]);
    if angle < 0.0 {
        angle += std::f64::consts::PI;
    }
    if angle >= std::f64::consts::PI {
        angle -= std::f64::consts::PI;
    }
    Some(Ellipse {
        semi_major: (CHI2_2DF_95 * eig.eigenvalues[major].max(0.0)).sqrt(),
        semi_minor: (CHI2_2DF_95 * eig.eigenvalues[minor].max(0.0)).sqrt(),
        angle,
    })
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Artifact(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_error)?;
    String::from_utf8(bytes).map_err(csv_error)
}

/// `node,view,x,y,source` (or `z1..zD` instead of `x,y` when `D != 2`).
pub fn positions_csv(nodes: &NodeSet, layers: &[PositionLayer<'_>]) -> Result<String> {
    let dim = layers.first().map_or(2, |l| l.positions.ncols());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node".to_string(), "view".to_string()];
    if dim == 2 {
        header.extend(["x".to_string(), "y".to_string()]);
    } else {
        header.extend((1..=dim).map(|d| format!("z{d}")));
    }
    header.push("source".to_string());
    w.write_record(&header).map_err(csv_error)?;
    for layer in layers {
        for i in 0..layer.positions.nrows() {
            let mut rec = vec![nodes.label(i).to_string(), layer.view.to_string()];
            rec.extend(layer.positions.row(i).iter().map(|v| v.to_string()));
            rec.push(layer.source.to_string());
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    finish(w)
}

/// `node,view,x,y,semi_major,semi_minor,angle,source`; `None` unless `D = 2`.
pub fn ellipses_csv(nodes: &NodeSet, layers: &[PositionLayer<'_>]) -> Result<Option<String>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "node",
        "view",
        "x",
        "y",
        "semi_major",
        "semi_minor",
        "angle",
        "source",
    ])
    .map_err(csv_error)?;
    for layer in layers {
        let Some(e) = credible_ellipse(layer.cov) else {
            log::warn!("credible ellipses need D = 2; skipping");
            return Ok(None);
        };
        for i in 0..layer.positions.nrows() {
            w.write_record([
                nodes.label(i).to_string(),
                layer.view.to_string(),
                layer.positions[(i, 0)].to_string(),
                layer.positions[(i, 1)].to_string(),
                e.semi_major.to_string(),
                e.semi_minor.to_string(),
                e.angle.to_string(),
                layer.source.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w).map(Some)
}

/// `node,x_from,y_from,x_to,y_to`: one arrow per node between two 2-D
/// position sets.
pub fn arrows_csv(nodes: &NodeSet, from: &DMatrix<f64>, to: &DMatrix<f64>) -> Result<String> {
    if from.shape() != to.shape() || from.ncols() != 2 {
        return Err(Error::DimensionMismatch(
            "arrows need two N x 2 position sets".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "x_from", "y_from", "x_to", "y_to"])
        .map_err(csv_error)?;
    for i in 0..from.nrows() {
        w.write_record([
            nodes.label(i).to_string(),
            from[(i, 0)].to_string(),
            from[(i, 1)].to_string(),
            to[(i, 0)].to_string(),
            to[(i, 1)].to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

#[derive(Debug, Clone, Default)]
pub struct ScatterPlot {
    pub title: String,
    pub points: Vec<(String, f64, f64)>,
    /// Drawn around every point.
    pub ellipse: Option<Ellipse>,
    pub arrows: Vec<((f64, f64), (f64, f64))>,
}

impl ScatterPlot {
    /// Points (and the shared ellipse) from the first two coordinates.
    pub fn from_positions(
        title: &str,
        nodes: &NodeSet,
        positions: &DMatrix<f64>,
        cov: &DMatrix<f64>,
    ) -> Self {
        let points = if positions.ncols() >= 2 {
            (0..positions.nrows())
                .map(|i| {
                    (
                        nodes.label(i).to_string(),
                        positions[(i, 0)],
                        positions[(i, 1)],
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        ScatterPlot {
            title: title.to_string(),
            points,
            ellipse: credible_ellipse(cov),
            arrows: Vec::new(),
        }
    }
}

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a square SVG with equal axis scales. Output depends only on the
/// input, so identical plots are byte-identical.
pub fn svg_scatter(plot: &ScatterPlot) -> String {
    let reach = plot.ellipse.map_or(0.0, |e| e.semi_major);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (_, x, y) in &plot.points {
        xs.extend([x - reach, x + reach]);
        ys.extend([y - reach, y + reach]);
    }
    for &((x0, y0), (x1, y1)) in &plot.arrows {
        xs.extend([x0, x1]);
        ys.extend([y0, y1]);
    }
    let bound = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let (mut x_min, mut x_max) = (bound(&xs, f64::min, -1.0), bound(&xs, f64::max, 1.0));
    let (mut y_min, mut y_max) = (bound(&ys, f64::min, -1.0), bound(&ys, f64::max, 1.0));
    let span = (x_max - x_min).max(y_max - y_min);
    let (cx, cy) = ((x_min + x_max) / 2.0, (y_min + y_max) / 2.0);
    x_min = cx - span / 2.0;
    x_max = cx + span / 2.0;
    y_min = cy - span / 2.0;
    y_max = cy + span / 2.0;
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |x: f64| MARGIN + (x - x_min) * scale;
    let py = |y: f64| SIZE - MARGIN - (y - y_min) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    s.push_str(concat!(
        r#"<defs><marker id="head" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto">"#,
        r#"<path d="M0,0 L10,5 L0,10 z" fill="black"/></marker></defs>"#,
        "\n"
    ));
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(&plot.title)
    );
    // frame and axes through the origin when visible
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = SIZE - 2.0 * MARGIN
    );
    if (x_min..=x_max).contains(&0.0) {
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{b:.2}" stroke="grey" stroke-dasharray="4 4"/>"#,
            x = px(0.0),
            b = SIZE - MARGIN
        );
    }
    if (y_min..=y_max).contains(&0.0) {
        let _ = writeln!(
            s,
            r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{r:.2}" y2="{y:.2}" stroke="grey" stroke-dasharray="4 4"/>"#,
            y = py(0.0),
            r = SIZE - MARGIN
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="10">x: [{x_min:.3}, {x_max:.3}]  y: [{y_min:.3}, {y_max:.3}]</text>"#,
        SIZE - 12.0
    );
    if let Some(e) = plot.ellipse {
        for (_, x, y) in &plot.points {
            let _ = writeln!(
                s,
                r#"<ellipse cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.3} {:.2} {:.2})" fill="grey" fill-opacity="0.15"/>"#,
                px(*x),
                py(*y),
                e.semi_major * scale,
                e.semi_minor * scale,
                -e.angle.to_degrees(),
                px(*x),
                py(*y)
            );
        }
    }
    for &((x0, y0), (x1, y1)) in &plot.arrows {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="0.8" marker-end="url(#head)"/>"#,
            px(x0),
            py(y0),
            px(x1),
            py(y1)
        );
    }
    for (label, x, y) in &plot.points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9">{}</text>"#,
            px(*x),
            py(*y),
            px(*x) + 4.0,
            py(*y) - 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
