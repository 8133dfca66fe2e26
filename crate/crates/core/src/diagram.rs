//! Static SVG drawing of a trained network: one node per unit, one small curve panel
//! per active edge.

use std::fmt::Write as _;

use crate::error::Result;
use crate::trainers::TrainedModel;

const LAYER_GAP: f64 = 220.0;
const NODE_GAP: f64 = 150.0;
const MARGIN: f64 = 60.0;
const NODE_R: f64 = 14.0;
const PANEL_W: f64 = 90.0;
const PANEL_H: f64 = 60.0;
const CURVE_SAMPLES: usize = 64;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

fn node_x(width: f64, count: usize, j: usize) -> f64 {
    let span = (count.saturating_sub(1)) as f64 * NODE_GAP;
    width / 2.0 - span / 2.0 + j as f64 * NODE_GAP
}

fn node_label(model: &TrainedModel, layer: usize, j: usize, depth: usize) -> String {
    if layer == 0 {
        model
            .covariate_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("z{}", j + 1))
    } else if layer == depth {
        "log T".to_string()
    } else {
        format!("h{layer}.{}", j + 1)
    }
}

/// Renders the model as SVG. Inputs sit at the bottom, the output at the top; each
/// active edge gets a panel plotting its activation over its grid domain. The effective
/// fit configuration and tool version are embedded in `<metadata>`.
pub fn render_svg(model: &TrainedModel) -> Result<String> {
    let net = &model.network;
    let shape = &net.shape;
    let depth = shape.len() - 1;
    let widest = shape.iter().copied().max().unwrap_or(1);
    let width = 2.0 * MARGIN + (widest.max(2) - 1) as f64 * NODE_GAP + PANEL_W;
    let height = 2.0 * MARGIN + depth as f64 * LAYER_GAP;
    let layer_y = |l: usize| height - MARGIN - l as f64 * LAYER_GAP;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let meta = serde_json::json!({
        "version": model.version,
        "strategy": model.strategy,
        "config": model.config,
    });
    let _ = writeln!(svg, "<metadata>{}</metadata>", escape(&meta.to_string()));
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    for (l, layer) in net.layers.iter().enumerate() {
        let (y0, y1) = (layer_y(l), layer_y(l + 1));
        for o in 0..layer.out_dim {
            for i in 0..layer.in_dim {
                if !layer.is_active(o, i) {
                    continue;
                }
                let (x0, x1) = (node_x(width, layer.in_dim, i), node_x(width, layer.out_dim, o));
                let _ = writeln!(
                    svg,
                    r##"<line class="edge" x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}" stroke="#888888" stroke-width="1"/>"##,
                    y0 - NODE_R,
                    y1 + NODE_R
                );
                let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
                edge_panel(&mut svg, model, l, o, i, cx, cy)?;
            }
        }
    }

    for (l, &count) in shape.iter().enumerate() {
        for j in 0..count {
            let (x, y) = (node_x(width, count, j), layer_y(l));
            let _ = writeln!(
                svg,
                r##"<circle class="node" cx="{x:.2}" cy="{y:.2}" r="{NODE_R}" fill="#1f3b73"/>"##
            );
            let ty = if l == 0 { y + NODE_R + 16.0 } else { y - NODE_R - 8.0 };
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"#,
                escape(&node_label(model, l, j, depth))
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn edge_panel(
    svg: &mut String,
    model: &TrainedModel,
    layer: usize,
    out: usize,
    inp: usize,
    cx: f64,
    cy: f64,
) -> Result<()> {
    let edge = model.network.layers[layer].edge(out, inp);
    let (lo, hi) = edge.domain();
    let mut ys = Vec::with_capacity(CURVE_SAMPLES);
    for k in 0..CURVE_SAMPLES {
        let x = lo + (hi - lo) * k as f64 / (CURVE_SAMPLES - 1) as f64;
        ys.push(edge.eval(x)?);
    }
    let (ymin, ymax) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let yspan = if ymax - ymin > 1e-12 { ymax - ymin } else { 1.0 };
    let (left, top) = (cx - PANEL_W / 2.0, cy - PANEL_H / 2.0);
    let _ = writeln!(svg, r#"<g class="edge-panel" data-layer="{layer}" data-out="{out}" data-in="{inp}">"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="#ffffff" stroke="#333333" stroke-width="0.8"/>"##
    );
    let pad = 4.0;
    let mut points = String::new();
    for (k, y) in ys.iter().enumerate() {
        let px = left + pad + (PANEL_W - 2.0 * pad) * k as f64 / (CURVE_SAMPLES - 1) as f64;
        let py = top + PANEL_H - pad - (PANEL_H - 2.0 * pad) * (y - ymin) / yspan;
        if k > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{px:.2},{py:.2}");
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{points}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##
    );
    svg.push_str("</g>\n");
    Ok(())
}

/// Number of edge panels in a rendered diagram.
pub fn panel_count(svg: &str) -> usize {
    svg.matches(r#"class="edge-panel""#).count()
}
