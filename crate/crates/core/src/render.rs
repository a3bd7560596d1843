//! SVG frames for behaviour graphs.
//!
//! Measurements sit on a circle, starting at the top and running clockwise.
//! Each is drawn as a quad of four sections:
//!
//! ```text
//!   +---------+---------+
//!   |  Level  | Reflect |
//!   +---------+---------+
//!   |  Rise   |  Fall   |
//!   +---------+---------+
//! ```
//!
//! A section is filled with `map2d(window expectation, global expectation)`.
//! An edge runs from a black dot just outside the source section's outer
//! corner to the centre of the destination section. The dot is turned off the
//! corner bisector by `30°·δ/D`. Stroke width follows sCov, opacity follows
//! sDep, colour is `map2d(sDep, sCov)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::colorspace::{map2d, Rgb8};
use crate::graph::{BehaviourGraph, Edge, NodeStats};
use crate::trace_model::ImpliedKind;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("frame {frame} has different measurements from frame 0")]
    LayoutMismatch { frame: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Width and height of the square canvas.
    pub canvas: f64,
    pub text_size: f64,
    /// Exponent passed to the colourspace.
    pub gamma: f64,
    /// Shift range the graph was built with; scales the dot angle.
    pub delta_max: u32,
    /// Stroke width of an edge with sCov = 1.
    pub edge_width: f64,
    /// Dot radius of an edge with sDep·sCov = 1.
    pub dot_radius: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            canvas: 1200.0,
            text_size: 10.0,
            gamma: 1.0,
            delta_max: 16,
            edge_width: 4.0,
            dot_radius: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePosition {
    /// Radians, clockwise from the positive x axis (SVG y points down).
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub centre: (f64, f64),
    pub radius: f64,
    pub quad_size: f64,
    pub positions: Vec<NodePosition>,
}

impl Layout {
    /// `n` evenly spaced positions, the first at twelve o'clock.
    pub fn circular(n: usize, opts: &RenderOptions) -> Self {
        let c = opts.canvas / 2.0;
        let radius = opts.canvas * 0.38;
        let spacing = if n == 0 {
            f64::INFINITY
        } else {
            2.0 * PI * radius / n as f64
        };
        let quad_size = (0.6 * spacing).clamp(6.0, 40.0);
        let positions = (0..n)
            .map(|k| {
                let angle = -PI / 2.0 + 2.0 * PI * k as f64 / n as f64;
                NodePosition {
                    angle,
                    x: c + radius * angle.cos(),
                    y: c + radius * angle.sin(),
                }
            })
            .collect();
        Layout {
            centre: (c, c),
            radius,
            quad_size,
            positions,
        }
    }

    /// Unit direction from the quad centre to the outer corner of a section.
    fn corner_dir(kind: ImpliedKind) -> (f64, f64) {
        match kind {
            ImpliedKind::Level => (-1.0, -1.0),
            ImpliedKind::Reflect => (1.0, -1.0),
            ImpliedKind::Rise => (-1.0, 1.0),
            ImpliedKind::Fall => (1.0, 1.0),
        }
    }

    /// Absolute outer corner of a node's section.
    pub fn corner(&self, node: usize, kind: ImpliedKind) -> (f64, f64) {
        let p = self.positions[node];
        let (dx, dy) = Self::corner_dir(kind);
        let h = self.quad_size / 2.0;
        (p.x + dx * h, p.y + dy * h)
    }

    /// Absolute centre of a node's section.
    pub fn section_centre(&self, node: usize, kind: ImpliedKind) -> (f64, f64) {
        let p = self.positions[node];
        let (dx, dy) = Self::corner_dir(kind);
        let q = self.quad_size / 4.0;
        (p.x + dx * q, p.y + dy * q)
    }
}

/// Fixed three-decimal formatting without negative zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn colour(a: f64, b: f64, gamma: f64) -> Rgb8 {
    // inputs come from clamped statistics; an invalid gamma is rejected upstream
    map2d(a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), gamma).unwrap_or(Rgb8::BLACK)
}

/// One quad: four section rectangles and a name label.
pub fn render_node(stats: &NodeStats, index: usize, layout: &Layout, opts: &RenderOptions) -> String {
    let p = layout.positions[index];
    let h = layout.quad_size / 2.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<g class="node" id="node-{index}" transform="translate({} {})">"##,
        num(p.x),
        num(p.y)
    );
    for kind in ImpliedKind::ALL {
        let (dx, dy) = Layout::corner_dir(kind);
        let x = if dx < 0.0 { -h } else { 0.0 };
        let y = if dy < 0.0 { -h } else { 0.0 };
        let fill = colour(stats.ex_window[kind], stats.ex_global[kind], opts.gamma);
        let _ = writeln!(
            s,
            r##"<rect class="section {kind}" x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="#808080" stroke-width="0.5"><title>{} {kind}: window {} global {}</title></rect>"##,
            num(x),
            num(y),
            num(h),
            num(h),
            escape(&stats.id.name),
            num(stats.ex_window[kind]),
            num(stats.ex_global[kind]),
        );
    }
    // label outside the quad, along the radius
    let (c, sn) = (p.angle.cos(), p.angle.sin());
    let off = layout.quad_size * FRAC_1_SQRT_2 + opts.text_size * 0.5;
    let anchor = if c > 0.1 {
        "start"
    } else if c < -0.1 {
        "end"
    } else {
        "middle"
    };
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" font-size="{}" text-anchor="{anchor}" dominant-baseline="middle">{}</text>"##,
        num(c * off),
        num(sn * off),
        num(opts.text_size),
        escape(&stats.id.name),
    );
    s.push_str("</g>\n");
    s
}

/// Position of an edge's dot: just outside the source corner, turned off the
/// bisector in proportion to `δ/D`.
pub fn dot_position(edge: &Edge, layout: &Layout, opts: &RenderOptions) -> (f64, f64) {
    let (cx, cy) = layout.corner(edge.src.node, edge.src.kind);
    let (dx, dy) = Layout::corner_dir(edge.src.kind);
    let frac = if opts.delta_max == 0 {
        0.0
    } else {
        edge.delta as f64 / opts.delta_max as f64
    };
    let turn = frac * PI / 6.0;
    let (st, ct) = turn.sin_cos();
    let (ux, uy) = (dx * FRAC_1_SQRT_2, dy * FRAC_1_SQRT_2);
    let gap = opts.dot_radius * 1.5;
    (cx + gap * (ux * ct - uy * st), cy + gap * (ux * st + uy * ct))
}

pub fn render_edge(edge: &Edge, graph: &BehaviourGraph, layout: &Layout, opts: &RenderOptions) -> String {
    let (dep, cov) = (edge.dep(), edge.cov());
    let (x1, y1) = dot_position(edge, layout, opts);
    let (x2, y2) = layout.section_centre(edge.dst.node, edge.dst.kind);
    let stroke = colour(dep, cov, opts.gamma);
    let cond = edge.cond_ex().map_or_else(|| "undefined".to_string(), num);
    format!(
        concat!(
            r##"<g class="edge"><title>{} {} → {} {} δ={} dep={} cov={} cond_ex={}</title>"##,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}" stroke-opacity="{}"/>"##,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#000000"/></g>"##,
            "\n"
        ),
        escape(&graph.nodes[edge.src.node].id.name),
        edge.src.kind,
        escape(&graph.nodes[edge.dst.node].id.name),
        edge.dst.kind,
        edge.delta,
        num(dep),
        num(cov),
        cond,
        num(x1),
        num(y1),
        num(x2),
        num(y2),
        stroke,
        num(opts.edge_width * cov),
        num(0.25 + 0.75 * dep),
        num(x1),
        num(y1),
        num(opts.dot_radius * (0.5 + 0.5 * dep * cov)),
    )
}

/// Standalone SVG document: edges first, quads on top, window caption.
pub fn render_frame(graph: &BehaviourGraph, layout: &Layout, opts: &RenderOptions) -> String {
    let size = num(opts.canvas);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif">"##
    );
    let _ = writeln!(
        s,
        r##"<rect class="background" width="{size}" height="{size}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        s,
        r##"<text class="caption" x="{}" y="{}" font-size="{}">window [{}, {})</text>"##,
        num(opts.text_size),
        num(opts.text_size * 2.0),
        num(opts.text_size * 1.5),
        graph.window.start(),
        graph.window.end()
    );
    s.push_str("<g class=\"edges\">\n");
    for e in &graph.edges {
        s.push_str(&render_edge(e, graph, layout, opts));
    }
    s.push_str("</g>\n<g class=\"nodes\">\n");
    for (i, n) in graph.nodes.iter().enumerate() {
        s.push_str(&render_node(n, i, layout, opts));
    }
    s.push_str("</g>\n</svg>\n");
    s
}

pub fn frame_name(k: usize, graph: &BehaviourGraph) -> String {
    format!("frame_{k}_{}_{}.svg", graph.window.start(), graph.window.end())
}

/// One line of the index page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEntry {
    pub file: String,
    pub u: usize,
    pub v: usize,
    pub edges: usize,
}

impl FrameEntry {
    pub fn new(k: usize, graph: &BehaviourGraph) -> Self {
        FrameEntry {
            file: frame_name(k, graph),
            u: graph.window.start(),
            v: graph.window.end(),
            edges: graph.edges.len(),
        }
    }
}

/// Static page linking the frames in order.
pub fn index_html(frames: &[FrameEntry]) -> String {
    let mut s = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>behaviour graphs</title>\n</head>\n<body>\n<h1>behaviour graphs</h1>\n<ol start=\"0\">\n",
    );
    for f in frames {
        let _ = writeln!(
            s,
            r#"<li><a href="{}">[{}, {})</a> {} edges</li>"#,
            escape(&f.file),
            f.u,
            f.v,
            f.edges
        );
    }
    s.push_str("</ol>\n</body>\n</html>\n");
    s
}

/// Writes `contents` to `path`.
pub fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, RenderError> {
    fs::write(&path, contents).map_err(|source| RenderError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes one SVG per graph plus `index.html` into `out_dir`. Returns the
/// frame paths in window order followed by the index.
pub fn render_sweep(
    graphs: &[BehaviourGraph],
    out_dir: &Path,
    opts: &RenderOptions,
) -> Result<Vec<PathBuf>, RenderError> {
    if let Some(first) = graphs.first() {
        for (frame, g) in graphs.iter().enumerate() {
            let same =
                g.nodes.len() == first.nodes.len() && g.nodes.iter().zip(&first.nodes).all(|(a, b)| a.id == b.id);
            if !same {
                return Err(RenderError::LayoutMismatch { frame });
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| RenderError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let layout = Layout::circular(graphs.first().map_or(0, |g| g.nodes.len()), opts);
    let frames: Vec<(String, String)> = graphs
        .par_iter()
        .enumerate()
        .map(|(k, g)| (frame_name(k, g), render_frame(g, &layout, opts)))
        .collect();
    let mut paths = Vec::with_capacity(frames.len() + 1);
    for (name, svg) in &frames {
        paths.push(write_file(out_dir.join(name), svg)?);
    }
    let entries: Vec<FrameEntry> = graphs.iter().enumerate().map(|(k, g)| FrameEntry::new(k, g)).collect();
    paths.push(write_file(out_dir.join("index.html"), &index_html(&entries))?);
    Ok(paths)
}
