//! JSON form of a window sweep.
//!
//! ```text
//! {
//!   "schema": "soclens.graphs", "version": 1,
//!   "cycles": T,
//!   "params": { "delta_max", "eps_dep", "eps_cov", "kinds", "self_pairs",
//!               "window_length", "stride", "alpha" },
//!   "measurements": [ { "index", "name", "group" } ],
//!   "windows": [ { "index", "u", "v",
//!                  "nodes": [ { "node", "name", "ex_window", "ex_global" } ],
//!                  "edges": [ { "src": { "node", "name", "kind" }, "dst": ...,
//!                               "delta", "dep", "cov", "cond_ex",
//!                               "ex_x", "ex_y", "ex_xy" } ] } ]
//! }
//! ```
//!
//! `ex_window` and `ex_global` map each implied kind to its expectation.
//! The window fields of `params` are null for graphs built outside a sweep.

use serde::{Deserialize, Serialize};

use crate::graph::{BehaviourGraph, Edge, Endpoint, GraphParams, SweepParams};
use crate::trace_model::{ImpliedKind, KindValues, MeasurementId, TraceSet};

pub const SCHEMA: &str = "soclens.graphs";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema: String,
    pub version: u32,
    pub cycles: usize,
    pub params: ParamsDoc,
    pub measurements: Vec<MeasurementId>,
    pub windows: Vec<WindowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub delta_max: u32,
    pub eps_dep: f64,
    pub eps_cov: f64,
    pub kinds: Vec<ImpliedKind>,
    pub self_pairs: bool,
    pub window_length: Option<usize>,
    pub stride: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDoc {
    pub index: usize,
    pub u: usize,
    pub v: usize,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub node: usize,
    pub name: String,
    pub ex_window: KindValues,
    pub ex_global: KindValues,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EndpointDoc {
    pub node: usize,
    pub name: String,
    pub kind: ImpliedKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: EndpointDoc,
    pub dst: EndpointDoc,
    pub delta: i64,
    pub dep: f64,
    pub cov: f64,
    pub cond_ex: Option<f64>,
    pub ex_x: f64,
    pub ex_y: f64,
    pub ex_xy: f64,
}

impl EdgeDoc {
    /// Identity of the link, ignoring its metric values.
    pub fn key(&self) -> (EndpointDoc, EndpointDoc, i64) {
        (self.src.clone(), self.dst.clone(), self.delta)
    }
}

fn endpoint(graph: &BehaviourGraph, e: Endpoint) -> EndpointDoc {
    EndpointDoc {
        node: e.node,
        name: graph.nodes[e.node].id.name.clone(),
        kind: e.kind,
    }
}

fn edge_doc(graph: &BehaviourGraph, e: &Edge) -> EdgeDoc {
    EdgeDoc {
        src: endpoint(graph, e.src),
        dst: endpoint(graph, e.dst),
        delta: e.delta,
        dep: e.metrics.dep,
        cov: e.metrics.cov,
        cond_ex: e.metrics.cond_ex,
        ex_x: e.metrics.ex_x,
        ex_y: e.metrics.ex_y,
        ex_xy: e.metrics.ex_xy,
    }
}

pub fn window_doc(index: usize, graph: &BehaviourGraph) -> WindowDoc {
    WindowDoc {
        index,
        u: graph.window.start(),
        v: graph.window.end(),
        nodes: graph
            .nodes
            .iter()
            .enumerate()
            .map(|(node, n)| NodeDoc {
                node,
                name: n.id.name.clone(),
                ex_window: n.ex_window,
                ex_global: n.ex_global,
            })
            .collect(),
        edges: graph.edges.iter().map(|e| edge_doc(graph, e)).collect(),
    }
}

pub fn graph_document(
    traces: &TraceSet,
    graphs: &[BehaviourGraph],
    params: &GraphParams,
    sweep: Option<&SweepParams>,
) -> GraphDocument {
    let mut doc = GraphDocument::new(traces, params, sweep);
    for g in graphs {
        doc.push(g);
    }
    doc
}

impl GraphDocument {
    /// A document with no windows yet.
    pub fn new(traces: &TraceSet, params: &GraphParams, sweep: Option<&SweepParams>) -> Self {
        GraphDocument {
            schema: SCHEMA.to_string(),
            version: SCHEMA_VERSION,
            cycles: traces.cycles(),
            params: ParamsDoc {
                delta_max: params.delta_max,
                eps_dep: params.thresholds.dep,
                eps_cov: params.thresholds.cov,
                kinds: params.kinds.iter().collect(),
                self_pairs: params.self_pairs,
                window_length: sweep.map(|s| s.length),
                stride: sweep.map(|s| s.stride),
                alpha: sweep.map(|s| s.alpha),
            },
            measurements: traces.measurements().iter().map(|m| m.id.clone()).collect(),
            windows: Vec::new(),
        }
    }

    /// Appends the next window.
    pub fn push(&mut self, graph: &BehaviourGraph) {
        self.windows.push(window_doc(self.windows.len(), graph));
    }

    /// Pretty-printed, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph document is always serialisable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
