//! Behaviour graphs for binary SoC traces.
//!
//! Traces are read from value-change dumps or function enter/exit logs,
//! compared pairwise inside sliding windows across a range of time shifts,
//! and the significant links are drawn as one circular SVG diagram per
//! window.

pub mod colorspace;
pub mod export;
pub mod graph;
pub mod ingest;
mod kernel;
pub mod measures;
pub mod render;
pub mod synth;
pub mod trace_model;

pub use colorspace::{map2d, Rgb8};
pub use export::GraphDocument;
pub use graph::{
    build_graph, node_stats, window_sweep, Analyzer, BehaviourGraph, Edge, Endpoint, GraphError, GraphParams,
    NodeStats, SweepParams,
};
pub use kernel::WeightTable;
pub use measures::{pair_metrics, window_weights, PairMetrics, Thresholds};
pub use trace_model::{BinTrace, ImpliedKind, KindSet, KindValues, Measurement, MeasurementId, TraceSet, WindowSpec};
