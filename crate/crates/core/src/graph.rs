//! Behaviour graphs: one per window, holding per-node statistics and the
//! significant links between implied measurements.
//!
//! For every unordered pair of endpoints `(node, kind)` the sweep scores all
//! shifts `δ ∈ [-D, D]`; of the shifts that clear both thresholds, the one
//! with the largest `sDep·sCov` becomes the pair's single edge.
//! Edges are stored leader first: `src` is unshifted and `dst` is read
//! `delta ≥ 0` cycles later, so `pair_metrics(src, dst, window, delta)`
//! reproduces the stored metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{window_bits, WeightTable};
use crate::measures::{significant, window_weights, MeasureError, PairMetrics, Thresholds};
use crate::trace_model::{BinTrace, ImpliedKind, KindSet, KindValues, MeasurementId, TraceSet, WindowSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("window [{u}, {v}) does not fit inside the {cycles}-cycle trace")]
    WindowOutside { u: usize, v: usize, cycles: usize },
    #[error("window length {length} exceeds the {cycles}-cycle trace")]
    WindowTooLong { length: usize, cycles: usize },
    #[error("window stride must be at least 1")]
    BadStride,
    #[error("at least one implied kind must be selected")]
    NoKinds,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Window and whole-trace expectations of one measurement's implied forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub id: MeasurementId,
    pub ex_window: KindValues,
    /// Rectangular expectation over the whole trace.
    pub ex_global: KindValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    /// Index into [`BehaviourGraph::nodes`].
    pub node: usize,
    pub kind: ImpliedKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: Endpoint,
    pub dst: Endpoint,
    /// `dst` is sampled this many cycles after `src`; never negative.
    pub delta: i64,
    pub metrics: PairMetrics,
}

impl Edge {
    pub fn dep(&self) -> f64 {
        self.metrics.dep
    }

    pub fn cov(&self) -> f64 {
        self.metrics.cov
    }

    pub fn cond_ex(&self) -> Option<f64> {
        self.metrics.cond_ex
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviourGraph {
    pub window: WindowSpec,
    /// One per measurement, in trace-set order.
    pub nodes: Vec<NodeStats>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    /// Largest shift `D` examined, in cycles.
    pub delta_max: u32,
    pub thresholds: Thresholds,
    pub kinds: KindSet,
    /// Also link different implied forms of the same measurement.
    pub self_pairs: bool,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            delta_max: 16,
            thresholds: Thresholds::default(),
            kinds: KindSet::all(),
            self_pairs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    pub length: usize,
    pub stride: usize,
    pub alpha: f64,
}

impl SweepParams {
    /// Half-overlapping windows with the sine-squared bell.
    pub fn with_length(length: usize) -> Self {
        SweepParams {
            length,
            stride: (length / 2).max(1),
            alpha: 2.0,
        }
    }
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams::with_length(512)
    }
}

/// Start/end of every window `[k·stride, k·stride + length)` inside `[0, cycles)`.
pub fn sweep_windows(cycles: usize, length: usize, stride: usize) -> Vec<(usize, usize)> {
    if stride == 0 || length > cycles {
        return Vec::new();
    }
    (0..)
        .map(|k| k * stride)
        .take_while(|&u| u + length <= cycles)
        .map(|u| (u, u + length))
        .collect()
}

/// Implied traces and whole-trace statistics, prepared once per trace set.
pub struct Analyzer<'a> {
    traces: &'a TraceSet,
    params: GraphParams,
    implied: Vec<[BinTrace; 4]>,
    global: Vec<KindValues>,
}

impl<'a> Analyzer<'a> {
    pub fn new(traces: &'a TraceSet, params: GraphParams) -> Result<Self, GraphError> {
        if params.kinds.is_empty() {
            return Err(GraphError::NoKinds);
        }
        let implied: Vec<[BinTrace; 4]> = traces
            .measurements()
            .par_iter()
            .map(|m| ImpliedKind::ALL.map(|k| m.trace.implied(k)))
            .collect();
        let cycles = traces.cycles() as f64;
        let global = implied
            .iter()
            .map(|forms| KindValues::from_fn(|k| forms[k.index()].count_ones() as f64 / cycles))
            .collect();
        Ok(Analyzer {
            traces,
            params,
            implied,
            global,
        })
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    fn check_window(&self, window: &WindowSpec) -> Result<(), GraphError> {
        if window.end() > self.traces.cycles() {
            return Err(GraphError::WindowOutside {
                u: window.start(),
                v: window.end(),
                cycles: self.traces.cycles(),
            });
        }
        Ok(())
    }

    pub fn node_stats(&self, window: &WindowSpec, table: &WeightTable) -> Result<Vec<NodeStats>, GraphError> {
        self.check_window(window)?;
        let start = window.start() as i64;
        Ok(self
            .traces
            .measurements()
            .iter()
            .zip(&self.implied)
            .zip(&self.global)
            .map(|((m, forms), global)| NodeStats {
                id: m.id.clone(),
                ex_window: KindValues::from_fn(|k| {
                    table.expectation(&window_bits(&forms[k.index()], start, window.len()))
                }),
                ex_global: *global,
            })
            .collect())
    }

    /// Builds the graph for one window. `table` must come from a window of
    /// the same length and exponent.
    pub fn graph(&self, window: &WindowSpec, table: &WeightTable) -> Result<BehaviourGraph, GraphError> {
        debug_assert_eq!(table.len(), window.len());
        let nodes = self.node_stats(window, table)?;

        let endpoints: Vec<Endpoint> = (0..nodes.len())
            .flat_map(|node| self.params.kinds.iter().map(move |kind| Endpoint { node, kind }))
            .collect();
        let shifts = self.params.delta_max as usize + 1;
        let words = table.words();
        let start = window.start() as i64;

        // samples of every endpoint at every non-negative shift
        let slot = |e: usize, s: usize| (e * shifts + s) * words;
        let mut bits = vec![0u64; endpoints.len() * shifts * words];
        bits.par_chunks_mut(shifts * words)
            .zip(endpoints.par_iter())
            .for_each(|(chunk, ep)| {
                let trace = &self.implied[ep.node][ep.kind.index()];
                for (s, out) in chunk.chunks_mut(words).enumerate() {
                    out.copy_from_slice(&window_bits(trace, start + s as i64, window.len()));
                }
            });
        let ex: Vec<f64> = bits.par_chunks(words).map(|w| table.expectation(w)).collect();

        let eps = self.params.thresholds;
        let self_pairs = self.params.self_pairs;
        let score = |x: usize, y: usize, s: usize| -> Option<PairMetrics> {
            let ex_x = ex[x * shifts];
            let ex_y = ex[y * shifts + s];
            if ex_x == 0.0 || ex_y == 0.0 {
                return None;
            }
            let ex_xy = table.expectation_and(
                &bits[slot(x, 0)..slot(x, 0) + words],
                &bits[slot(y, s)..slot(y, s) + words],
            );
            Some(PairMetrics::from_expectations(ex_x, ex_y, ex_xy))
        };

        let edges: Vec<Edge> = (0..endpoints.len())
            .into_par_iter()
            .flat_map_iter(|a| {
                let endpoints = &endpoints;
                (a + 1..endpoints.len()).filter_map(move |b| {
                    if !self_pairs && endpoints[a].node == endpoints[b].node {
                        return None;
                    }
                    // candidates in order of increasing |δ|, a leading b first on ties
                    let mut best: Option<(usize, usize, usize, PairMetrics)> = None;
                    let mut consider = |x: usize, y: usize, s: usize| {
                        if let Some(m) = score(x, y, s) {
                            let stronger = best.map_or(true, |(.., b)| m.strength() > b.strength());
                            if stronger && significant(&m, &eps) {
                                best = Some((x, y, s, m));
                            }
                        }
                    };
                    consider(a, b, 0);
                    for s in 1..shifts {
                        consider(a, b, s);
                        consider(b, a, s);
                    }
                    let (x, y, s, m) = best?;
                    Some(Edge {
                        src: endpoints[x],
                        dst: endpoints[y],
                        delta: s as i64,
                        metrics: m,
                    })
                })
            })
            .collect();

        Ok(BehaviourGraph {
            window: window.clone(),
            nodes,
            edges,
        })
    }
}

impl Analyzer<'_> {
    /// Builds every window of the sweep and hands each graph to `visit` in
    /// window order. Windows are built in parallel batches, so only a batch
    /// of graphs is held at a time.
    pub fn sweep_each<E>(
        &self,
        sweep: &SweepParams,
        mut visit: impl FnMut(usize, BehaviourGraph) -> Result<(), E>,
    ) -> Result<usize, E>
    where
        E: From<GraphError>,
    {
        if sweep.stride == 0 {
            return Err(GraphError::BadStride.into());
        }
        let cycles = self.traces.cycles();
        if sweep.length > cycles {
            return Err(GraphError::WindowTooLong {
                length: sweep.length,
                cycles,
            }
            .into());
        }
        let template = window_weights(0, sweep.length, sweep.alpha).map_err(GraphError::from)?;
        let table = WeightTable::new(&template);
        let windows = sweep_windows(cycles, sweep.length, sweep.stride);
        let batch = (4 * rayon::current_num_threads()).max(8);
        let mut k = 0;
        for chunk in windows.chunks(batch) {
            let graphs: Result<Vec<BehaviourGraph>, GraphError> = chunk
                .par_iter()
                .map(|&(u, v)| {
                    let window = window_weights(u, v, sweep.alpha)?;
                    self.graph(&window, &table)
                })
                .collect();
            for g in graphs? {
                visit(k, g)?;
                k += 1;
            }
        }
        Ok(k)
    }
}

/// Per-measurement statistics for one window.
pub fn node_stats(traces: &TraceSet, window: &WindowSpec) -> Result<Vec<NodeStats>, GraphError> {
    let analyzer = Analyzer::new(traces, GraphParams::default())?;
    analyzer.node_stats(window, &WeightTable::new(window))
}

/// The behaviour graph of a single window.
pub fn build_graph(traces: &TraceSet, window: &WindowSpec, params: &GraphParams) -> Result<BehaviourGraph, GraphError> {
    let analyzer = Analyzer::new(traces, params.clone())?;
    analyzer.graph(window, &WeightTable::new(window))
}

/// One graph per window of the sweep, in window order.
pub fn window_sweep(
    traces: &TraceSet,
    sweep: &SweepParams,
    params: &GraphParams,
) -> Result<Vec<BehaviourGraph>, GraphError> {
    let analyzer = Analyzer::new(traces, params.clone())?;
    let mut graphs = Vec::new();
    analyzer.sweep_each(sweep, |_, g| {
        graphs.push(g);
        Ok::<(), GraphError>(())
    })?;
    Ok(graphs)
}
