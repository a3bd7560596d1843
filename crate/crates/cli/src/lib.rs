//! Command-line pipeline: read traces, sweep windows, write SVG frames and
//! the graph JSON.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use soclens_core::export::GraphDocument;
use soclens_core::ingest::{
    self, densify, functions_to_traces, parse_eventlog, parse_vcd, DensifyOptions, IngestError,
};
use soclens_core::render::{self, FrameEntry, Layout};
use soclens_core::synth::Fixture;
use soclens_core::{Analyzer, GraphError, TraceSet};
use thiserror::Error;

pub use config::{Args, Emit, InputFormat, Plan, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error in {field}: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse {file}: {message}")]
    Parse { file: String, message: String },
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn ingest_error(file: &str, e: IngestError) -> CliError {
    match e {
        IngestError::Io(e) => CliError::io(Path::new(file), e),
        IngestError::NoMatch { .. } => config_error("input.select", e.to_string()),
        IngestError::Binarize { .. } => config_error("input.binarize", e.to_string()),
        IngestError::BadQuantum => config_error("input.quantum", e.to_string()),
        other => CliError::Parse {
            file: file.to_string(),
            message: other.to_string(),
        },
    }
}

/// Reads or generates the traces named by `[input]`.
pub fn load_traces(config: &RunConfig, plan: &Plan) -> Result<TraceSet, CliError> {
    let input = &config.input;
    let path = input
        .path
        .as_deref()
        .ok_or_else(|| config_error("input.path", "no input given"))?;
    let read = || fs::read(path).map_err(|e| CliError::io(Path::new(path), e));
    match input.format {
        InputFormat::Vcd => {
            let doc = parse_vcd(&read()?).map_err(|e| ingest_error(path, e))?;
            let opts = DensifyOptions {
                quantum: input.quantum,
                cycles: input.cycles,
                binarize: plan.binarize,
                overrides: plan.rules.clone(),
            };
            let d = densify(&doc, &input.select, &opts).map_err(|e| ingest_error(path, e))?;
            Ok(d.traces)
        }
        InputFormat::Events => {
            let log = parse_eventlog(&read()?).map_err(|e| ingest_error(path, e))?;
            let cycles = input.cycles.unwrap_or_else(|| {
                log.records
                    .iter()
                    .map(|r| (r.timestamp / input.quantum) as usize + 1)
                    .max()
                    .unwrap_or(1)
            });
            let d = functions_to_traces(&log, cycles, input.quantum).map_err(|e| ingest_error(path, e))?;
            ingest::select(&d.traces, &input.select).map_err(|e| ingest_error(path, e))
        }
        InputFormat::Fixture => {
            let fixture = match path.strip_prefix("builtin:") {
                Some(name) => Fixture::builtin(name).ok_or_else(|| {
                    config_error(
                        "input.path",
                        format!("unknown fixture '{name}' (expected probsys or tinn)"),
                    )
                })?,
                None => {
                    let text = String::from_utf8(read()?).map_err(|e| CliError::Parse {
                        file: path.to_string(),
                        message: e.to_string(),
                    })?;
                    toml::from_str::<Fixture>(&text).map_err(|e| CliError::Parse {
                        file: path.to_string(),
                        message: e.to_string().trim_end().to_string(),
                    })?
                }
            };
            let fixture = match input.seed {
                Some(seed) => fixture.with_seed(seed),
                None => fixture,
            };
            if input.cycles.is_some() {
                warn!("input.cycles is ignored for fixtures; they fix their own length");
            }
            let traces = fixture.traces().map_err(|e| CliError::Parse {
                file: path.to_string(),
                message: e.to_string(),
            })?;
            ingest::select(&traces, &input.select).map_err(|e| ingest_error(path, e))
        }
    }
}

/// One line of the per-window summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSummary {
    pub index: usize,
    pub u: usize,
    pub v: usize,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub windows: Vec<WindowSummary>,
    /// Written files, frames first.
    pub files: Vec<PathBuf>,
}

/// Runs the whole pipeline. Summary lines go to `out` in window order.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<RunReport, CliError> {
    let plan = config.plan()?;
    let traces = load_traces(config, &plan)?;
    if plan.sweep.length > traces.cycles() {
        return Err(config_error(
            "window.length",
            format!(
                "{} exceeds the trace length of {} cycles",
                plan.sweep.length,
                traces.cycles()
            ),
        ));
    }
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let svg = config.output.emit.contains(&Emit::Svg);
    let json = config.output.emit.contains(&Emit::GraphJson);
    let layout = Layout::circular(traces.len(), &plan.render);
    let analyzer = Analyzer::new(&traces, plan.params.clone()).map_err(|e| config_error("analysis", e.to_string()))?;
    let mut doc = GraphDocument::new(&traces, &plan.params, Some(&plan.sweep));
    let mut report = RunReport {
        windows: Vec::new(),
        files: Vec::new(),
    };
    let mut frames = Vec::new();

    let visited = analyzer.sweep_each(&plan.sweep, |k, graph| {
        let summary = WindowSummary {
            index: k,
            u: graph.window.start(),
            v: graph.window.end(),
            nodes: graph.nodes.len(),
            edges: graph.edges.len(),
        };
        writeln!(
            out,
            "window {k} [{}, {}): {} nodes, {} edges",
            summary.u, summary.v, summary.nodes, summary.edges
        )
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        if svg {
            let entry = FrameEntry::new(k, &graph);
            let path = dir.join(&entry.file);
            let text = render::render_frame(&graph, &layout, &plan.render);
            report
                .files
                .push(render::write_file(path.clone(), &text).map_err(|e| CliError::io(&path, e))?);
            frames.push(entry);
        }
        if json {
            doc.push(&graph);
        }
        report.windows.push(summary);
        Ok::<(), SweepError>(())
    });
    match visited {
        Ok(_) => {}
        Err(SweepError::Cli(e)) => return Err(e),
        Err(SweepError::Graph(e)) => return Err(config_error("window", e.to_string())),
    }

    if svg {
        let path = dir.join("index.html");
        report
            .files
            .push(render::write_file(path.clone(), &render::index_html(&frames)).map_err(|e| CliError::io(&path, e))?);
    }
    if json {
        let path = dir.join("graphs.json");
        fs::write(&path, doc.to_json()).map_err(|e| CliError::io(&path, e))?;
        report.files.push(path);
    }
    Ok(report)
}

enum SweepError {
    Graph(GraphError),
    Cli(CliError),
}

impl From<GraphError> for SweepError {
    fn from(e: GraphError) -> Self {
        SweepError::Graph(e)
    }
}

impl From<CliError> for SweepError {
    fn from(e: CliError) -> Self {
        SweepError::Cli(e)
    }
}

/// Sizes the global worker pool from `SOCLENS_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("SOCLENS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| config_error("SOCLENS_THREADS", format!("expected a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error("SOCLENS_THREADS", e.to_string()))
}

/// Entry point behind the binary.
pub fn main_with(args: &Args, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.resolve()?;
    if args.dump_config {
        config.plan()?;
        out.write_all(config.to_toml().as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        return Ok(());
    }
    configure_threads()?;
    run(&config, out).map(|_| ())
}
