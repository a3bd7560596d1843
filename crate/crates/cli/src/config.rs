//! Run configuration: a TOML file, overridden field by field from flags.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use soclens_core::ingest::Binarize;
use soclens_core::render::RenderOptions;
use soclens_core::{GraphParams, ImpliedKind, KindSet, SweepParams, Thresholds};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Vcd,
    Events,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    Svg,
    GraphJson,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub window: WindowConfig,
    pub analysis: AnalysisConfig,
    pub render: RenderConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// File to read; fixtures also accept `builtin:probsys` and `builtin:tinn`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: InputFormat,
    /// Signal name patterns with `*` wildcards; empty keeps everything.
    pub select: Vec<String>,
    /// `nonzero`, `bit(k)` or `split`.
    pub binarize: String,
    /// First matching rule wins over `binarize`.
    pub rules: Vec<BinarizeRule>,
    /// Native time units per cycle.
    pub quantum: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    /// Replaces the seed of a generated fixture.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            path: None,
            format: InputFormat::Vcd,
            select: Vec::new(),
            binarize: "nonzero".into(),
            rules: Vec::new(),
            quantum: 1,
            cycles: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarizeRule {
    pub pattern: String,
    pub binarize: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub length: usize,
    /// Defaults to half the length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    pub alpha: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let s = SweepParams::default();
        WindowConfig {
            length: s.length,
            stride: None,
            alpha: s.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub delta_max: u32,
    pub eps_dep: f64,
    pub eps_cov: f64,
    pub kinds: Vec<ImpliedKind>,
    pub self_pairs: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let p = GraphParams::default();
        AnalysisConfig {
            delta_max: p.delta_max,
            eps_dep: p.thresholds.dep,
            eps_cov: p.thresholds.cov,
            kinds: p.kinds.iter().collect(),
            self_pairs: p.self_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub gamma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            gamma: RenderOptions::default().gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit: Vec<Emit>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("soclens-out"),
            emit: vec![Emit::Svg, Emit::GraphJson],
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Validated parameters for the analysis stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub sweep: SweepParams,
    pub params: GraphParams,
    pub render: RenderOptions,
    pub binarize: Binarize,
    pub rules: Vec<(String, Binarize)>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|message| CliError::Config {
            field: path.display().to_string(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always serialisable")
    }

    /// Checks every field that does not depend on the input.
    pub fn plan(&self) -> Result<Plan, CliError> {
        let w = &self.window;
        if w.length < 3 {
            return Err(config_error(
                "window.length",
                format!("must be at least 3, got {}", w.length),
            ));
        }
        let stride = w.stride.unwrap_or((w.length / 2).max(1));
        if stride == 0 {
            return Err(config_error("window.stride", "must be at least 1"));
        }
        if !w.alpha.is_finite() || w.alpha < 0.0 {
            return Err(config_error(
                "window.alpha",
                format!("must be finite and >= 0, got {}", w.alpha),
            ));
        }
        let a = &self.analysis;
        let thresholds = Thresholds::new(a.eps_dep, a.eps_cov).map_err(|e| {
            let field = if !a.eps_dep.is_finite() || a.eps_dep < 0.0 {
                "analysis.eps_dep"
            } else {
                "analysis.eps_cov"
            };
            config_error(field, e.to_string())
        })?;
        let kinds: KindSet = a.kinds.iter().copied().collect();
        if kinds.is_empty() {
            return Err(config_error("analysis.kinds", "at least one implied kind is required"));
        }
        let gamma = self.render.gamma;
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(config_error(
                "render.gamma",
                format!("must be finite and > 0, got {gamma}"),
            ));
        }
        if self.input.quantum == 0 {
            return Err(config_error("input.quantum", "must be at least 1"));
        }
        if self.output.emit.is_empty() {
            return Err(config_error("output.emit", "nothing to emit"));
        }
        let binarize = self
            .input
            .binarize
            .parse::<Binarize>()
            .map_err(|e| config_error("input.binarize", e))?;
        let rules = self
            .input
            .rules
            .iter()
            .map(|r| {
                r.binarize
                    .parse::<Binarize>()
                    .map(|b| (r.pattern.clone(), b))
                    .map_err(|e| config_error("input.rules", e))
            })
            .collect::<Result<_, _>>()?;
        Ok(Plan {
            sweep: SweepParams {
                length: w.length,
                stride,
                alpha: w.alpha,
            },
            params: GraphParams {
                delta_max: a.delta_max,
                thresholds,
                kinds,
                self_pairs: a.self_pairs,
            },
            render: RenderOptions {
                gamma,
                delta_max: a.delta_max,
                ..RenderOptions::default()
            },
            binarize,
            rules,
        })
    }
}

/// Behaviour graphs for binary SoC traces.
///
/// Every flag overrides the matching field of the configuration file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "soclens", version)]
pub struct Args {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trace file, or builtin:probsys / builtin:tinn for fixtures.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Signal name patterns, comma separated; `*` matches any run.
    #[arg(long, value_delimiter = ',')]
    pub select: Option<Vec<String>>,
    /// nonzero, bit(k) or split.
    #[arg(long)]
    pub binarize: Option<String>,
    /// Native time units per cycle.
    #[arg(long)]
    pub quantum: Option<u64>,
    /// Trace length in cycles.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Window length in cycles.
    #[arg(long)]
    pub window_length: Option<usize>,
    /// Distance between window starts; half the length by default.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Window exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Largest shift examined, in cycles.
    #[arg(long)]
    pub delta_max: Option<u32>,
    /// sDep an edge must exceed.
    #[arg(long)]
    pub eps_dep: Option<f64>,
    /// sCov an edge must exceed.
    #[arg(long)]
    pub eps_cov: Option<f64>,
    /// Colourspace exponent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Implied kinds, comma separated: level, reflect, rise, fall.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<ImpliedKind>>,
    /// Also link implied forms of the same measurement.
    #[arg(long)]
    pub self_pairs: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Artifacts to write, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub emit: Option<Vec<Emit>>,
    /// Fixture seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

impl Args {
    /// The configuration file, if any, with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        if let Some(p) = &self.input {
            c.input.path = Some(p.clone());
        }
        set!(self.format, c.input.format);
        set!(self.select, c.input.select);
        set!(self.binarize, c.input.binarize);
        set!(self.quantum, c.input.quantum);
        if self.cycles.is_some() {
            c.input.cycles = self.cycles;
        }
        if self.seed.is_some() {
            c.input.seed = self.seed;
        }
        set!(self.window_length, c.window.length);
        if self.stride.is_some() {
            c.window.stride = self.stride;
        }
        set!(self.alpha, c.window.alpha);
        set!(self.delta_max, c.analysis.delta_max);
        set!(self.eps_dep, c.analysis.eps_dep);
        set!(self.eps_cov, c.analysis.eps_cov);
        set!(self.kinds, c.analysis.kinds);
        if self.self_pairs {
            c.analysis.self_pairs = true;
        }
        set!(self.gamma, c.render.gamma);
        set!(self.out, c.output.dir);
        set!(self.emit, c.output.emit);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn full_round_trip() {
        let mut c = RunConfig::default();
        c.input.path = Some("trace.vcd".into());
        c.input.select = vec!["top.*".into()];
        c.input.rules = vec![BinarizeRule {
            pattern: "top.bus".into(),
            binarize: "bit(2)".into(),
        }];
        c.input.cycles = Some(1000);
        c.window.stride = Some(100);
        c.analysis.kinds = vec![ImpliedKind::Rise, ImpliedKind::Fall];
        c.output.emit = vec![Emit::GraphJson];
        let text = c.to_toml();
        assert!(text.contains("emit = [\"graph-json\"]"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = RunConfig::from_toml("[window]\nlenght = 5\n").unwrap_err();
        assert!(err.contains("lenght"));
    }

    #[test]
    fn plan_checks_fields() {
        let field = |c: RunConfig| match c.plan() {
            Err(CliError::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        let mut c = RunConfig::default();
        c.window.length = 2;
        assert_eq!(field(c), "window.length");
        let mut c = RunConfig::default();
        c.analysis.eps_cov = -1.0;
        assert_eq!(field(c), "analysis.eps_cov");
        let mut c = RunConfig::default();
        c.analysis.kinds.clear();
        assert_eq!(field(c), "analysis.kinds");
        let mut c = RunConfig::default();
        c.render.gamma = 0.0;
        assert_eq!(field(c), "render.gamma");
        let mut c = RunConfig::default();
        c.input.binarize = "bits".into();
        assert_eq!(field(c), "input.binarize");

        let plan = RunConfig::default().plan().unwrap();
        assert_eq!(plan.sweep.stride, 256);
        assert_eq!(plan.render.delta_max, 16);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[window]\nlength = 100\nalpha = 1.0\n[analysis]\ndelta_max = 4\n",
        )
        .unwrap();
        let args = Args::try_parse_from([
            "soclens",
            "--config",
            path.to_str().unwrap(),
            "--window-length",
            "64",
            "--kinds",
            "level,rise",
            "--emit",
            "svg",
        ])
        .unwrap();
        let c = args.resolve().unwrap();
        assert_eq!(c.window.length, 64);
        assert_eq!(c.window.alpha, 1.0);
        assert_eq!(c.analysis.delta_max, 4);
        assert_eq!(c.analysis.kinds, [ImpliedKind::Level, ImpliedKind::Rise]);
        assert_eq!(c.output.emit, [Emit::Svg]);
    }
}
