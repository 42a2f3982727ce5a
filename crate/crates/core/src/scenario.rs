//! Scenario configuration: geometry, field, measure, grid resolution,
//! boundary operator and run parameters, read from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryOperator;
use crate::error::{Error, Result};
use crate::flow::{Domain, Flow, GraphEdge, Point, VectorField};
use crate::grid::{CharacteristicGrid, GridFunction, Measure};
use crate::semigroup::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { lo: f64, hi: f64 },
    Box { lo: Point, hi: Point },
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    /// Edges as `[x0, y0, x1, y1]`, oriented from the first point.
    Graph { edges: Vec<[f64; 4]> },
}

impl DomainConfig {
    pub fn to_domain(&self) -> Domain {
        match self.clone() {
            DomainConfig::Interval { lo, hi } => Domain::Interval { lo, hi },
            DomainConfig::Box { lo, hi } => Domain::Box { lo, hi },
            DomainConfig::Disk { center, radius } => Domain::Disk { center, radius },
            DomainConfig::Annulus { center, inner, outer } => Domain::Annulus { center, inner, outer },
            DomainConfig::Graph { edges } => Domain::Graph {
                edges: edges.iter().map(|e| GraphEdge { from: [e[0], e[1]], to: [e[2], e[3]] }).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant { velocity: [f64; 2] },
    Rotation { omega: f64 },
    Linear { rate: f64 },
}

impl FieldConfig {
    pub fn to_field(&self) -> VectorField {
        match *self {
            FieldConfig::Constant { velocity } => VectorField::constant(velocity),
            FieldConfig::Rotation { omega } => VectorField::rotation(omega),
            FieldConfig::Linear { rate } => VectorField::linear(rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    #[default]
    Lebesgue,
    GraphAtoms { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_chars: usize,
    pub ds: f64,
    pub horizon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_chars: 1, ds: 1e-3, horizon: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Uniform(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingRule {
    /// Incoming node `i` is fed by outgoing node `i`.
    Identity,
    /// Incoming node `i` is fed by outgoing node `i - 1` (mod n).
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pairing {
    Rule(PairingRule),
    Explicit(Vec<usize>),
}

impl Default for Pairing {
    fn default() -> Self {
        Pairing::Rule(PairingRule::Identity)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryConfig {
    #[default]
    Zero,
    Multiplicative {
        alpha: Gain,
        #[serde(default)]
        pairing: Pairing,
    },
    /// Headerless delimited matrix, one row per incoming node.
    Kernel { file: PathBuf },
    Sum { parts: Vec<BoundaryConfig> },
}

/// Named test functions used as initial data and sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    /// First coordinate.
    Coordinate,
    /// `sin(pi x)` in the first coordinate.
    SinPi,
    /// Smooth compactly supported bump centred in the bounding box.
    Bump,
}

impl TestFunction {
    pub fn eval(self, x: Point, domain: &Domain) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Coordinate => x[0],
            TestFunction::SinPi => (std::f64::consts::PI * x[0]).sin(),
            TestFunction::Bump => {
                let bb = domain.bounding_box();
                let mut r2 = 0.0;
                let mut radius = f64::INFINITY;
                for ((&lo, &hi), &xk) in bb.lo.iter().zip(&bb.hi).zip(&x).take(bb.dim) {
                    let hi = hi.min(lo + 2.0);
                    let c = 0.5 * (lo + hi);
                    radius = radius.min(0.4 * (hi - lo));
                    r2 += (xk - c).powi(2);
                }
                let q = 1.0 - r2 / (radius * radius);
                if q > 0.0 {
                    q.powi(4)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p: f64,
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_k: Option<usize>,
    pub mode: Mode,
    /// First level of the truncation grid; also the `delta` reported by
    /// `growth-bound`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub initial: TestFunction,
    pub source: TestFunction,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            times: (0..=6).map(|k| 0.5 * k as f64).collect(),
            lambdas: vec![1.0, 2.0, 5.0],
            series_k: None,
            mode: Mode::ExactShift,
            delta: None,
            initial: TestFunction::SinPi,
            source: TestFunction::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: DomainConfig,
    pub field: FieldConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// On-disk form: every section optional, filled from `preset` when given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<String>,
    name: Option<String>,
    domain: Option<DomainConfig>,
    field: Option<FieldConfig>,
    measure: Option<MeasureConfig>,
    grid: Option<GridConfig>,
    boundary: Option<BoundaryConfig>,
    run: Option<RunConfig>,
}

pub const PRESETS: [&str; 5] = ["slab1d", "disk2d", "rotation2d", "triangle_graph", "linear1d"];

/// Built-in scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let multiplicative = |alpha: f64, pairing: PairingRule| BoundaryConfig::Multiplicative {
        alpha: Gain::Uniform(alpha),
        pairing: Pairing::Rule(pairing),
    };
    let cfg = match name {
        "slab1d" => ScenarioConfig {
            name: name.into(),
            domain: DomainConfig::Interval { lo: 0.0, hi: 1.0 },
            field: FieldConfig::Constant { velocity: [1.0, 0.0] },
            measure: MeasureConfig::Lebesgue,
            grid: GridConfig { n_chars: 1, ds: 1e-3, horizon: 10.0 },
            boundary: multiplicative(0.5, PairingRule::Identity),
            run: RunConfig::default(),
        },
        "disk2d" => ScenarioConfig {
            name: name.into(),
            domain: DomainConfig::Disk { center: [0.0, 0.0], radius: 1.0 },
            field: FieldConfig::Constant { velocity: [1.0, 0.0] },
            measure: MeasureConfig::Lebesgue,
            grid: GridConfig { n_chars: 64, ds: 1e-3, horizon: 10.0 },
            boundary: multiplicative(0.5, PairingRule::Identity),
            run: RunConfig {
                times: vec![0.0, 0.5, 1.0, 1.5, 2.0],
                initial: TestFunction::Bump,
                ..RunConfig::default()
            },
        },
        "rotation2d" => ScenarioConfig {
            name: name.into(),
            domain: DomainConfig::Annulus { center: [0.0, 0.0], inner: 1.0, outer: 2.0 },
            field: FieldConfig::Rotation { omega: 1.0 },
            measure: MeasureConfig::Lebesgue,
            grid: GridConfig { n_chars: 32, ds: 1e-3, horizon: 10.0 },
            boundary: BoundaryConfig::Zero,
            run: RunConfig { initial: TestFunction::Coordinate, ..RunConfig::default() },
        },
        "triangle_graph" => {
            let h = 0.75f64.sqrt();
            ScenarioConfig {
                name: name.into(),
                domain: DomainConfig::Graph {
                    edges: vec![[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.5, h], [0.5, h, 0.0, 0.0]],
                },
                field: FieldConfig::Constant { velocity: [0.0, 0.0] },
                measure: MeasureConfig::GraphAtoms { weights: vec![1.0, 1.0, 1.0] },
                grid: GridConfig { n_chars: 3, ds: 1e-3, horizon: 10.0 },
                boundary: multiplicative(1.0, PairingRule::Cyclic),
                run: RunConfig { initial: TestFunction::One, ..RunConfig::default() },
            }
        }
        "linear1d" => ScenarioConfig {
            name: name.into(),
            domain: DomainConfig::Interval { lo: 1.0, hi: 2.0 },
            field: FieldConfig::Linear { rate: 1.0 },
            measure: MeasureConfig::Lebesgue,
            grid: GridConfig { n_chars: 1, ds: 1e-3, horizon: 10.0 },
            boundary: BoundaryConfig::Zero,
            run: RunConfig::default(),
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown preset `{name}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation { field: field.into(), reason: reason.into() }
}

impl ScenarioConfig {
    /// Parses TOML text; relative kernel paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let base = file.preset.as_deref().map(preset).transpose()?;
        let need = |what: &str| Error::Config(format!("missing [{what}] section and no preset given"));
        let mut cfg = ScenarioConfig {
            name: file
                .name
                .or_else(|| base.as_ref().map(|b| b.name.clone()))
                .unwrap_or_else(|| "custom".into()),
            domain: match file.domain {
                Some(d) => d,
                None => base.as_ref().map(|b| b.domain.clone()).ok_or_else(|| need("domain"))?,
            },
            field: match file.field {
                Some(f) => f,
                None => base.as_ref().map(|b| b.field.clone()).ok_or_else(|| need("field"))?,
            },
            measure: file.measure.or_else(|| base.as_ref().map(|b| b.measure.clone())).unwrap_or_default(),
            grid: file.grid.or_else(|| base.as_ref().map(|b| b.grid.clone())).unwrap_or_default(),
            boundary: file.boundary.or_else(|| base.as_ref().map(|b| b.boundary.clone())).unwrap_or_default(),
            run: file.run.or_else(|| base.as_ref().map(|b| b.run.clone())).unwrap_or_default(),
        };
        if let Some(dir) = base_dir {
            resolve_paths(&mut cfg.boundary, dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        let grid = &self.grid;
        if !(run.p > 1.0 && run.p.is_finite()) {
            return Err(invalid("run.p", format!("must lie in (1, inf), got {}", run.p)));
        }
        if !(grid.ds > 0.0 && grid.ds.is_finite()) {
            return Err(invalid("grid.ds", format!("must be positive, got {}", grid.ds)));
        }
        if !(grid.horizon >= grid.ds) {
            return Err(invalid("grid.horizon", "must be at least grid.ds"));
        }
        if grid.n_chars == 0 {
            return Err(invalid("grid.n_chars", "must be at least 1"));
        }
        for &t in &run.times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("run.times", format!("times must be nonnegative, got {t}")));
            }
            if run.mode == Mode::ExactShift {
                let r = t / grid.ds;
                if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                    return Err(invalid(
                        "run.times",
                        format!("{t} is not a multiple of grid.ds = {} in exact-shift mode", grid.ds),
                    ));
                }
            }
        }
        if let Some(&l) = run.lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid("run.lambdas", format!("must be positive, got {l}")));
        }
        if let Some(d) = run.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("run.delta", format!("must be positive, got {d}")));
            }
        }
        if let (DomainConfig::Graph { edges }, MeasureConfig::GraphAtoms { weights }) = (&self.domain, &self.measure) {
            if edges.len() != weights.len() {
                return Err(invalid(
                    "measure.weights",
                    format!("{} weights for {} edges", weights.len(), edges.len()),
                ));
            }
            if weights.iter().any(|w| !(*w > 0.0)) {
                return Err(invalid("measure.weights", "weights must be positive"));
            }
        }
        let empty = match &self.domain {
            DomainConfig::Interval { lo, hi } => !(hi > lo),
            DomainConfig::Box { lo, hi } => !(hi[0] > lo[0] && hi[1] > lo[1]),
            DomainConfig::Disk { radius, .. } => !(*radius > 0.0),
            DomainConfig::Annulus { inner, outer, .. } => !(*inner >= 0.0 && outer > inner),
            DomainConfig::Graph { edges } => edges.is_empty(),
        };
        if empty {
            return Err(invalid("domain", "domain is empty"));
        }
        validate_boundary(&self.boundary)
    }

    /// First truncation level of the `delta` grid.
    pub fn delta0(&self) -> f64 {
        self.run.delta.unwrap_or(crate::semigroup::DEFAULT_DELTA0)
    }
}

fn validate_boundary(b: &BoundaryConfig) -> Result<()> {
    match b {
        BoundaryConfig::Multiplicative { alpha, .. } => {
            let ok = match alpha {
                Gain::Uniform(a) => a.is_finite(),
                Gain::PerNode(v) => v.iter().all(|a| a.is_finite()),
            };
            if !ok {
                return Err(invalid("boundary.alpha", "gains must be finite"));
            }
            Ok(())
        }
        BoundaryConfig::Sum { parts } => parts.iter().try_for_each(validate_boundary),
        _ => Ok(()),
    }
}

fn resolve_paths(b: &mut BoundaryConfig, dir: &Path) {
    match b {
        BoundaryConfig::Kernel { file } if file.is_relative() => *file = dir.join(&*file),
        BoundaryConfig::Sum { parts } => parts.iter_mut().for_each(|p| resolve_paths(p, dir)),
        _ => {}
    }
}

/// Reads a scenario from a file, or expands a preset name.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    if !path.exists() {
        if let Some(name) = path.to_str().filter(|s| PRESETS.contains(s)) {
            return preset(name);
        }
    }
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text, path.parent())
}

/// A scenario with its flow, grid and boundary operator built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub domain: Domain,
    pub flow: Flow,
    pub grid: Arc<CharacteristicGrid>,
    pub boundary: BoundaryOperator,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.domain.to_domain();
        let flow = Flow::new(config.field.to_field(), domain.clone(), config.grid.ds / 4.0, config.grid.horizon)?;
        let measure = match &config.measure {
            MeasureConfig::Lebesgue => Measure::Lebesgue,
            MeasureConfig::GraphAtoms { weights } => Measure::GraphAtoms(weights.clone()),
        };
        let grid = Arc::new(CharacteristicGrid::build(&flow, &measure, config.grid.n_chars, config.grid.ds)?);
        let boundary = build_boundary(&config.boundary, &grid)?;
        Ok(Self { config: config.clone(), domain, flow, grid, boundary })
    }

    pub fn p(&self) -> f64 {
        self.config.run.p
    }

    pub fn function(&self, f: TestFunction) -> Result<GridFunction> {
        let domain = &self.domain;
        GridFunction::from_fn(self.grid.clone(), self.p(), |x| f.eval(x, domain))
    }

    pub fn initial(&self) -> Result<GridFunction> {
        self.function(self.config.run.initial)
    }

    pub fn source(&self) -> Result<GridFunction> {
        self.function(self.config.run.source)
    }
}

pub fn build_grid(config: &ScenarioConfig) -> Result<Arc<CharacteristicGrid>> {
    Ok(Scenario::build(config)?.grid)
}

pub fn build_boundary(b: &BoundaryConfig, grid: &CharacteristicGrid) -> Result<BoundaryOperator> {
    let (n_in, n_out) = (grid.inlets().len(), grid.outlets().len());
    let op = match b {
        BoundaryConfig::Zero => BoundaryOperator::Zero { n_in, n_out },
        BoundaryConfig::Multiplicative { alpha, pairing } => {
            let alpha = match alpha {
                Gain::Uniform(a) => vec![*a; n_in],
                Gain::PerNode(v) => v.clone(),
            };
            let pairing = match pairing {
                Pairing::Explicit(v) => v.clone(),
                Pairing::Rule(rule) => {
                    if n_out == 0 {
                        return Err(invalid("boundary.pairing", "grid has no outgoing nodes"));
                    }
                    match rule {
                        PairingRule::Identity if n_in == n_out => (0..n_in).collect(),
                        PairingRule::Identity => {
                            return Err(invalid(
                                "boundary.pairing",
                                format!("identity pairing needs equal node counts, got {n_in} in / {n_out} out"),
                            ))
                        }
                        PairingRule::Cyclic => (0..n_in).map(|i| (i + n_out - 1) % n_out).collect(),
                    }
                }
            };
            BoundaryOperator::multiplicative(alpha, pairing, n_out)
                .map_err(|e| invalid("boundary", e.to_string()))?
        }
        BoundaryConfig::Kernel { file } => BoundaryOperator::kernel_from_csv(file, grid)?,
        BoundaryConfig::Sum { parts } => {
            BoundaryOperator::Sum(parts.iter().map(|p| build_boundary(p, grid)).collect::<Result<_>>()?)
        }
    };
    op.check_grid(grid)?;
    Ok(op)
}
