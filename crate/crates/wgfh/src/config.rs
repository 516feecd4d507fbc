//! JSON experiment configuration.
//!
//! Parsing goes through `serde_path_to_error` so schema errors carry a JSON pointer;
//! semantic checks (ranges, orderings, resonance) report pointers the same way.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wgfh_core::cell::CellOptions;
use wgfh_core::expr::{parse, Expr};
use wgfh_core::gamma::PiecewiseAffine;
use wgfh_core::media::{resonance, Density, Medium, Mobility, MobilityFamily, PiField};

use crate::error::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Solve,
    Effective,
    Edi,
    Sweep,
    Metric,
    Gamma,
    Checkerboard,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Solve,
        Kind::Effective,
        Kind::Edi,
        Kind::Sweep,
        Kind::Metric,
        Kind::Gamma,
        Kind::Checkerboard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Effective => "effective",
            Kind::Edi => "edi",
            Kind::Sweep => "sweep",
            Kind::Metric => "metric",
            Kind::Gamma => "gamma",
            Kind::Checkerboard => "checkerboard",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A number, an expression string, or a tagged parametric family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MobilitySpec {
    Value(f64),
    Expr(String),
    Family(MobilityFamilySpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityFamilySpec {
    Constant { value: f64 },
    Sinusoidal { mean: f64, amplitude: f64 },
    Layered { values: Vec<f64> },
    Checkerboard { alpha: f64, beta: f64 },
    Diagonal { entries: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Value(f64),
    Expr(String),
    Family(FieldFamilySpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldFamilySpec {
    Layered { values: Vec<f64> },
    SqrtMobility { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Split(SplitSpec),
    Field(FieldSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    /// `pi0(x) + pi1(x, y)`.
    Oscillatory { pi0: FieldSpec, pi1: FieldSpec },
    /// `pi0(x) + eps pi1(x, y)`.
    Uniform { pi0: FieldSpec, pi1: FieldSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(rename = "B")]
    pub b: MobilitySpec,
    pub pi: DensitySpec,
    pub bounds: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSpec {
    /// Slow grid cells per axis at whose centres the tensors are reported. A medium
    /// without slow dependence, or `1`, gives a single row at the domain centre.
    #[serde(default = "sixteen")]
    pub slow_cells: usize,
    /// Random directions per slow point for the variational cross-check.
    #[serde(default = "twenty")]
    pub directions: usize,
}

impl Default for EffectiveSpec {
    fn default() -> Self {
        EffectiveSpec {
            slow_cells: 16,
            directions: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub x: f64,
    #[serde(default = "half")]
    pub y: f64,
    #[serde(default = "metric_rho0")]
    pub rho0: String,
    #[serde(default = "metric_rho1")]
    pub rho1: String,
    /// Cells of the grid carrying the two densities.
    #[serde(default = "metric_cells")]
    pub cells: usize,
    /// Require the equality case `C_bar = B_bar`.
    #[serde(default)]
    pub expect_equality: bool,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            x: 0.0,
            y: 0.5,
            rho0: metric_rho0(),
            rho1: metric_rho1(),
            cells: metric_cells(),
            expect_equality: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerboardSpec {
    #[serde(default)]
    pub source: [f64; 2],
    #[serde(default = "corner")]
    pub target: [f64; 2],
    /// Lattice nodes per period along each axis.
    #[serde(default = "eight")]
    pub per_period: usize,
    #[serde(default)]
    pub diagonals: bool,
    /// Relative tolerance on the Finsler limit at the smallest `eps`.
    #[serde(default = "five_percent")]
    pub tolerance: f64,
}

impl Default for CheckerboardSpec {
    fn default() -> Self {
        CheckerboardSpec {
            source: [0.0, 0.0],
            target: corner(),
            per_period: 8,
            diagonals: false,
            tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub pieces: usize,
    pub slopes: Vec<[f64; 2]>,
    pub offsets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSpec {
    #[serde(default = "two")]
    pub d1: f64,
    #[serde(default = "four")]
    pub d2: f64,
    /// Piecewise-affine data; the tent `min(x1, 1 - x1)` when absent.
    #[serde(default)]
    pub data: Option<DataSpec>,
    /// Expression in `x` averaged over each piece into `f_bar`.
    #[serde(default)]
    pub weight: Option<String>,
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec {
            d1: 2.0,
            d2: 4.0,
            data: None,
            weight: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub kind: Option<Kind>,
    pub medium: MediumSpec,
    /// Initial density `rho0(x)`, normalized after sampling.
    #[serde(default = "default_initial")]
    pub initial: String,
    /// Strictly decreasing, each `1/m` for an integer `m`.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Flow grid cells per axis.
    #[serde(default)]
    pub cells: Option<usize>,
    /// Cells per axis of the fast torus in cell problems.
    #[serde(default = "default_ycells")]
    pub ycells: usize,
    /// Time step; `h / 4` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Report times; `[t_final]` when empty.
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub effective: EffectiveSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub checkerboard: CheckerboardSpec,
    #[serde(default)]
    pub gamma: GammaSpec,
}

fn sixteen() -> usize {
    16
}

fn one() -> usize {
    1
}
fn eight() -> usize {
    8
}
fn twenty() -> usize {
    20
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn four() -> f64 {
    4.0
}
fn five_percent() -> f64 {
    0.05
}
fn corner() -> [f64; 2] {
    [1.0, 1.0]
}
fn metric_rho0() -> String {
    "1 + 0.5*cos(2*pi*x)".into()
}
fn metric_rho1() -> String {
    "1 - 0.5*sin(2*pi*x)".into()
}
fn metric_cells() -> usize {
    1024
}
fn default_initial() -> String {
    "1 + 0.5*cos(2*pi*x)".into()
}
fn default_ycells() -> usize {
    64
}
fn default_t_final() -> f64 {
    0.1
}

fn config_error(pointer: impl Into<String>, message: impl fmt::Display) -> RunError {
    RunError::Config {
        pointer: pointer.into(),
        message: message.to_string(),
    }
}

/// `serde_path_to_error` paths (`a.b[2]`) as JSON pointers (`/a/b/2`).
fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(pointer_from_path(e.path()), e.inner()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let bytes = std::fs::read(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&bytes)
    }

    /// Canonical JSON bytes (defaults filled in), the input of the config hash.
    pub fn canonical(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("configs serialize")
    }

    pub fn name(&self, kind: Kind) -> String {
        self.name.clone().unwrap_or_else(|| kind.name().to_string())
    }

    pub fn dim(&self) -> usize {
        self.medium.dim
    }

    pub fn flow_cells(&self) -> usize {
        self.cells.unwrap_or(if self.dim() == 1 { 4096 } else { 128 })
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(0.25 / self.flow_cells() as f64)
    }

    pub fn report_times(&self) -> Vec<f64> {
        if self.output_times.is_empty() {
            vec![self.t_final]
        } else {
            self.output_times.clone()
        }
    }

    pub fn cell_options(&self) -> CellOptions {
        CellOptions {
            ycells: self.ycells,
            ..CellOptions::default()
        }
    }

    /// Range and consistency checks for `kind`; the first violation is reported.
    pub fn validate(&self, kind: Kind) -> Result<(), RunError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(config_error("/kind", format!("config is for `{k}` but `{kind}` was requested")));
            }
        }
        let m = &self.medium;
        if !(m.dim == 1 || m.dim == 2) {
            return Err(config_error("/medium/dim", format!("dimension must be 1 or 2, got {}", m.dim)));
        }
        let [c1, c2] = m.bounds;
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return Err(config_error("/medium/bounds", format!("need 0 < C1 <= C2, got [{c1}, {c2}]")));
        }
        for (k, e) in self.eps.iter().enumerate() {
            let inv = 1.0 / e;
            if !(*e > 0.0 && *e <= 1.0) || (inv - inv.round()).abs() > 1e-9 * inv {
                return Err(config_error(format!("/eps/{k}"), format!("eps must be 1/m for an integer m >= 1, got {e}")));
            }
            if k > 0 && !(*e < self.eps[k - 1]) {
                return Err(config_error(
                    format!("/eps/{k}"),
                    format!("eps list must be strictly decreasing: {} then {e}", self.eps[k - 1]),
                ));
            }
        }
        if self.ycells < 32 {
            return Err(config_error("/ycells", format!("ycells must be at least 32, got {}", self.ycells)));
        }
        if let Some(c) = self.cells {
            if c < 2 {
                return Err(config_error("/cells", "cells must be at least 2"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_error("/dt", format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(config_error("/t_final", format!("t_final must be positive, got {}", self.t_final)));
        }
        for (k, t) in self.output_times.iter().enumerate() {
            if !(*t > 0.0 && *t <= self.t_final * (1.0 + 1e-12)) {
                return Err(config_error(format!("/output_times/{k}"), format!("output time {t} is outside (0, t_final]")));
            }
            if k > 0 && !(*t > self.output_times[k - 1]) {
                return Err(config_error(format!("/output_times/{k}"), "output times must be increasing"));
            }
        }
        let needs_eps = matches!(kind, Kind::Sweep | Kind::Metric | Kind::Gamma | Kind::Checkerboard | Kind::Edi);
        if needs_eps && self.eps.is_empty() {
            return Err(config_error("/eps", format!("`{kind}` needs a nonempty eps list")));
        }
        if matches!(kind, Kind::Solve | Kind::Edi | Kind::Sweep) {
            let cells = self.flow_cells();
            for (k, e) in self.eps.iter().enumerate() {
                resonance(*e, cells).map_err(|err| config_error(format!("/eps/{k}"), format!("{err} (cells = {cells})")))?;
            }
            if kind == Kind::Sweep && self.eps.len() < 2 {
                return Err(config_error("/eps", "a sweep needs at least two eps values"));
            }
        }
        if kind == Kind::Effective && self.effective.slow_cells == 0 {
            return Err(config_error("/effective/slow_cells", "need at least one slow cell"));
        }
        if kind == Kind::Metric {
            if m.dim != 1 {
                return Err(config_error("/medium/dim", "metric comparisons are one-dimensional"));
            }
            let ms = &self.metric;
            if !(0.0..=1.0).contains(&ms.x) || !(0.0..=1.0).contains(&ms.y) {
                return Err(config_error("/metric", "points must lie in [0, 1]"));
            }
            if ms.cells < 2 {
                return Err(config_error("/metric/cells", "need at least two cells"));
            }
        }
        if kind == Kind::Checkerboard {
            if m.dim != 2 {
                return Err(config_error("/medium/dim", "the checkerboard is two-dimensional"));
            }
            if !matches!(m.b, MobilitySpec::Family(MobilityFamilySpec::Checkerboard { .. })) {
                return Err(config_error("/medium/B", "`checkerboard` needs the checkerboard mobility family"));
            }
            let cb = &self.checkerboard;
            if cb.per_period < 8 {
                return Err(config_error("/checkerboard/per_period", "need at least 8 nodes per period"));
            }
            if !(cb.tolerance > 0.0) {
                return Err(config_error("/checkerboard/tolerance", "tolerance must be positive"));
            }
        }
        if kind == Kind::Gamma && !(0.0 < self.gamma.d1 && self.gamma.d1 < self.gamma.d2) {
            return Err(config_error("/gamma", "need 0 < d1 < d2"));
        }
        self.build_medium()?;
        Ok(())
    }

    pub fn initial_expr(&self) -> Result<Expr, RunError> {
        parse_at("/initial", &self.initial)
    }

    pub fn build_medium(&self) -> Result<Medium, RunError> {
        let m = &self.medium;
        let family = match &m.b {
            MobilitySpec::Value(v) => MobilityFamily::Constant(*v),
            MobilitySpec::Expr(s) => MobilityFamily::Scalar(parse_at("/medium/B", s)?),
            MobilitySpec::Family(f) => match f {
                MobilityFamilySpec::Constant { value } => MobilityFamily::Constant(*value),
                MobilityFamilySpec::Sinusoidal { mean, amplitude } => MobilityFamily::Sinusoidal {
                    mean: *mean,
                    amplitude: *amplitude,
                },
                MobilityFamilySpec::Layered { values } => MobilityFamily::Layered(values.clone()),
                MobilityFamilySpec::Checkerboard { alpha, beta } => MobilityFamily::Checkerboard {
                    alpha: *alpha,
                    beta: *beta,
                },
                MobilityFamilySpec::Diagonal { entries } => MobilityFamily::Diagonal(
                    entries
                        .iter()
                        .enumerate()
                        .map(|(k, s)| parse_at(&format!("/medium/B/entries/{k}"), s))
                        .collect::<Result<_, _>>()?,
                ),
            },
        };
        let mobility = Mobility::new(m.dim, family, (m.bounds[0], m.bounds[1]))
            .map_err(|e| config_error("/medium/B", e))?;
        let density = match &m.pi {
            DensitySpec::Field(f) => Density::TwoScale(field(f, "/medium/pi")?),
            DensitySpec::Split(SplitSpec::Oscillatory { pi0, pi1 }) => Density::Oscillatory {
                pi0: field(pi0, "/medium/pi/pi0")?,
                pi1: field(pi1, "/medium/pi/pi1")?,
            },
            DensitySpec::Split(SplitSpec::Uniform { pi0, pi1 }) => Density::Uniform {
                pi0: field(pi0, "/medium/pi/pi0")?,
                pi1: field(pi1, "/medium/pi/pi1")?,
            },
        };
        Medium::new(mobility, density).map_err(|e| config_error("/medium/pi", e))
    }

    pub fn gamma_data(&self) -> Result<PiecewiseAffine, RunError> {
        match &self.gamma.data {
            None => Ok(PiecewiseAffine::tent(self.dim())),
            Some(d) => PiecewiseAffine::new(self.dim(), d.pieces, d.slopes.clone(), d.offsets.clone())
                .map_err(|e| config_error("/gamma/data", e)),
        }
    }
}

fn parse_at(pointer: &str, s: &str) -> Result<Expr, RunError> {
    parse(s).map_err(|e| config_error(pointer, e))
}

fn field(f: &FieldSpec, pointer: &str) -> Result<PiField, RunError> {
    Ok(match f {
        FieldSpec::Value(v) => PiField::Constant(*v),
        FieldSpec::Expr(s) => PiField::Expr(parse_at(pointer, s)?),
        FieldSpec::Family(FieldFamilySpec::Layered { values }) => PiField::Layered(values.clone()),
        FieldSpec::Family(FieldFamilySpec::SqrtMobility { scale }) => PiField::SqrtMobility(*scale),
    })
}
