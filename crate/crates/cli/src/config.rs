//! Run configuration files (TOML). See `docs/config.md` for the schema.

use std::collections::BTreeMap;
use std::path::PathBuf;

use markedgibbs::gibbsmc::SamplerConfig;
use markedgibbs::lpintegrate::{MarkRule, PositionRule, QuadratureScheme, SchemeKind};
use markedgibbs::{canonicalize, FiniteConfiguration, Mark, MarkSpace, MarkedPoint, ModelSpec, SubBox};
use serde::{Deserialize, Serialize};

use crate::verify::Budget;
use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Radius,
    Expand,
    Correlate,
    Sample,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Radius => "radius",
            Command::Expand => "expand",
            Command::Correlate => "correlate",
            Command::Sample => "sample",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    /// Active region; the whole position box when absent.
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub radius: RadiusConfig,
    pub expand: Option<ExpandConfig>,
    pub correlate: Option<CorrelateConfig>,
    pub sample: Option<SampleConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// The JSON report.
    #[default]
    Report,
    /// The command's CSV table.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "toy-repulsive-spin".into(),
            parameters: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKindName {
    Grid,
    MonteCarlo,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkRuleName {
    Exact,
    Trapezoid,
    Gauss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub kind: SchemeKindName,
    pub points_per_axis: usize,
    pub rule: PositionRule,
    pub samples: usize,
    pub max_nodes: usize,
    pub mark_rule: MarkRuleName,
    pub mark_nodes: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            kind: SchemeKindName::Hybrid,
            points_per_axis: 16,
            rule: PositionRule::GaussLegendre,
            samples: 100_000,
            max_nodes: 2_000_000,
            mark_rule: MarkRuleName::Exact,
            mark_nodes: 16,
        }
    }
}

impl SchemeConfig {
    /// The scheme with Monte Carlo streams keyed to the run seed.
    pub fn build(&self, seed: u64) -> QuadratureScheme {
        let kind = match self.kind {
            SchemeKindName::Grid => SchemeKind::TensorGrid {
                points_per_axis: self.points_per_axis,
                rule: self.rule,
            },
            SchemeKindName::MonteCarlo => SchemeKind::MonteCarlo {
                samples: self.samples,
                seed,
            },
            SchemeKindName::Hybrid => SchemeKind::Hybrid {
                points_per_axis: self.points_per_axis,
                rule: self.rule,
                max_nodes: self.max_nodes,
                samples: self.samples,
                seed,
            },
        };
        let mark_rule = match self.mark_rule {
            MarkRuleName::Exact => MarkRule::ExactDiscreteSum,
            MarkRuleName::Trapezoid => MarkRule::PeriodicTrapezoid { nodes: self.mark_nodes },
            MarkRuleName::Gauss => MarkRule::Gauss { nodes: self.mark_nodes },
        };
        QuadratureScheme { kind, mark_rule }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiusConfig {
    /// Reference points per axis for `C(beta)`.
    pub reference_grid: usize,
}

impl Default for RadiusConfig {
    fn default() -> Self {
        Self { reference_grid: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    /// Fixed truncation order.
    pub order: Option<usize>,
    /// Target for the tail bound; picks the smallest sufficient order.
    pub accuracy: Option<f64>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
}

fn default_max_order() -> usize {
    6
}

/// A mark as written in a config: an integer label or a real value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarkValue {
    Integer(i64),
    Real(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub position: Vec<f64>,
    pub mark: MarkValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    pub order: usize,
    pub sets: Vec<Vec<PointConfig>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    Mcmc,
    Rejection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub method: SampleMethod,
    /// Independent MCMC chains.
    #[serde(default = "one")]
    pub chains: u64,
    /// Exact draws for the rejection sampler.
    #[serde(default)]
    pub draws: usize,
    /// Optional line-delimited sample file.
    pub sample_file: Option<PathBuf>,
    /// Exterior points held fixed outside the region.
    #[serde(default)]
    pub boundary: Vec<PointConfig>,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub budget: Budget,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(config_error(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.command
            .ok_or_else(|| config_error("no command: set `command` in the config or pass --command"))
    }

    /// Checks that the fields the command needs are present and consistent.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.command()? {
            Command::Radius | Command::Verify => {}
            Command::Expand => {
                let e = self
                    .expand
                    .as_ref()
                    .ok_or_else(|| config_error("`expand` needs an [expand] section"))?;
                match (e.order, e.accuracy) {
                    (Some(0), _) => return Err(config_error("expand.order must be at least 1")),
                    (Some(_), Some(_)) => return Err(config_error("set one of expand.order and expand.accuracy")),
                    (None, None) => return Err(config_error("expand needs `order` or `accuracy`")),
                    (None, Some(a)) if !(a > 0.0) => return Err(config_error("expand.accuracy must be positive")),
                    _ => {}
                }
                if e.max_order == 0 {
                    return Err(config_error("expand.max_order must be at least 1"));
                }
            }
            Command::Correlate => {
                let c = self
                    .correlate
                    .as_ref()
                    .ok_or_else(|| config_error("`correlate` needs a [correlate] section"))?;
                if c.sets.is_empty() {
                    return Err(config_error("correlate.sets is empty"));
                }
            }
            Command::Sample => {
                let s = self
                    .sample
                    .as_ref()
                    .ok_or_else(|| config_error("`sample` needs a [sample] section"))?;
                match s.method {
                    SampleMethod::Mcmc if s.chains == 0 => return Err(config_error("sample.chains must be positive")),
                    SampleMethod::Mcmc if s.sample_file.is_some() && s.chains != 1 => {
                        return Err(config_error("sample_file needs a single chain"));
                    }
                    SampleMethod::Rejection if s.draws < 2 => {
                        return Err(config_error("rejection sampling needs sample.draws >= 2"));
                    }
                    _ => {}
                }
                s.sampler.validate().map_err(|e| config_error(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn region(&self, model: &ModelSpec) -> Result<SubBox, CliError> {
        let region = match &self.region {
            None => model.space.full_box(),
            Some(r) => SubBox::new(r.lower.clone(), r.upper.clone()).map_err(|e| config_error(e.to_string()))?,
        };
        if region.dimension() != model.space.dimension() || !model.space.contains_box(&region) {
            return Err(config_error(format!("region {region} is not inside the model box")));
        }
        Ok(region)
    }
}

fn mark_of(v: MarkValue, marks: &MarkSpace) -> Result<Mark, CliError> {
    let mark = match (marks, v) {
        (MarkSpace::Discrete { .. }, MarkValue::Integer(i)) => {
            Mark::Label(i32::try_from(i).map_err(|_| config_error(format!("label {i} out of range")))?)
        }
        (MarkSpace::Discrete { .. }, MarkValue::Real(r)) => {
            return Err(config_error(format!("mark {r} must be an integer label")));
        }
        (MarkSpace::Circle { .. }, v) => Mark::Angle(real(v)),
        (MarkSpace::Interval { .. }, v) => Mark::Real(real(v)),
    };
    if !marks.contains(&mark) {
        return Err(config_error(format!("mark {mark:?} is not in the mark space")));
    }
    Ok(mark)
}

fn real(v: MarkValue) -> f64 {
    match v {
        MarkValue::Integer(i) => i as f64,
        MarkValue::Real(r) => r,
    }
}

pub fn configuration(points: &[PointConfig], model: &ModelSpec) -> Result<FiniteConfiguration, CliError> {
    let pts = points
        .iter()
        .map(|p| {
            if p.position.len() != model.space.dimension() || !model.space.contains(&p.position) {
                return Err(config_error(format!("point {:?} is not in the model box", p.position)));
            }
            Ok(MarkedPoint::new(p.position.clone(), mark_of(p.mark, &model.marks)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    canonicalize(pts).map_err(|e| config_error(e.to_string()))
}
