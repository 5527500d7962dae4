//! Report records (JSON) and their CSV tables. See `docs/report.md`.

use std::collections::BTreeMap;
use std::io::Write;

use markedgibbs::cluster::{ExpansionReport, RadiusCertificate};
use markedgibbs::gibbsmc::ChainStats;
use markedgibbs::lpintegrate::QuadratureScheme;
use markedgibbs::scalar::extended_real;
use markedgibbs::{MarkedPoint, SubBox};
use serde::{Deserialize, Serialize};

use crate::config::{Command, SampleMethod};
use crate::verify::{Budget, PropertyResult};
use crate::CliError;

pub const REPORT_SCHEMA: &str = "markedgibbs-report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A float that may be infinite or NaN, written as `"inf"`, `"-inf"` or `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Extended(#[serde(with = "extended_real")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub schema_version: u32,
    pub command: Command,
    pub provenance: Provenance,
    pub result: CommandResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub model: String,
    pub description: String,
    /// Every model parameter after defaults and overrides.
    pub parameters: BTreeMap<String, f64>,
    pub potential: String,
    pub stability_b: f64,
    /// `null` for potentials without a finite range.
    pub interaction_range: Option<f64>,
    pub activity: f64,
    pub beta: f64,
    pub c_beta: Extended,
    pub z_star: Extended,
    pub within_radius: bool,
    pub region: SubBox,
    pub truncation_order: Option<usize>,
    pub tail_bound: Option<Extended>,
    pub seed: u64,
    pub scheme: Option<QuadratureScheme>,
    pub rng: String,
    pub correlation_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandResult {
    Radius(RadiusResult),
    Expand(ExpansionReport),
    Correlate(CorrelateResult),
    Sample(SampleResult),
    Verify(VerifyResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusResult {
    pub certificate: RadiusCertificate,
    pub reference_grid: usize,
    /// `C(beta)` on the doubled reference grid and its relative change.
    pub c_beta_refined: f64,
    pub refinement_change: f64,
    pub argmax: MarkedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationValue {
    pub points: Vec<MarkedPoint>,
    pub value: f64,
    pub integration_error: f64,
    pub tail_bound: Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateResult {
    pub order: usize,
    pub values: Vec<CorrelationValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSummary {
    /// Birth, death, move, mark-resample.
    pub acceptance_rates: [f64; 4],
    pub tau_int: Extended,
    pub window_density: Option<(f64, f64)>,
    pub stats: ChainStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectionSummary {
    pub attempts: u64,
    pub acceptance_rate: f64,
    pub proposal_activity: f64,
    pub mean_count: f64,
    pub count_variance: f64,
    pub empty_fraction: f64,
    /// Frequency of each point count, indexed by count.
    pub count_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleResult {
    pub method: SampleMethod,
    pub samples: u64,
    /// Mark-summed one-point density over the region and its standard error.
    pub density: f64,
    pub density_se: Extended,
    pub sample_file: Option<String>,
    pub chain: Option<ChainSummary>,
    pub rejection: Option<RejectionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyResult {
    pub budget: Budget,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl Report {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let r: Report = serde_json::from_str(text).map_err(|e| CliError::Output(e.to_string()))?;
        if r.schema != REPORT_SCHEMA || r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CliError::Output(format!(
                "unsupported report schema {} v{}",
                r.schema, r.schema_version
            )));
        }
        Ok(r)
    }

    /// The command's table: coefficients, correlation values, histograms or
    /// property results.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let e = |e: csv::Error| CliError::Output(e.to_string());
        match &self.result {
            CommandResult::Radius(r) => {
                w.write_record(["c_beta", "z_star", "activity", "q", "within_radius"]).map_err(e)?;
                let c = &r.certificate;
                w.write_record([
                    c.c_beta.to_string(),
                    c.z_star.to_string(),
                    c.activity.to_string(),
                    c.q.to_string(),
                    c.within_radius.to_string(),
                ])
                .map_err(e)?;
            }
            CommandResult::Expand(r) => {
                w.write_record(["order", "coefficient", "error"]).map_err(e)?;
                for (i, (c, err)) in r.coefficients.iter().zip(&r.coefficient_errors).enumerate() {
                    w.write_record([(i + 1).to_string(), c.to_string(), err.to_string()]).map_err(e)?;
                }
            }
            CommandResult::Correlate(r) => {
                w.write_record(["set", "points", "value", "integration_error", "tail_bound"]).map_err(e)?;
                for (i, v) in r.values.iter().enumerate() {
                    let pts = v
                        .points
                        .iter()
                        .map(|p| format!("{:?}:{}", p.position, p.mark.value()))
                        .collect::<Vec<_>>()
                        .join(" ");
                    w.write_record([
                        i.to_string(),
                        pts,
                        v.value.to_string(),
                        v.integration_error.to_string(),
                        v.tail_bound.0.to_string(),
                    ])
                    .map_err(e)?;
                }
            }
            CommandResult::Sample(r) => {
                if let Some(chain) = &r.chain {
                    let stats = &chain.stats;
                    let width = stats.histogram_range / stats.pair_histogram.len() as f64;
                    w.write_record(["bin_lower", "bin_upper", "pair_count"]).map_err(e)?;
                    for (i, c) in stats.pair_histogram.iter().enumerate() {
                        w.write_record([
                            (i as f64 * width).to_string(),
                            ((i + 1) as f64 * width).to_string(),
                            c.to_string(),
                        ])
                        .map_err(e)?;
                    }
                } else if let Some(rej) = &r.rejection {
                    w.write_record(["points", "draws"]).map_err(e)?;
                    for (n, c) in rej.count_histogram.iter().enumerate() {
                        w.write_record([n.to_string(), c.to_string()]).map_err(e)?;
                    }
                }
            }
            CommandResult::Verify(r) => {
                w.write_record(["id", "name", "passed", "observed", "allowed", "detail"]).map_err(e)?;
                for p in &r.properties {
                    w.write_record([
                        p.id.to_string(),
                        p.name.clone(),
                        p.passed.to_string(),
                        p.observed.to_string(),
                        p.allowed.to_string(),
                        p.detail.clone(),
                    ])
                    .map_err(e)?;
                }
            }
        }
        w.flush().map_err(|err| CliError::Output(err.to_string()))
    }
}
