//! Executes a validated [`RunConfig`] and assembles its [`Report`].

use std::fs::File;
use std::io::BufWriter;

use markedgibbs::cluster::{convergence_radius, correlation_truncated, log_partition_truncated, RadiusCertificate};
use markedgibbs::gibbsmc::{
    mcmc_run_chains, mcmc_run_with_stream, BoundaryCondition, ChainStats, RejectionSampler, SampleWriter,
};
use markedgibbs::potential::{builtin, check_integrability, RegistryEntry};
use markedgibbs::{Error, ModelSpec, Region, SubBox};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{configuration, Command, RunConfig, SampleConfig, SampleMethod};
use crate::report::{
    ChainSummary, CommandResult, CorrelateResult, CorrelationValue, Extended, Provenance, RadiusResult,
    RejectionSummary, Report, SampleResult, VerifyResult, REPORT_SCHEMA, REPORT_SCHEMA_VERSION,
};
use crate::verify::run_suite;
use crate::CliError;

const CORRELATION_CONVENTION: &str =
    "rho(points) = sum_n z^n/n! int kbar(points, y); no z^m factor for the m fixed points";

fn module(context: &str) -> impl Fn(Error) -> CliError + '_ {
    move |source| CliError::Module {
        context: context.to_string(),
        source,
    }
}

/// The certificate, or `None` when `C(beta)` is infinite.
fn certificate(model: &ModelSpec, grid: usize) -> Result<Option<RadiusCertificate>, CliError> {
    match convergence_radius(model, grid) {
        Ok(c) => Ok(Some(c)),
        Err(Error::InfiniteCBeta) => Ok(None),
        Err(e) => Err(module("integrability check")(e)),
    }
}

fn provenance(entry: &RegistryEntry, region: &SubBox, cert: Option<&RadiusCertificate>, seed: u64) -> Provenance {
    let model = &entry.model;
    Provenance {
        model: entry.name.clone(),
        description: entry.description.to_string(),
        parameters: entry.parameters.clone(),
        potential: model.potential.name().to_string(),
        stability_b: model.potential.stability_b(),
        interaction_range: model.potential.interaction_range(),
        activity: model.activity,
        beta: model.beta,
        c_beta: Extended(cert.map_or(f64::INFINITY, |c| c.c_beta)),
        z_star: Extended(cert.map_or(0.0, |c| c.z_star)),
        within_radius: cert.is_some_and(|c| c.within_radius),
        region: region.clone(),
        truncation_order: None,
        tail_bound: None,
        seed,
        scheme: None,
        rng: "ChaCha8 (rand_chacha), one stream per chain or chunk".into(),
        correlation_convention: CORRELATION_CONVENTION.into(),
    }
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    config.validate()?;
    let command = config.command()?;
    let entry = builtin(&config.model.name, &config.model.parameters).map_err(|e| CliError::Config(e.to_string()))?;
    let model = &entry.model;
    let region = config.region(model)?;
    let seed = config.seed;
    let cert = certificate(model, config.radius.reference_grid)?;
    let mut prov = provenance(&entry, &region, cert.as_ref(), seed);
    let scheme = config.scheme.build(seed);

    let result = match command {
        Command::Radius => {
            let cert = cert.ok_or_else(|| module("radius")(Error::InfiniteCBeta))?;
            let check = check_integrability(model, config.radius.reference_grid).map_err(module("radius"))?;
            CommandResult::Radius(RadiusResult {
                certificate: cert,
                reference_grid: check.grid_size,
                c_beta_refined: check.c_beta_refined,
                refinement_change: check.refinement_change,
                argmax: check.argmax,
            })
        }
        Command::Expand => {
            let cert = cert.ok_or_else(|| module("expand")(Error::InfiniteCBeta))?;
            let e = config.expand.as_ref().expect("validated");
            let order = match (e.order, e.accuracy) {
                (Some(n), _) => n,
                (None, Some(acc)) => match cert.order_for_accuracy(model.sigma_tau(&region), acc, e.max_order) {
                    Ok(n) => n,
                    Err(Error::OutsideRadius { .. }) => e.max_order,
                    Err(err) => return Err(module("expand")(err)),
                },
                (None, None) => unreachable!("validated"),
            };
            let report = log_partition_truncated(model, &region, order, &scheme, &cert).map_err(module("expand"))?;
            prov.truncation_order = Some(order);
            prov.tail_bound = Some(Extended(report.tail_bound));
            prov.scheme = Some(scheme);
            CommandResult::Expand(report)
        }
        Command::Correlate => {
            let cert = cert.ok_or_else(|| module("correlate")(Error::InfiniteCBeta))?;
            let c = config.correlate.as_ref().expect("validated");
            let mut values = Vec::with_capacity(c.sets.len());
            for set in &c.sets {
                let points = configuration(set, model)?;
                let est = correlation_truncated(&points, model, &region, c.order, &scheme).map_err(module("correlate"))?;
                values.push(CorrelationValue {
                    points: points.points().to_vec(),
                    value: est.value,
                    integration_error: est.error,
                    tail_bound: Extended(cert.correlation_tail_bound(points.len(), c.order)),
                });
            }
            prov.truncation_order = Some(c.order);
            prov.tail_bound = Some(Extended(values.iter().map(|v| v.tail_bound.0).fold(0.0, f64::max)));
            prov.scheme = Some(scheme);
            CommandResult::Correlate(CorrelateResult { order: c.order, values })
        }
        Command::Sample => CommandResult::Sample(sample(
            model,
            &region,
            config.sample.as_ref().expect("validated"),
            seed,
        )?),
        Command::Verify => {
            let properties = run_suite(config.verify.budget, seed);
            CommandResult::Verify(VerifyResult {
                budget: config.verify.budget,
                passed: properties.iter().all(|p| p.passed),
                properties,
            })
        }
    };
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        schema_version: REPORT_SCHEMA_VERSION,
        command,
        provenance: prov,
        result,
    })
}

fn open_stream(
    path: &std::path::Path,
    model: &ModelSpec,
) -> Result<SampleWriter<BufWriter<File>>, CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    SampleWriter::new(BufWriter::new(file), model.space.dimension(), &model.marks).map_err(io)
}

fn sample(model: &ModelSpec, region: &SubBox, s: &SampleConfig, seed: u64) -> Result<SampleResult, CliError> {
    let exterior = configuration(&s.boundary, model)?;
    let boundary = BoundaryCondition::new(exterior, region).map_err(|e| CliError::Config(e.to_string()))?;
    let sampler = markedgibbs::gibbsmc::SamplerConfig { seed, ..s.sampler.clone() };
    let file_name = s.sample_file.as_ref().map(|p| p.display().to_string());
    match s.method {
        SampleMethod::Mcmc => {
            let stats: ChainStats = match &s.sample_file {
                Some(path) => {
                    let mut w = open_stream(path, model)?;
                    let stats = mcmc_run_with_stream(model, region, &boundary, &sampler, &mut w).map_err(module("sample"))?;
                    use std::io::Write;
                    w.into_inner().flush().map_err(|source| CliError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                    stats
                }
                None => mcmc_run_chains(model, region, &boundary, &sampler, s.chains).map_err(module("sample"))?,
            };
            let (density, density_se) = stats.density();
            Ok(SampleResult {
                method: SampleMethod::Mcmc,
                samples: stats.samples(),
                density,
                density_se: Extended(density_se),
                sample_file: file_name,
                chain: Some(ChainSummary {
                    acceptance_rates: stats.acceptance_rates(),
                    tau_int: Extended(stats.tau_int()),
                    window_density: sampler.window.as_ref().map(|_| stats.window_density()),
                    stats,
                }),
                rejection: None,
            })
        }
        SampleMethod::Rejection => {
            let rs = RejectionSampler::new(model, region, &boundary).map_err(module("sample"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut writer = s.sample_file.as_ref().map(|p| open_stream(p, model)).transpose()?;
            let mut counts = Vec::with_capacity(s.draws);
            let mut attempts = 0u64;
            for _ in 0..s.draws {
                let (c, a) = rs.sample(&mut rng);
                attempts += a;
                if let Some(w) = writer.as_mut() {
                    w.write(&c).map_err(|source| CliError::Io {
                        path: file_name.clone().unwrap_or_default(),
                        source,
                    })?;
                }
                counts.push(c.len());
            }
            if let Some(w) = writer {
                use std::io::Write;
                w.into_inner().flush().map_err(|source| CliError::Io {
                    path: file_name.clone().unwrap_or_default(),
                    source,
                })?;
            }
            let n = counts.len() as f64;
            let mean = counts.iter().sum::<usize>() as f64 / n;
            let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let mut hist = vec![0u64; counts.iter().max().map_or(1, |m| m + 1)];
            for &c in &counts {
                hist[c] += 1;
            }
            let vol = region.volume();
            Ok(SampleResult {
                method: SampleMethod::Rejection,
                samples: counts.len() as u64,
                density: mean / vol,
                density_se: Extended((var / n).sqrt() / vol),
                sample_file: file_name,
                chain: None,
                rejection: Some(RejectionSummary {
                    attempts,
                    acceptance_rate: n / attempts as f64,
                    proposal_activity: rs.proposal_activity(),
                    mean_count: mean,
                    count_variance: var,
                    empty_fraction: hist[0] as f64 / n,
                    count_histogram: hist,
                }),
            })
        }
    }
}
