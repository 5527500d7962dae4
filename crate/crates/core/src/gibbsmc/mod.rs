//! Finite-volume specifications, exact rejection sampling, grand-canonical
//! Metropolis-Hastings and the DLR consistency check.

mod dlr;
mod mcmc;
mod stream;

pub use dlr::{dlr_check, locality_trials, DlrReport, LocalityReport};
pub use mcmc::{mcmc_run, mcmc_run_chains, mcmc_run_with_stream, ChainStats, Moments, ProposalMix, SamplerConfig};
pub use stream::{read_sample_stream, SampleWriter, STREAM_HEADER};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpintegrate::sample_point;
use crate::model::{canonicalize, BoxUnion, FiniteConfiguration, MarkSpace, MarkedPoint, ModelSpec, Region, SubBox};
use crate::potential::{energy_of, interaction_of, Profile};

/// Exterior configuration held fixed while a region is resampled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryCondition {
    exterior: FiniteConfiguration,
}

impl BoundaryCondition {
    pub fn new(exterior: FiniteConfiguration, region: &SubBox) -> Result<Self> {
        if let Some(p) = exterior.iter().find(|p| region.contains(&p.position)) {
            return Err(Error::RegionOutOfBounds {
                region: format!("boundary point {:?} inside {region}", p.position),
            });
        }
        Ok(Self { exterior })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn exterior(&self) -> &FiniteConfiguration {
        &self.exterior
    }

    /// Exterior points that can interact with some point of `region`:
    /// all of them for infinite range, otherwise those closer than `R`.
    pub fn effective(&self, model: &ModelSpec, region: &SubBox) -> Vec<MarkedPoint> {
        match model.potential.interaction_range() {
            None => self.exterior.points().to_vec(),
            Some(r) => self
                .exterior
                .iter()
                .filter(|p| model.space.distance_to_box(&p.position, region) < r)
                .cloned()
                .collect(),
        }
    }
}

/// Marked Poisson draw on `region` with intensity `z sigma^tau`.
pub fn poisson_sample<R: Rng + ?Sized>(model: &ModelSpec, region: &SubBox, rng: &mut R) -> FiniteConfiguration {
    poisson_sample_with(model.activity, &model.marks, region, rng)
}

fn poisson_sample_with<R: Rng + ?Sized>(
    activity: f64,
    marks: &MarkSpace,
    region: &SubBox,
    rng: &mut R,
) -> FiniteConfiguration {
    let mean = activity * region.volume() * marks.total_mass();
    let n = if mean > 0.0 {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
    } else {
        0
    };
    let domain = BoxUnion::from(region.clone());
    loop {
        let pts: Vec<MarkedPoint> = (0..n).map(|_| sample_point(marks, &domain, rng)).collect();
        if let Ok(c) = canonicalize(pts) {
            return c;
        }
    }
}

/// `e^{-beta (E(candidate) + W(candidate, boundary))}`, the unnormalized
/// density of the specification w.r.t. the Lebesgue-Poisson measure.
/// Only boundary points within range of `region` enter the sum.
pub fn specification_weight(
    candidate: &FiniteConfiguration,
    boundary: &BoundaryCondition,
    model: &ModelSpec,
    region: &SubBox,
) -> f64 {
    let e = energy_of(candidate.points(), model);
    if e == f64::INFINITY {
        return 0.0;
    }
    let near = boundary.effective(model, region);
    let w = interaction_of(candidate.points(), &near, model);
    model.boltzmann(e + w)
}

/// A lower bound on `phi` when one follows from the profile.
pub fn pair_lower_bound(model: &ModelSpec) -> Option<f64> {
    let mark_abs = match &model.marks {
        MarkSpace::Discrete { labels, .. } => labels.iter().map(|l| (*l as f64).abs()).fold(0.0, f64::max),
        MarkSpace::Circle { .. } => 1.0,
        MarkSpace::Interval { lower, upper, .. } => lower.abs().max(upper.abs()),
    };
    match model.potential.profile() {
        Profile::Zero | Profile::HardCore { .. } => Some(0.0),
        Profile::Constant(c) => Some(*c),
        Profile::ToyRepulsiveSpin {
            amplitude, coupling, ..
        } if *amplitude >= 0.0 => Some((amplitude * (1.0 - coupling.abs() * mark_abs * mark_abs)).min(0.0)),
        Profile::ContinuumPotts { repulsion, .. } => Some(repulsion.min(0.0)),
        _ => None,
    }
}

/// Exact sampler for the specification on `region` given a boundary:
/// propose marked Poisson with activity `z e^{beta B'}`, accept with
/// `e^{-beta (E + W)} e^{-beta B' |omega|}`, where `B' = B + n_near max(0, -phi_min)`
/// bounds both the internal energy and the boundary interaction per point.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    model: ModelSpec,
    region: SubBox,
    boundary: BoundaryCondition,
    near: Vec<MarkedPoint>,
    per_point_bound: f64,
    proposal_activity: f64,
    acceptance_lower_bound: f64,
}

/// Default floor on the acceptance probability.
pub const ACCEPTANCE_FLOOR: f64 = 1e-4;

impl RejectionSampler {
    pub fn new(model: &ModelSpec, region: &SubBox, boundary: &BoundaryCondition) -> Result<Self> {
        Self::with_floor(model, region, boundary, ACCEPTANCE_FLOOR)
    }

    /// The acceptance probability equals `Z(boundary) e^{-z' sigma^tau(region)}`,
    /// which is at least `e^{-z' sigma^tau(region)}`; fails with `AcceptanceTooLow`
    /// when that bound is below `floor`.
    pub fn with_floor(model: &ModelSpec, region: &SubBox, boundary: &BoundaryCondition, floor: f64) -> Result<Self> {
        if !model.space.contains_box(region) {
            return Err(Error::RegionOutOfBounds {
                region: region.to_string(),
            });
        }
        let near = boundary.effective(model, region);
        let boundary_bound = if near.is_empty() {
            0.0
        } else {
            let low = pair_lower_bound(model).ok_or_else(|| {
                Error::InvalidModel("rejection sampling with a boundary needs a lower bound on phi".into())
            })?;
            near.len() as f64 * (-low).max(0.0)
        };
        let per_point_bound = model.potential.stability_b() + boundary_bound;
        let proposal_activity = model.activity * (model.beta * per_point_bound).exp();
        let acceptance_lower_bound = (-proposal_activity * model.sigma_tau(region)).exp();
        if acceptance_lower_bound < floor {
            return Err(Error::AcceptanceTooLow {
                estimated: acceptance_lower_bound,
                floor,
            });
        }
        Ok(Self {
            model: model.clone(),
            region: region.clone(),
            boundary: boundary.clone(),
            near,
            per_point_bound,
            proposal_activity,
            acceptance_lower_bound,
        })
    }

    pub fn proposal_activity(&self) -> f64 {
        self.proposal_activity
    }

    pub fn acceptance_lower_bound(&self) -> f64 {
        self.acceptance_lower_bound
    }

    /// One exact draw and the number of proposals it took.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (FiniteConfiguration, u64) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let c = poisson_sample_with(self.proposal_activity, &self.model.marks, &self.region, rng);
            let e = energy_of(c.points(), &self.model);
            if e == f64::INFINITY {
                continue;
            }
            let w = interaction_of(c.points(), &self.near, &self.model);
            let log_acc = -self.model.beta * (e + w + self.per_point_bound * c.len() as f64);
            if log_acc >= 0.0 || rng.random::<f64>() < log_acc.exp() {
                return (c, attempts);
            }
        }
    }

    pub fn boundary(&self) -> &BoundaryCondition {
        &self.boundary
    }
}

/// One exact draw from the specification on `region`.
pub fn rejection_sample<R: Rng + ?Sized>(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &BoundaryCondition,
    rng: &mut R,
) -> Result<FiniteConfiguration> {
    Ok(RejectionSampler::new(model, region, boundary)?.sample(rng).0)
}
