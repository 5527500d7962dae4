//! Statistical check of `Pi_outer = Pi_outer Pi_inner` and the exact
//! collar-locality of the specification weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{specification_weight, BoundaryCondition, RejectionSampler};
use crate::error::{Error, Result};
use crate::model::{canonicalize, FiniteConfiguration, MarkedPoint, ModelSpec, Region, SubBox};
use crate::potential::random_configuration;
use crate::scalar::pairwise_sum;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub trials: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlrReport {
    pub samples: usize,
    pub direct_mean: f64,
    pub direct_se: f64,
    pub resampled_mean: f64,
    pub resampled_se: f64,
    /// Mean of the paired differences `F(resampled) - F(direct)`.
    pub difference: f64,
    pub difference_se: f64,
    pub within_three_sigma: bool,
    pub locality: LocalityReport,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if n > 1.0 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Estimates `int F dPi_outer(empty, .)` directly and after resampling the
/// `inner` part of every draw from `Pi_inner` given the rest of the draw.
/// Draws are exact (rejection sampling) and reproducible from `seed`
/// independently of the worker count.
#[allow(clippy::too_many_arguments)]
pub fn dlr_check<F>(
    model: &ModelSpec,
    inner: &SubBox,
    outer: &SubBox,
    functional: F,
    samples: usize,
    seed: u64,
    locality: usize,
) -> Result<DlrReport>
where
    F: Fn(&FiniteConfiguration) -> f64 + Sync,
{
    model.potential.interaction_range().ok_or(Error::RequiresFiniteRange)?;
    if !outer.contains_box(inner) {
        return Err(Error::RegionOutOfBounds {
            region: format!("{inner} not inside {outer}"),
        });
    }
    if samples < 2 {
        return Err(Error::InvalidModel("dlr_check needs at least 2 samples".into()));
    }
    let outer_sampler = RejectionSampler::new(model, outer, &BoundaryCondition::empty())?;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<(f64, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let (omega, _) = outer_sampler.sample(&mut rng);
                let exterior = omega.outside(inner);
                let bc = BoundaryCondition::new(exterior.clone(), inner)?;
                let (interior, _) = RejectionSampler::new(model, inner, &bc)?.sample(&mut rng);
                let resampled = exterior.union(&interior)?;
                out.push((functional(&omega), functional(&resampled)));
            }
            Ok(out)
        })
        .collect();
    let mut pairs = Vec::with_capacity(samples);
    for p in parts {
        pairs.extend(p?);
    }
    let direct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let resampled: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let (dm, dse) = mean_se(&direct);
    let (rm, rse) = mean_se(&resampled);
    let (diff_mean, diff_se) = mean_se(&diff);
    let loc = locality_trials(model, inner, locality, seed ^ 0x5eed)?;
    Ok(DlrReport {
        samples,
        direct_mean: dm,
        direct_se: dse,
        resampled_mean: rm,
        resampled_se: rse,
        difference: diff_mean,
        difference_se: diff_se,
        within_three_sigma: diff_mean.abs() <= 3.0 * diff_se || diff_mean == 0.0,
        locality: loc,
    })
}

fn point_outside<R: Rng>(model: &ModelSpec, region: &SubBox, want_far: Option<bool>, rng: &mut R) -> Option<MarkedPoint> {
    let r = model.potential.interaction_range().unwrap_or(f64::INFINITY);
    let full = model.space.full_box();
    for _ in 0..10_000 {
        let c = random_configuration(model, &full, 1, rng);
        let p = c.points()[0].clone();
        if region.contains(&p.position) {
            continue;
        }
        let far = model.space.distance_to_box(&p.position, region) >= r;
        if want_far.is_none_or(|w| w == far) {
            return Some(p);
        }
    }
    None
}

/// Perturbs boundary points at distance `>= R` from `region` (moves, deletions,
/// insertions) and counts trials where the specification weight of a random
/// candidate changes in any bit.
pub fn locality_trials(model: &ModelSpec, region: &SubBox, trials: usize, seed: u64) -> Result<LocalityReport> {
    model.potential.interaction_range().ok_or(Error::RequiresFiniteRange)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for t in 0..trials {
        let n_candidate = t % 4;
        let candidate = random_configuration(model, region, n_candidate, &mut rng);
        let near: Vec<MarkedPoint> = (0..3).filter_map(|_| point_outside(model, region, Some(false), &mut rng)).collect();
        let far_a: Vec<MarkedPoint> = (0..rng.random_range(0..5))
            .filter_map(|_| point_outside(model, region, Some(true), &mut rng))
            .collect();
        let far_b: Vec<MarkedPoint> = (0..rng.random_range(0..5))
            .filter_map(|_| point_outside(model, region, Some(true), &mut rng))
            .collect();
        let build = |far: &[MarkedPoint]| -> Option<BoundaryCondition> {
            let pts: Vec<MarkedPoint> = near.iter().chain(far).cloned().collect();
            let c = canonicalize(pts).ok()?;
            BoundaryCondition::new(c, region).ok()
        };
        let (Some(a), Some(b)) = (build(&far_a), build(&far_b)) else {
            continue;
        };
        let wa = specification_weight(&candidate, &a, model, region);
        let wb = specification_weight(&candidate, &b, model, region);
        if wa.to_bits() != wb.to_bits() {
            violations += 1;
        }
    }
    Ok(LocalityReport { trials, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkSpace, PositionSpace};
    use crate::potential::PairPotential;

    fn truncated_toy(z: f64) -> ModelSpec {
        ModelSpec::new(
            PositionSpace::unit_interval(),
            MarkSpace::spins(),
            z,
            1.0,
            PairPotential::toy_repulsive_spin().truncated(0.15).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn locality_is_exact() {
        let m = truncated_toy(1.0);
        let r = locality_trials(&m, &SubBox::interval(0.4, 0.6).unwrap(), 300, 7).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn requires_finite_range() {
        let m = truncated_toy(1.0).with_potential(PairPotential::toy_repulsive_spin());
        let inner = SubBox::interval(0.4, 0.6).unwrap();
        let r = dlr_check(&m, &inner, &SubBox::interval(0.0, 1.0).unwrap(), |c| c.len() as f64, 10, 1, 1);
        assert!(matches!(r, Err(Error::RequiresFiniteRange)));
    }

    #[test]
    fn ideal_gas_dlr() {
        let m = truncated_toy(2.0).with_potential(PairPotential::zero());
        let inner = SubBox::interval(0.3, 0.6).unwrap();
        let r = dlr_check(
            &m,
            &inner,
            &SubBox::interval(0.0, 1.0).unwrap(),
            |c| c.within(&inner).len() as f64,
            4000,
            3,
            10,
        )
        .unwrap();
        assert!(r.within_three_sigma, "{r:?}");
        assert_eq!(r.locality.violations, 0);
    }
}
