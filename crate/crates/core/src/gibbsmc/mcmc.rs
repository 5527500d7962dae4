//! Grand-canonical Metropolis-Hastings with birth, death, move and
//! mark-resample proposals.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream::SampleWriter;
use super::BoundaryCondition;
use crate::error::{Error, Result};
use crate::model::{canonicalize, FiniteConfiguration, MarkedPoint, ModelSpec, Region, SubBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    pub birth: f64,
    pub death: f64,
    #[serde(rename = "move")]
    pub displace: f64,
    pub mark_resample: f64,
}

impl Default for ProposalMix {
    fn default() -> Self {
        Self {
            birth: 0.3,
            death: 0.3,
            displace: 0.3,
            mark_resample: 0.1,
        }
    }
}

impl ProposalMix {
    fn as_array(&self) -> [f64; 4] {
        [self.birth, self.death, self.displace, self.mark_resample]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Recorded sweeps after burn-in, before thinning.
    pub sweeps: u64,
    pub burn_in: u64,
    /// Record every `thinning`-th sweep.
    pub thinning: u64,
    /// Proposals per sweep.
    pub steps_per_sweep: u64,
    pub mix: ProposalMix,
    /// Move step as a fraction of the region side.
    pub step_fraction: f64,
    /// Sub-window whose point count is tracked as a density estimator.
    pub window: Option<SubBox>,
    pub histogram_bins: usize,
    pub histogram_range: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sweeps: 10_000,
            burn_in: 1_000,
            thinning: 1,
            steps_per_sweep: 10,
            mix: ProposalMix::default(),
            step_fraction: 0.1,
            window: None,
            histogram_bins: 20,
            histogram_range: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.mix.as_array();
        if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("proposal mix must be nonnegative and sum to 1: {p:?}")));
        }
        if self.thinning == 0 || self.steps_per_sweep == 0 {
            return Err(Error::InvalidModel("thinning and steps_per_sweep must be positive".into()));
        }
        if !(self.step_fraction > 0.0) || self.histogram_bins == 0 || !(self.histogram_range > 0.0) {
            return Err(Error::InvalidModel("step_fraction, histogram_bins, histogram_range must be positive".into()));
        }
        Ok(())
    }
}

/// Running sums for a scalar observable. Merging adds the sums, so it is
/// associative and exact for integer-valued observables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    /// `sum over chains of tau_int * count`.
    pub tau_weight: f64,
}

impl Moments {
    fn from_series(xs: &[f64]) -> Self {
        Self {
            count: xs.len() as u64,
            sum: xs.iter().sum(),
            sum_sq: xs.iter().map(|x| x * x).sum(),
            tau_weight: integrated_autocorrelation(xs) * xs.len() as f64,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            tau_weight: self.tau_weight + other.tau_weight,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn tau_int(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            self.tau_weight / self.count as f64
        }
    }

    /// Standard error of the mean, inflated by the integrated autocorrelation time.
    pub fn standard_error(&self) -> f64 {
        (self.variance() * self.tau_int() / self.count as f64).sqrt()
    }
}

/// `1 + 2 sum_t rho(t)` with the self-consistent window `M >= 5 tau(M)`.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n / 2 {
        let ct = xs[..n - t].iter().zip(&xs[t..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Acceptance statistics and estimators of one or more chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Proposed and accepted moves: birth, death, move, mark-resample.
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
    /// `|omega|` in the region.
    pub occupation: Moments,
    /// Points in the tracked window.
    pub window_occupation: Moments,
    pub energy: Moments,
    pub region_volume: f64,
    pub window_volume: f64,
    /// Unnormalized pair-distance histogram on `[0, histogram_range)`.
    pub pair_histogram: Vec<u64>,
    pub histogram_range: f64,
    pub chains: u64,
}

impl ChainStats {
    pub fn samples(&self) -> u64 {
        self.occupation.count
    }

    pub fn acceptance_rates(&self) -> [f64; 4] {
        std::array::from_fn(|i| {
            if self.proposed[i] == 0 {
                0.0
            } else {
                self.accepted[i] as f64 / self.proposed[i] as f64
            }
        })
    }

    /// Mark-summed one-point density over the region: `E|omega| / vol`, with its error.
    pub fn density(&self) -> (f64, f64) {
        (
            self.occupation.mean() / self.region_volume,
            self.occupation.standard_error() / self.region_volume,
        )
    }

    /// Same over the tracked window.
    pub fn window_density(&self) -> (f64, f64) {
        (
            self.window_occupation.mean() / self.window_volume,
            self.window_occupation.standard_error() / self.window_volume,
        )
    }

    pub fn tau_int(&self) -> f64 {
        self.occupation.tau_int()
    }

    /// Associative merge; chains are combined in a fixed order by callers.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.pair_histogram.len() != other.pair_histogram.len()
            || self.histogram_range != other.histogram_range
            || self.region_volume != other.region_volume
            || self.window_volume != other.window_volume
        {
            return Err(Error::InvalidModel("chain statistics with different layouts".into()));
        }
        Ok(Self {
            proposed: std::array::from_fn(|i| self.proposed[i] + other.proposed[i]),
            accepted: std::array::from_fn(|i| self.accepted[i] + other.accepted[i]),
            occupation: self.occupation.merge(&other.occupation),
            window_occupation: self.window_occupation.merge(&other.window_occupation),
            energy: self.energy.merge(&other.energy),
            region_volume: self.region_volume,
            window_volume: self.window_volume,
            pair_histogram: self
                .pair_histogram
                .iter()
                .zip(&other.pair_histogram)
                .map(|(a, b)| a + b)
                .collect(),
            histogram_range: self.histogram_range,
            chains: self.chains + other.chains,
        })
    }
}

struct Chain<'a> {
    model: &'a ModelSpec,
    region: &'a SubBox,
    near: Vec<MarkedPoint>,
    points: Vec<MarkedPoint>,
    energy: f64,
    mass: f64,
    cumulative: [f64; 4],
    steps: Vec<f64>,
    proposed: [u64; 4],
    accepted: [u64; 4],
}

impl<'a> Chain<'a> {
    /// `sum_{y in state u boundary, y != skip} phi(x, y)`.
    fn local(&self, x: &MarkedPoint, skip: Option<usize>) -> f64 {
        let mut e = 0.0;
        for (i, y) in self.points.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            e += self.model.phi(x, y);
        }
        for y in &self.near {
            e += self.model.phi(x, y);
        }
        e
    }

    fn fresh_point<R: Rng>(&self, rng: &mut R) -> MarkedPoint {
        let pos = self
            .region
            .lower()
            .iter()
            .zip(self.region.upper())
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        MarkedPoint::new(pos, self.model.marks.sample(rng))
    }

    fn step<R: Rng>(&mut self, rng: &mut R) {
        let u = rng.random::<f64>();
        let kind = self.cumulative.iter().position(|c| u < *c).unwrap_or(3);
        self.proposed[kind] += 1;
        let beta = self.model.beta;
        let z = self.model.activity;
        let pb = self.cumulative[0];
        let pd = self.cumulative[1] - self.cumulative[0];
        match kind {
            0 => {
                let x = self.fresh_point(rng);
                if self.points.iter().any(|p| p.position == x.position) {
                    return;
                }
                let de = self.local(&x, None);
                if de == f64::INFINITY {
                    return;
                }
                let n = self.points.len() as f64;
                let ratio = z * self.mass / (n + 1.0) * (-beta * de).exp() * pd / pb;
                if rng.random::<f64>() < ratio {
                    self.points.push(x);
                    self.energy += de;
                    self.accepted[0] += 1;
                }
            }
            1 => {
                let n = self.points.len();
                if n == 0 {
                    return;
                }
                let i = rng.random_range(0..n);
                let de = self.local(&self.points[i], Some(i));
                let ratio = n as f64 / (z * self.mass) * (beta * de).exp() * pb / pd;
                if rng.random::<f64>() < ratio {
                    self.points.swap_remove(i);
                    self.energy -= de;
                    self.accepted[1] += 1;
                }
            }
            2 => {
                let n = self.points.len();
                if n == 0 {
                    return;
                }
                let i = rng.random_range(0..n);
                let old = self.points[i].clone();
                let pos: Vec<f64> = old
                    .position
                    .iter()
                    .zip(&self.steps)
                    .map(|(x, h)| x + h * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if !self.region.contains(&pos) || self.points.iter().any(|p| p.position == pos) {
                    return;
                }
                let new = MarkedPoint::new(pos, old.mark);
                self.try_replace(i, old, new, rng, 2);
            }
            _ => {
                let n = self.points.len();
                if n == 0 {
                    return;
                }
                let i = rng.random_range(0..n);
                let old = self.points[i].clone();
                let new = MarkedPoint::new(old.position.clone(), self.model.marks.sample(rng));
                self.try_replace(i, old, new, rng, 3);
            }
        }
    }

    fn try_replace<R: Rng>(&mut self, i: usize, old: MarkedPoint, new: MarkedPoint, rng: &mut R, kind: usize) {
        let e_new = self.local(&new, Some(i));
        if e_new == f64::INFINITY {
            return;
        }
        let e_old = self.local(&old, Some(i));
        let de = e_new - e_old;
        if de <= 0.0 || rng.random::<f64>() < (-self.model.beta * de).exp() {
            self.points[i] = new;
            self.energy += de;
            self.accepted[kind] += 1;
        }
    }

    fn config(&self) -> FiniteConfiguration {
        canonicalize(self.points.clone()).expect("moves never create coincident positions")
    }
}

/// One chain started from the empty configuration; reproducible from `config.seed`.
pub fn mcmc_run(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &BoundaryCondition,
    config: &SamplerConfig,
) -> Result<ChainStats> {
    run_chain::<std::io::Sink>(model, region, boundary, config, 0, None)
}

/// Same as [`mcmc_run`], writing each recorded configuration to `out`.
pub fn mcmc_run_with_stream<W: Write>(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &BoundaryCondition,
    config: &SamplerConfig,
    out: &mut SampleWriter<W>,
) -> Result<ChainStats> {
    run_chain(model, region, boundary, config, 0, Some(out))
}

/// `chains` independent chains on streams `0..chains` of the seed, run in
/// parallel and merged in stream order.
pub fn mcmc_run_chains(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &BoundaryCondition,
    config: &SamplerConfig,
    chains: u64,
) -> Result<ChainStats> {
    if chains == 0 {
        return Err(Error::InvalidModel("need at least one chain".into()));
    }
    let runs: Vec<Result<ChainStats>> = (0..chains)
        .into_par_iter()
        .map(|c| run_chain::<std::io::Sink>(model, region, boundary, config, c, None))
        .collect();
    let mut it = runs.into_iter();
    let mut acc = it.next().expect("at least one chain")?;
    for r in it {
        acc = acc.merge(&r?)?;
    }
    Ok(acc)
}

fn run_chain<W: Write>(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &BoundaryCondition,
    config: &SamplerConfig,
    stream: u64,
    mut out: Option<&mut SampleWriter<W>>,
) -> Result<ChainStats> {
    config.validate()?;
    if !model.space.contains_box(region) {
        return Err(Error::RegionOutOfBounds {
            region: region.to_string(),
        });
    }
    let window = config.window.clone().unwrap_or_else(|| region.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let p = config.mix.as_array();
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for i in 0..4 {
        acc += p[i];
        cumulative[i] = acc;
    }
    let mut chain = Chain {
        model,
        region,
        near: boundary.effective(model, region),
        points: Vec::new(),
        energy: 0.0,
        mass: model.sigma_tau(region),
        cumulative,
        steps: (0..region.dimension()).map(|k| config.step_fraction * region.side(k)).collect(),
        proposed: [0; 4],
        accepted: [0; 4],
    };
    for _ in 0..config.burn_in * config.steps_per_sweep {
        chain.step(&mut rng);
    }
    let bins = config.histogram_bins;
    let mut hist = vec![0u64; bins];
    let (mut occ, mut win, mut en) = (Vec::new(), Vec::new(), Vec::new());
    for sweep in 0..config.sweeps {
        for _ in 0..config.steps_per_sweep {
            chain.step(&mut rng);
        }
        if sweep % config.thinning != 0 {
            continue;
        }
        occ.push(chain.points.len() as f64);
        win.push(chain.points.iter().filter(|p| window.contains(&p.position)).count() as f64);
        en.push(chain.energy);
        for (i, a) in chain.points.iter().enumerate() {
            for b in &chain.points[i + 1..] {
                let r = model.space.distance(&a.position, &b.position);
                if r < config.histogram_range {
                    hist[((r / config.histogram_range) * bins as f64) as usize % bins] += 1;
                }
            }
        }
        if let Some(w) = out.as_deref_mut() {
            w.write(&chain.config()).map_err(|e| Error::InvalidModel(format!("sample stream: {e}")))?;
        }
    }
    Ok(ChainStats {
        proposed: chain.proposed,
        accepted: chain.accepted,
        occupation: Moments::from_series(&occ),
        window_occupation: Moments::from_series(&win),
        energy: Moments::from_series(&en),
        region_volume: region.volume(),
        window_volume: window.volume(),
        pair_histogram: hist,
        histogram_range: config.histogram_range,
        chains: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkSpace, PositionSpace};
    use crate::potential::PairPotential;

    fn ideal(z: f64) -> ModelSpec {
        ModelSpec::new(PositionSpace::unit_interval(), MarkSpace::spins(), z, 1.0, PairPotential::zero()).unwrap()
    }

    fn unit() -> SubBox {
        SubBox::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = ideal(2.0).with_potential(PairPotential::toy_repulsive_spin());
        let cfg = SamplerConfig {
            sweeps: 2000,
            seed: 9,
            ..Default::default()
        };
        let a = mcmc_run(&m, &unit(), &BoundaryCondition::empty(), &cfg).unwrap();
        let b = mcmc_run(&m, &unit(), &BoundaryCondition::empty(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.acceptance_rates().iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn ideal_gas_occupation_is_poisson() {
        let m = ideal(3.0);
        let cfg = SamplerConfig {
            sweeps: 40_000,
            seed: 4,
            ..Default::default()
        };
        let s = mcmc_run(&m, &unit(), &BoundaryCondition::empty(), &cfg).unwrap();
        let mean = s.occupation.mean();
        let se = s.occupation.standard_error();
        assert!((mean - 3.0).abs() < 3.0 * se, "{mean} +- {se}");
        assert!((s.occupation.variance() - 3.0).abs() < 0.3);
    }

    #[test]
    fn merge_is_associative() {
        let m = ideal(1.0);
        let run = |seed| {
            let cfg = SamplerConfig {
                sweeps: 300,
                seed,
                ..Default::default()
            };
            mcmc_run(&m, &unit(), &BoundaryCondition::empty(), &cfg).unwrap()
        };
        let (a, b, c) = (run(1), run(2), run(3));
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        assert_eq!(left.proposed, right.proposed);
        assert_eq!(left.occupation.count, right.occupation.count);
        assert_eq!(left.occupation.sum, right.occupation.sum);
        assert_eq!(left.pair_histogram, right.pair_histogram);
    }

    #[test]
    fn autocorrelation_of_iid_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let t = integrated_autocorrelation(&xs);
        assert!((t - 1.0).abs() < 0.2, "{t}");
    }

    #[test]
    fn bad_mix_is_rejected() {
        let cfg = SamplerConfig {
            mix: ProposalMix {
                birth: 0.5,
                death: 0.5,
                displace: 0.5,
                mark_resample: 0.0,
            },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
