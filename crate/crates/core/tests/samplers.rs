mod common;

use common::{config, truncated_toy, unit};
use markedgibbs::gibbsmc::{
    mcmc_run, mcmc_run_chains, mcmc_run_with_stream, read_sample_stream, specification_weight, BoundaryCondition,
    RejectionSampler, SampleWriter, SamplerConfig,
};
use markedgibbs::lpintegrate::gauss_legendre;
use markedgibbs::potential::{energy, interaction_of};
use markedgibbs::{FiniteConfiguration, Mark, MarkSpace, ModelSpec, PairPotential, PositionSpace, SubBox};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn within_sigmas(observed: f64, expected: f64, se: f64, k: f64) -> bool {
    (observed - expected).abs() <= k * se
}

fn distinct_positions(c: &FiniteConfiguration) -> bool {
    c.points().windows(2).all(|w| w[0].position != w[1].position)
}

/// At an activity where two points in the region have probability below 1e-6,
/// the single point's law given the boundary is `e^{-beta W}` normalized.
#[test]
fn single_point_law_given_boundary() {
    let m = truncated_toy(0.003, 0.15);
    let region = SubBox::interval(0.4, 0.6).unwrap();
    let bc = BoundaryCondition::new(config(&[(0.33, 1), (0.66, -1)]), &region).unwrap();
    let sampler = RejectionSampler::new(&m, &region, &bc).unwrap();
    // Two accepted points need two proposed ones: P(n >= 2) <= lambda^2 / 2.
    let lambda = sampler.proposal_activity() * m.sigma_tau(&region);
    assert!(lambda * lambda / 2.0 < 1e-6, "{lambda}");

    let bins = 10;
    let width = 0.2 / bins as f64;
    let (xs, ws) = gauss_legendre(12);
    let mut cell = vec![[0.0f64; 2]; bins];
    for (b, c) in cell.iter_mut().enumerate() {
        for (t, w) in xs.iter().zip(&ws) {
            let x = 0.4 + width * (b as f64 + 0.5 + 0.5 * t);
            for (k, s) in [1, -1].into_iter().enumerate() {
                c[k] += 0.5 * w * 0.5 * width * specification_weight(&config(&[(x, s)]), &bc, &m, &region);
            }
        }
    }
    let total: f64 = cell.iter().flatten().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts = vec![[0u64; 2]; bins];
    let mut singles = 0u64;
    while singles < 3000 {
        let (c, _) = sampler.sample(&mut rng);
        match c.len() {
            1 => {
                let p = &c.points()[0];
                let b = (((p.position[0] - 0.4) / width) as usize).min(bins - 1);
                counts[b][usize::from(p.mark == Mark::Label(-1))] += 1;
                singles += 1;
            }
            _ => {}
        }
    }
    let n = singles as f64;
    for b in 0..bins {
        for k in 0..2 {
            let p = cell[b][k] / total;
            let se = (n * p * (1.0 - p)).sqrt();
            assert!(
                within_sigmas(counts[b][k] as f64, n * p, se, 3.0),
                "bin {b} mark {k}: {} vs {}",
                counts[b][k],
                n * p
            );
        }
    }
}

#[test]
fn draws_never_repeat_a_position() {
    let m = truncated_toy(20.0, 0.15);
    let sampler = RejectionSampler::new(&m, &SubBox::interval(0.0, 0.3).unwrap(), &BoundaryCondition::empty()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        assert!(distinct_positions(&sampler.sample(&mut rng).0));
    }
    let cfg = SamplerConfig {
        seed: 4,
        sweeps: 500,
        burn_in: 50,
        ..SamplerConfig::default()
    };
    let mut w = SampleWriter::new(Vec::new(), 1, &m.marks).unwrap();
    mcmc_run_with_stream(&m, &unit(), &BoundaryCondition::empty(), &cfg, &mut w).unwrap();
    let draws = read_sample_stream(w.into_inner().as_slice()).unwrap();
    assert_eq!(draws.len(), 500);
    assert!(draws.iter().all(distinct_positions));
}

#[test]
fn mark_frequencies_follow_the_mark_weights() {
    let weights = [0.2, 0.3, 0.5];
    let marks = MarkSpace::Discrete {
        labels: vec![0, 1, 2],
        weights: weights.to_vec(),
    };
    let m = ModelSpec::new(PositionSpace::unit_interval(), marks, 3.0, 1.0, PairPotential::zero()).unwrap();
    let sampler = RejectionSampler::new(&m, &unit(), &BoundaryCondition::empty()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut counts = [0u64; 3];
    for _ in 0..5000 {
        for p in sampler.sample(&mut rng).0.iter() {
            let Mark::Label(l) = p.mark else { panic!() };
            counts[l as usize] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    for (c, w) in counts.iter().zip(weights) {
        let se = (n as f64 * w * (1.0 - w)).sqrt();
        assert!(within_sigmas(*c as f64, n as f64 * w, se, 3.0), "{counts:?}");
    }
}

/// Net accepted births minus deaths is the final occupation, which must look
/// like a draw from the stationary occupation law.
#[test]
fn birth_and_death_fluxes_balance() {
    let m = truncated_toy(10.0, 0.15);
    let cfg = SamplerConfig {
        seed: 8,
        sweeps: 20_000,
        burn_in: 500,
        ..SamplerConfig::default()
    };
    let s = mcmc_run(&m, &unit(), &BoundaryCondition::empty(), &cfg).unwrap();
    let net = s.accepted[0] as f64 - s.accepted[1] as f64;
    let sd = s.occupation.variance().sqrt();
    assert!(within_sigmas(net, s.occupation.mean(), sd, 3.0), "net {net}, occupation {}", s.occupation.mean());
    let flux = s.accepted[0].min(s.accepted[1]) as f64;
    assert!(net.abs() / flux < 1e-2, "{:?}", s.accepted);
}

#[test]
fn rejection_and_mcmc_agree_on_mean_energy() {
    let m = truncated_toy(6.0, 0.2);
    let region = SubBox::interval(0.0, 0.6).unwrap();
    let bc = BoundaryCondition::new(config(&[(0.65, 1), (0.8, -1)]), &region).unwrap();
    let sampler = RejectionSampler::new(&m, &region, &bc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let near = bc.effective(&m, &region);
    let energies: Vec<f64> = (0..20_000)
        .map(|_| {
            let (c, _) = sampler.sample(&mut rng);
            energy(&c, &m) + interaction_of(c.points(), &near, &m)
        })
        .collect();
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let rej_se = (var / n).sqrt();

    let cfg = SamplerConfig {
        seed: 21,
        sweeps: 5_000,
        burn_in: 500,
        ..SamplerConfig::default()
    };
    let s = mcmc_run_chains(&m, &region, &bc, &cfg, 4).unwrap();
    let se = (rej_se.powi(2) + s.energy.standard_error().powi(2)).sqrt();
    assert!(
        within_sigmas(s.energy.mean(), mean, se, 3.0),
        "mcmc {} vs rejection {mean} +- {se}",
        s.energy.mean()
    );
}

#[test]
fn seeded_runs_are_reproducible() {
    let m = truncated_toy(5.0, 0.15);
    let cfg = SamplerConfig {
        seed: 99,
        sweeps: 2_000,
        burn_in: 100,
        ..SamplerConfig::default()
    };
    let bc = BoundaryCondition::empty();
    assert_eq!(mcmc_run(&m, &unit(), &bc, &cfg).unwrap(), mcmc_run(&m, &unit(), &bc, &cfg).unwrap());
    let pooled = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mcmc_run_chains(&m, &unit(), &bc, &cfg, 3).unwrap())
    };
    assert_eq!(pooled(1), pooled(4));

    let sampler = RejectionSampler::new(&m, &unit(), &bc).unwrap();
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| sampler.sample(&mut rng).0).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}

#[test]
fn sample_stream_round_trips() {
    let m = truncated_toy(8.0, 0.15);
    let sampler = RejectionSampler::new(&m, &unit(), &BoundaryCondition::empty()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws: Vec<FiniteConfiguration> = (0..200).map(|_| sampler.sample(&mut rng).0).collect();
    let mut w = SampleWriter::new(Vec::new(), 1, &m.marks).unwrap();
    for d in &draws {
        w.write(d).unwrap();
    }
    let bytes = w.into_inner();
    assert_eq!(read_sample_stream(bytes.as_slice()).unwrap(), draws);
}
