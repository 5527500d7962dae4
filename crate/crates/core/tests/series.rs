mod common;

use common::{config, gl, hybrid, rel, toy, truncated_toy, unit};
use markedgibbs::cluster::{
    collar, convergence_radius, correlation_truncated, limit_local_density, log_partition_truncated,
    partition_direct_truncated,
};
use markedgibbs::gibbsmc::{BoundaryCondition, RejectionSampler};
use markedgibbs::lpintegrate::{gauss_legendre, MarkRule, PositionRule, QuadratureScheme};
use markedgibbs::potential::energy;
use markedgibbs::scalar::factorial;
use markedgibbs::{FiniteConfiguration, PairPotential, Region, SubBox};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hard_core(z: f64, diameter: f64) -> markedgibbs::ModelSpec {
    toy(z).with_potential(PairPotential::hard_core(diameter).unwrap())
}

#[test]
fn hard_core_second_coefficient() {
    let d = 0.05;
    let m = hard_core(1.0, d);
    let cert = convergence_radius(&m, 64).unwrap();
    let scheme = QuadratureScheme::grid(1000, PositionRule::Midpoint, MarkRule::ExactDiscreteSum);
    let r = log_partition_truncated(&m, &unit(), 2, &scheme, &cert).unwrap();
    // Overlap area of the strip |x - y| < d inside the unit square.
    let exact = -(2.0 * d - d * d) / 2.0;
    assert_eq!(r.coefficients[0], 1.0);
    assert!(rel(r.coefficients[1], exact) < 2e-3, "{} vs {exact}", r.coefficients[1]);
}

#[test]
fn tonks_partition_function() {
    let (z, d) = (2.0, 0.1);
    let m = hard_core(z, d);
    let scheme = QuadratureScheme::monte_carlo(200_000, 5, MarkRule::ExactDiscreteSum);
    let got = partition_direct_truncated(&m, &unit(), &FiniteConfiguration::empty(), 4, &scheme).unwrap();
    let exact: f64 = (0..=4)
        .map(|n| {
            let free = (1.0 - (n as f64 - 1.0).max(0.0) * d).max(0.0);
            z.powi(n) * free.powi(n) / factorial(n as usize)
        })
        .sum();
    assert!((got.value - exact).abs() <= 3.0 * got.error, "{} +- {} vs {exact}", got.value, got.error);
}

#[test]
fn far_pairs_factorize_order_by_order() {
    let m = truncated_toy(0.4, 0.15);
    let scheme = gl(6);
    let (a, b) = ((0.15, 1), (0.85, -1));
    let n = 3;
    let increments = |p: (f64, i32)| -> Vec<f64> {
        let mut prev = 0.0;
        (0..=n)
            .map(|k| {
                let v = correlation_truncated(&config(&[p]), &m, &unit(), k, &scheme).unwrap().value;
                let inc = v - prev;
                prev = v;
                inc
            })
            .collect()
    };
    let (ca, cb) = (increments(a), increments(b));
    let pair = correlation_truncated(&config(&[a, b]), &m, &unit(), n, &scheme).unwrap().value;
    let product: f64 = (0..=n).flat_map(|i| (0..=n - i).map(move |j| (i, j))).map(|(i, j)| ca[i] * cb[j]).sum();
    assert!(rel(pair, product) < 1e-10, "{pair} vs {product}");

    let full_a: f64 = ca.iter().sum();
    let full_b: f64 = cb.iter().sum();
    let cert = convergence_radius(&m, 64).unwrap();
    let budget = cert.correlation_tail_bound(2, n)
        + cert.correlation_tail_bound(1, n) * (full_a + full_b)
        + cert.correlation_tail_bound(1, n).powi(2);
    assert!((pair - full_a * full_b).abs() <= budget);
}

#[test]
fn boundary_beyond_range_is_invisible() {
    let m = truncated_toy(0.8, 0.15);
    let region = SubBox::interval(0.3, 0.6).unwrap();
    let far = config(&[(0.1, 1), (0.14, -1), (0.8, 1)]);
    let near = config(&[(0.2, 1)]);
    let scheme = gl(5);
    let empty = partition_direct_truncated(&m, &region, &FiniteConfiguration::empty(), 3, &scheme).unwrap();
    let with_far = partition_direct_truncated(&m, &region, &far, 3, &scheme).unwrap();
    let with_near = partition_direct_truncated(&m, &region, &near, 3, &scheme).unwrap();
    assert_eq!(empty.value.to_bits(), with_far.value.to_bits());
    assert!(with_near.value < empty.value);
}

#[test]
fn collar_shapes() {
    let m = truncated_toy(0.1, 0.1);
    let inner = SubBox::interval(0.3, 0.5).unwrap();
    assert!(collar(&m, &inner, 0.0).is_empty());
    assert!((collar(&m, &inner, 0.1).volume() - 0.2).abs() < 1e-15);
    assert!((collar(&m, &inner, 0.4).volume() - 0.7).abs() < 1e-15);
    assert!((collar(&m, &inner, 2.0).volume() - 0.8).abs() < 1e-15);
    let edge = SubBox::interval(0.9, 1.0).unwrap();
    assert!((collar(&m, &edge, 0.3).volume() - 0.3).abs() < 1e-15);
}

#[test]
fn whole_box_density_is_boltzmann_over_partition() {
    let m = truncated_toy(0.3, 0.15);
    let scheme = gl(6);
    let cert = convergence_radius(&m, 64).unwrap();
    let log_z = log_partition_truncated(&m, &unit(), 3, &scheme, &cert).unwrap().log_z;
    for pts in [vec![], vec![(0.5, 1)], vec![(0.2, 1), (0.3, -1)], vec![(0.1, 1), (0.15, 1), (0.6, -1)]] {
        let c = config(&pts);
        let d = limit_local_density(&c, &m, &unit(), 3, &scheme).unwrap();
        let want = m.boltzmann(energy(&c, &m)) * (-log_z).exp();
        assert!(rel(d.density, want) < 1e-10, "{pts:?}: {} vs {want}", d.density);
        assert!((d.log_partition - log_z).abs() < 1e-14);
    }
}

/// The projected density predicts how often the inner box is empty or holds
/// one point under exact draws on the whole box.
#[test]
fn local_density_matches_rejection_draws() {
    let m = truncated_toy(1.0, 0.15);
    let inner = SubBox::interval(0.4, 0.6).unwrap();
    let scheme = hybrid(6, 50_000, 20_000, 9);
    let order = 4;
    let empty = limit_local_density(&FiniteConfiguration::empty(), &m, &inner, order, &scheme).unwrap();
    let p_empty = empty.density;

    let (xs, ws) = gauss_legendre(8);
    let mut p_one = 0.0;
    for (t, w) in xs.iter().zip(&ws) {
        for s in [1, -1] {
            let c = config(&[(0.5 + 0.1 * t, s)]);
            let d = limit_local_density(&c, &m, &inner, order, &scheme).unwrap();
            p_one += m.activity * 0.5 * 0.1 * w * d.density;
        }
    }

    let sampler = RejectionSampler::new(&m, &unit(), &BoundaryCondition::empty()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let draws = 40_000;
    let (mut zero, mut one) = (0usize, 0usize);
    for _ in 0..draws {
        match sampler.sample(&mut rng).0.within(&inner).len() {
            0 => zero += 1,
            1 => one += 1,
            _ => {}
        }
    }
    for (p, hits) in [(p_empty, zero), (p_one, one)] {
        let f = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((f - p).abs() <= 3.0 * se + empty.log_partition_error, "{f} vs {p} +- {se}");
    }
}

#[test]
fn hard_core_overlap_has_zero_density() {
    let m = hard_core(0.5, 0.05);
    let c = config(&[(0.5, 1), (0.52, -1)]);
    let d = limit_local_density(&c, &m, &SubBox::interval(0.4, 0.6).unwrap(), 3, &gl(4)).unwrap();
    assert_eq!(d.density, 0.0);
}
