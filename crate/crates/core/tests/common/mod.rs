#![allow(dead_code)]

use markedgibbs::lpintegrate::{MarkRule, PositionRule, QuadratureScheme, SchemeKind};
use markedgibbs::{canonicalize, FiniteConfiguration, Mark, MarkSpace, MarkedPoint, ModelSpec, PairPotential, PositionSpace, SubBox};
use proptest::prelude::*;

pub fn toy(z: f64) -> ModelSpec {
    ModelSpec::new(PositionSpace::unit_interval(), MarkSpace::spins(), z, 1.0, PairPotential::toy_repulsive_spin()).unwrap()
}

pub fn truncated_toy(z: f64, range: f64) -> ModelSpec {
    toy(z).with_potential(PairPotential::toy_repulsive_spin().truncated(range).unwrap())
}

pub fn unit() -> SubBox {
    SubBox::interval(0.0, 1.0).unwrap()
}

pub fn gl(points_per_axis: usize) -> QuadratureScheme {
    QuadratureScheme::grid(points_per_axis, PositionRule::GaussLegendre, MarkRule::ExactDiscreteSum)
}

pub fn hybrid(points_per_axis: usize, max_nodes: usize, samples: usize, seed: u64) -> QuadratureScheme {
    QuadratureScheme {
        kind: SchemeKind::Hybrid {
            points_per_axis,
            rule: PositionRule::GaussLegendre,
            max_nodes,
            samples,
            seed,
        },
        mark_rule: MarkRule::ExactDiscreteSum,
    }
}

pub fn config(xs: &[(f64, i32)]) -> FiniteConfiguration {
    canonicalize(xs.iter().map(|&(x, s)| MarkedPoint::new(vec![x], Mark::Label(s))).collect()).unwrap()
}

/// Spin configurations on [0, 1) with `lo..=hi` points and distinct positions.
pub fn spin_config(lo: usize, hi: usize) -> impl Strategy<Value = FiniteConfiguration> {
    prop::collection::vec((0.0f64..1.0, prop::bool::ANY), lo..=hi).prop_filter_map("distinct positions", |v| {
        canonicalize(
            v.into_iter()
                .map(|(x, up)| MarkedPoint::new(vec![x], Mark::Label(if up { 1 } else { -1 })))
                .collect(),
        )
        .ok()
    })
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
