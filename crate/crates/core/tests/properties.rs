mod common;

use common::*;
use markedgibbs::cluster::*;
use markedgibbs::starcalc::{star_exp, star_log};
use markedgibbs::{ConfigFunctional64, FiniteConfiguration};
use proptest::prelude::*;

/// Relative 1e-10, or 1e-14 absolute: the Boltzmann-weight routes subtract
/// O(1) terms, so coefficients far below 1 carry O(ulp) absolute error.
fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()) || (a - b).abs() <= 1e-14
}

/// `|k| <= bound` up to the same rounding allowance; two-point clusters make
/// the tree bound an equality.
fn dominated(k: f64, bound: f64) -> bool {
    k.abs() <= bound * (1.0 + 1e-12) + 1e-14
}

fn split(c: &FiniteConfiguration, mask: u64) -> (FiniteConfiguration, FiniteConfiguration) {
    let full = (1u64 << c.len()) - 1;
    (c.subset(mask & full), c.subset(!mask & full))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ursell_routes_agree(c in spin_config(1, 5)) {
        let m = toy(0.05);
        let direct = ursell_direct(&c, &m).unwrap();
        let table = ursell_table(&c, &m).unwrap().full();
        let rho: ConfigFunctional64 = boltzmann_functional(c.points(), &m).unwrap();
        let l = star_log(&rho).unwrap();
        prop_assert!(agree(direct, table), "{direct} vs {table}");
        prop_assert!(agree(direct, l.get(l.full_mask())));
    }

    #[test]
    fn cluster_decomposition(c in spin_config(1, 8)) {
        let m = toy(0.05);
        let k = ursell_table(&c, &m).unwrap();
        let back = star_exp(k.functional()).unwrap();
        let rho: ConfigFunctional64 = boltzmann_functional(c.points(), &m).unwrap();
        for s in 0..1u32 << c.len() {
            prop_assert!(agree(back.get(s), rho.get(s)), "{} vs {}", back.get(s), rho.get(s));
        }
    }

    #[test]
    fn tree_graph_bound(c in spin_config(1, 6)) {
        let m = toy(0.05);
        let k = ursell_table(&c, &m).unwrap().full();
        let q = ursell_tree_bound(c.points(), &m);
        prop_assert!(dominated(k, q), "{k} > {q}");
    }

    #[test]
    fn kbar_is_dominated_by_q(c in spin_config(2, 6), mask in 1u64..64) {
        let m = toy(0.05);
        let (w, z) = split(&c, mask);
        prop_assume!(!w.is_empty());
        let kb = kbar(&w, &z, &m).unwrap();
        let q = tree_bound_q_multi(&w, &z, &m).unwrap();
        prop_assert!(dominated(kb, q), "{kb} > {q}");
    }

    #[test]
    fn kbar_recursion_matches_definition(c in spin_config(2, 7), mask in 1u64..128) {
        let m = toy(0.05);
        let (w, z) = split(&c, mask);
        prop_assume!(!w.is_empty());
        let a = kbar(&w, &z, &m).unwrap();
        let b = kbar_recursive(&w, &z, &m).unwrap();
        prop_assert!(agree(a, b), "{a} vs {b}");
    }

    #[test]
    fn anchor_independence(c in spin_config(2, 7), mask in 1u64..128) {
        let m = toy(0.05).with_potential(
            markedgibbs::PairPotential::toy_repulsive_spin().with_stability_b(0.2).unwrap());
        let (w, z) = split(&c, mask);
        prop_assume!(!w.is_empty());
        let closed = tree_bound_q_multi(&w, &z, &m).unwrap();
        for p in [AnchorPolicy::First, AnchorPolicy::Last, AnchorPolicy::StabilityWitness] {
            let r = tree_bound_recursive(&w, &z, &m, p).unwrap();
            prop_assert!(rel(r, closed) < 1e-10, "{p:?}: {r} vs {closed}");
        }
    }

    #[test]
    fn finite_range_vanishing(c in spin_config(2, 6)) {
        let range = 0.15;
        let m = truncated_toy(0.05, range);
        let n = c.len();
        let p = c.points();
        // connectivity of the range graph by repeated relaxation
        let mut reach = 1u64;
        loop {
            let mut next = reach;
            for i in 0..n {
                if reach >> i & 1 == 1 {
                    for j in 0..n {
                        if (p[i].position[0] - p[j].position[0]).abs() < range {
                            next |= 1 << j;
                        }
                    }
                }
            }
            if next == reach { break; }
            reach = next;
        }
        let connected = reach == (1u64 << n) - 1;
        let k = ursell_table(&c, &m).unwrap().full();
        prop_assert_eq!(k == 0.0, !connected, "k = {}", k);
        if n <= 5 {
            prop_assert_eq!(ursell_direct(&c, &m).unwrap() == 0.0, !connected);
        }
    }

    #[test]
    fn singleton_kbar_is_ursell(c in spin_config(1, 7)) {
        let m = toy(0.05);
        let (x, rest) = split(&c, 1);
        let a = kbar(&x, &rest, &m).unwrap();
        let b = ursell_table(&c, &m).unwrap().full();
        prop_assert!(agree(a, b), "{a} vs {b}");
    }

    #[test]
    fn ideal_gas_ursell_vanishes(c in spin_config(2, 8)) {
        let m = toy(0.05).with_potential(markedgibbs::PairPotential::zero());
        let k = ursell_table(&c, &m).unwrap();
        for s in 0..1u32 << c.len() {
            prop_assert_eq!(k.get(s), if s.count_ones() == 1 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn f32_table_tracks_f64() {
    let m = toy(0.05);
    let c = config(&[(0.1, 1), (0.2, -1), (0.28, 1), (0.4, -1)]);
    let a = ursell_table_in::<f64>(&c, &m).unwrap().full();
    let b = ursell_table_in::<f32>(&c, &m).unwrap().full();
    assert!((a - b as f64).abs() < 1e-5 * a.abs().max(1e-3));
}
