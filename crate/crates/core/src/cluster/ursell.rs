//! Ursell coefficients `k = ln*(e^{-beta E})`.

use crate::combinat::enumerate_connected_graphs;
use crate::error::{Error, Result};
use crate::model::{FiniteConfiguration, MarkedPoint, ModelSpec};
use crate::scalar::{CompensatedSum, Scalar};
use crate::starcalc::{submasks, ConfigFunctional, GROUND_CAP};

/// Graph-sum evaluation is an oracle only.
pub const DIRECT_CAP: usize = 5;

/// `E(S)` for every subset `S` of `points`; `+inf` propagates.
pub fn energy_table(points: &[MarkedPoint], model: &ModelSpec) -> Vec<f64> {
    let n = points.len();
    let mut e = vec![0.0; 1 << n];
    for s in 1..1usize << n {
        let top = usize::BITS - 1 - s.leading_zeros();
        let rest = s ^ (1 << top);
        let base = e[rest];
        if base == f64::INFINITY {
            e[s] = base;
            continue;
        }
        let mut acc = CompensatedSum::new();
        acc.add(base);
        let mut inf = false;
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let v = model.phi(&points[top as usize], &points[j]);
            if v == f64::INFINITY {
                inf = true;
                break;
            }
            acc.add(v);
        }
        e[s] = if inf { f64::INFINITY } else { acc.value() };
    }
    e
}

/// The Boltzmann functional `S -> e^{-beta E(S)}` on the subsets of `points`.
pub fn boltzmann_functional<T: Scalar>(points: &[MarkedPoint], model: &ModelSpec) -> Result<ConfigFunctional<T>> {
    let e = energy_table(points, model);
    ConfigFunctional::new(points.len(), e.iter().map(|&v| T::of(model.boltzmann(v))).collect())
}

/// `k(omega)` as the sum over connected graphs of products of Mayer factors.
pub fn ursell_direct(omega: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    let n = omega.len();
    if n > DIRECT_CAP {
        return Err(Error::SizeLimit {
            what: "connected-graph Ursell sum",
            size: n,
            cap: DIRECT_CAP,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let p = omega.points();
    let mut f = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            f[i * n + j] = model.mayer(&p[i], &p[j]);
        }
    }
    let mut acc = CompensatedSum::new();
    for g in enumerate_connected_graphs(n)? {
        acc.add(g.edges().iter().map(|&(i, j)| f[i * n + j]).product());
    }
    Ok(acc.value())
}

/// `k` on every subset of a ground configuration.
#[derive(Debug, Clone)]
pub struct UrsellTable<T> {
    ground: FiniteConfiguration,
    values: ConfigFunctional<T>,
}

impl<T: Scalar> UrsellTable<T> {
    pub fn ground(&self) -> &FiniteConfiguration {
        &self.ground
    }

    pub fn functional(&self) -> &ConfigFunctional<T> {
        &self.values
    }

    pub fn get(&self, mask: u32) -> T {
        self.values.get(mask)
    }

    /// `k(ground)`.
    pub fn full(&self) -> T {
        self.values.get(self.values.full_mask())
    }
}

/// Inversion of the cluster decomposition anchored at the highest index of each subset:
/// `k(V) = rho(V) - sum_{a in S strictly inside V} k(S) rho(V \ S)`.
pub fn ursell_functional<T: Scalar>(points: &[MarkedPoint], model: &ModelSpec) -> Result<ConfigFunctional<T>> {
    if points.len() > GROUND_CAP {
        return Err(Error::SizeLimit {
            what: "Ursell table",
            size: points.len(),
            cap: GROUND_CAP,
        });
    }
    let rho: ConfigFunctional<T> = boltzmann_functional(points, model)?;
    let n = points.len();
    let adjacency = mayer_adjacency(points, model);
    let mut k = vec![T::zero(); 1 << n];
    for v in 1u32..1 << n {
        // every connected graph on v carries a vanishing Mayer factor
        if !connected_within(v, &adjacency) {
            continue;
        }
        let top = 1u32 << (31 - v.leading_zeros());
        let rest = v ^ top;
        let mut acc = CompensatedSum::new();
        acc.add(rho.get(v));
        for u in submasks(rest) {
            if u == rest {
                continue;
            }
            let s = u | top;
            let ks = k[s as usize];
            if ks != T::zero() {
                acc.add(-ks * rho.get(v ^ s));
            }
        }
        k[v as usize] = acc.value();
    }
    ConfigFunctional::new(n, k)
}

/// `adjacency[i]` has bit `j` set when `f(x_i, x_j) != 0`.
fn mayer_adjacency(points: &[MarkedPoint], model: &ModelSpec) -> Vec<u32> {
    let n = points.len();
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in i + 1..n {
            if model.mayer(&points[i], &points[j]) != 0.0 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

fn connected_within(set: u32, adjacency: &[u32]) -> bool {
    let start = set & set.wrapping_neg();
    let mut seen = start;
    let mut frontier = start;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adjacency[v] & set & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == set
}

pub fn ursell_table_in<T: Scalar>(omega: &FiniteConfiguration, model: &ModelSpec) -> Result<UrsellTable<T>> {
    Ok(UrsellTable {
        ground: omega.clone(),
        values: ursell_functional(omega.points(), model)?,
    })
}

pub fn ursell_table(omega: &FiniteConfiguration, model: &ModelSpec) -> Result<UrsellTable<f64>> {
    ursell_table_in(omega, model)
}

/// `k` of an ordered tuple, as used inside integrands.
pub fn ursell_value(points: &[MarkedPoint], model: &ModelSpec) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => 1.0,
        2 => model.mayer(&points[0], &points[1]),
        n => {
            if !connected_within((1u32 << n) - 1, &mayer_adjacency(points, model)) {
                return 0.0;
            }
            let k: ConfigFunctional<f64> =
                ursell_functional(points, model).expect("integrand orders stay below the ground cap");
            k.get(k.full_mask())
        }
    }
}
