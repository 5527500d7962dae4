//! Tree-graph majorants `Q` of `|kbar|` and `|k|`.

use std::collections::HashMap;

use crate::combinat::{enumerate_trees, weighted_tree_sum};
use crate::error::{Error, Result};
use crate::model::{FiniteConfiguration, MarkedPoint, ModelSpec};
use crate::scalar::{CompensatedSum, Scalar};
use crate::starcalc::{star_mul, submasks, ConfigFunctional};

/// Cap on `|zeta|` for the single-anchor closed form.
pub const TREE_BOUND_CAP: usize = 8;

/// How the recursion picks the point it removes from the first argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorPolicy {
    /// Lowest canonical index.
    First,
    /// Highest canonical index.
    Last,
    /// The point with the largest interaction with the rest, which always
    /// satisfies `sum phi(x, I) > -2B` under stability.
    StabilityWitness,
}

fn abs_mayer_matrix(points: &[&MarkedPoint], model: &ModelSpec) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = model.mayer(points[i], points[j]).abs();
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    w
}

/// `sum_{T tree on points} prod |f|` by the matrix-tree theorem.
pub fn tree_sum_abs_mayer<T: Scalar>(points: &[MarkedPoint], model: &ModelSpec) -> T {
    let refs: Vec<&MarkedPoint> = points.iter().collect();
    let w = abs_mayer_matrix(&refs, model);
    let n = points.len();
    weighted_tree_sum(n, |i, j| T::of(w[i * n + j]))
}

/// Same sum by explicit Prüfer enumeration.
pub fn tree_sum_enumerated(points: &[MarkedPoint], model: &ModelSpec) -> Result<f64> {
    let refs: Vec<&MarkedPoint> = points.iter().collect();
    let w = abs_mayer_matrix(&refs, model);
    let n = points.len();
    let mut acc = CompensatedSum::new();
    for t in enumerate_trees(n)? {
        acc.add(t.edges().iter().map(|&(i, j)| w[i * n + j]).product());
    }
    Ok(acc.value())
}

/// `e^{2 beta B |omega|} sum_{trees} prod |f|`, the majorant of `|k(omega)|`.
pub fn ursell_tree_bound(points: &[MarkedPoint], model: &ModelSpec) -> f64 {
    let b = 2.0 * model.beta * model.potential.stability_b() * points.len() as f64;
    b.exp() * tree_sum_abs_mayer::<f64>(points, model)
}

/// `Q({x}, zeta) = e^{2 beta B (|zeta| + 1)} sum_{trees on {x} u zeta} prod |f|`.
pub fn tree_bound_q(anchor: &MarkedPoint, zeta: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    if zeta.len() > TREE_BOUND_CAP {
        return Err(Error::SizeLimit {
            what: "tree bound",
            size: zeta.len(),
            cap: TREE_BOUND_CAP,
        });
    }
    Ok(tree_bound_q_points(anchor, zeta.points(), model))
}

/// [`tree_bound_q`] on tuples.
pub fn tree_bound_q_points<T: Scalar>(anchor: &MarkedPoint, zeta: &[MarkedPoint], model: &ModelSpec) -> T {
    let mut refs: Vec<&MarkedPoint> = Vec::with_capacity(zeta.len() + 1);
    refs.push(anchor);
    refs.extend(zeta.iter());
    let w = abs_mayer_matrix(&refs, model);
    let n = refs.len();
    let growth = T::of(model.stability_factor()).powi(n as i32);
    growth * weighted_tree_sum(n, |i, j| T::of(w[i * n + j]))
}

/// `Q(omega, zeta) = sum_{(z_1..z_l) ordered partitions of zeta, empty parts allowed} prod Q({x_i}, z_i)`,
/// a chain of subset convolutions over the subsets of `zeta`.
pub fn tree_bound_q_multi(omega: &FiniteConfiguration, zeta: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    if omega.shares_position_with(zeta) {
        return Err(Error::OverlappingConfigurations);
    }
    let n = zeta.len();
    if n > TREE_BOUND_CAP {
        return Err(Error::SizeLimit {
            what: "tree bound",
            size: n,
            cap: TREE_BOUND_CAP,
        });
    }
    if omega.is_empty() {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let zp = zeta.points();
    let mut acc: Option<ConfigFunctional<f64>> = None;
    for x in omega {
        let table = ConfigFunctional::from_fn(n, |mask| {
            let sub: Vec<MarkedPoint> = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| zp[j].clone()).collect();
            tree_bound_q_points::<f64>(x, &sub, model)
        })?;
        acc = Some(match acc {
            None => table,
            Some(a) => star_mul(&a, &table)?,
        });
    }
    let q = acc.expect("omega is nonempty");
    Ok(q.get(q.full_mask()))
}

/// Solves `Q(w, z) = e^{2 beta B} sum_{w' subset z} |prod_{y in w'} f(I(w), y)| Q(w \ I(w) u w', z \ w')`
/// with `Q(empty, z) = 1*(z)`.
pub fn tree_bound_recursive(
    omega: &FiniteConfiguration,
    zeta: &FiniteConfiguration,
    model: &ModelSpec,
    policy: AnchorPolicy,
) -> Result<f64> {
    if omega.shares_position_with(zeta) {
        return Err(Error::OverlappingConfigurations);
    }
    let (m, n) = (omega.len(), zeta.len());
    if m + n > TREE_BOUND_CAP {
        return Err(Error::SizeLimit {
            what: "recursive tree bound",
            size: m + n,
            cap: TREE_BOUND_CAP,
        });
    }
    let pts: Vec<&MarkedPoint> = omega.iter().chain(zeta.iter()).collect();
    let t = pts.len();
    let absf = abs_mayer_matrix(&pts, model);
    let mut phi = vec![0.0; t * t];
    for i in 0..t {
        for j in 0..t {
            if i != j {
                phi[i * t + j] = model.phi(pts[i], pts[j]);
            }
        }
    }
    let ctx = Ctx {
        t,
        absf,
        phi,
        growth: model.stability_factor(),
        policy,
    };
    let mut memo = HashMap::new();
    Ok(ctx.solve((1u32 << m) - 1, ((1u32 << n) - 1) << m, &mut memo))
}

struct Ctx {
    t: usize,
    absf: Vec<f64>,
    phi: Vec<f64>,
    growth: f64,
    policy: AnchorPolicy,
}

impl Ctx {
    fn anchor(&self, w: u32) -> usize {
        match self.policy {
            AnchorPolicy::First => w.trailing_zeros() as usize,
            AnchorPolicy::Last => 31 - w.leading_zeros() as usize,
            AnchorPolicy::StabilityWitness => {
                let members: Vec<usize> = (0..self.t).filter(|i| w >> i & 1 == 1).collect();
                let mut best = (f64::NEG_INFINITY, members[0]);
                for &i in &members {
                    let s: f64 = members.iter().filter(|&&j| j != i).map(|&j| self.phi[i * self.t + j]).sum();
                    if s > best.0 {
                        best = (s, i);
                    }
                }
                best.1
            }
        }
    }

    fn solve(&self, w: u32, z: u32, memo: &mut HashMap<(u32, u32), f64>) -> f64 {
        if w == 0 {
            return if z == 0 { 1.0 } else { 0.0 };
        }
        if let Some(v) = memo.get(&(w, z)) {
            return *v;
        }
        let x = self.anchor(w);
        let rest = w & !(1 << x);
        let mut acc = CompensatedSum::new();
        for sub in submasks(z) {
            let mut prod = 1.0;
            let mut r = sub;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                r &= r - 1;
                prod *= self.absf[x * self.t + j];
            }
            if prod != 0.0 {
                acc.add(prod * self.solve(rest | sub, z ^ sub, memo));
            }
        }
        let v = self.growth * acc.value();
        memo.insert((w, z), v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonicalize, Mark, MarkSpace, PositionSpace};
    use crate::potential::PairPotential;

    fn toy(b: f64) -> ModelSpec {
        ModelSpec::new(
            PositionSpace::unit_interval(),
            MarkSpace::spins(),
            0.05,
            1.0,
            PairPotential::toy_repulsive_spin().with_stability_b(b).unwrap(),
        )
        .unwrap()
    }

    fn config(xs: &[(f64, i32)]) -> FiniteConfiguration {
        canonicalize(xs.iter().map(|&(x, s)| MarkedPoint::new(vec![x], Mark::Label(s))).collect()).unwrap()
    }

    #[test]
    fn hand_values() {
        let m = toy(0.0);
        let x = MarkedPoint::new(vec![0.2], Mark::Label(1));
        assert_eq!(tree_bound_q(&x, &FiniteConfiguration::empty(), &m).unwrap(), 1.0);
        let y = config(&[(0.3, -1)]);
        let f = m.mayer(&x, &y.points()[0]).abs();
        assert!((tree_bound_q(&x, &y, &m).unwrap() - f).abs() < 1e-15);
        let mb = toy(0.3);
        let e = (2.0f64 * 0.3).exp();
        assert!((tree_bound_q(&x, &FiniteConfiguration::empty(), &mb).unwrap() - e).abs() < 1e-15);
        assert!((tree_bound_q(&x, &y, &mb).unwrap() - e * e * f).abs() < 1e-14);
    }

    #[test]
    fn recursion_matches_closed_form() {
        let m = toy(0.1);
        let w = config(&[(0.1, 1), (0.5, -1)]);
        let z = config(&[(0.2, 1), (0.3, -1), (0.42, 1)]);
        let closed = tree_bound_q_multi(&w, &z, &m).unwrap();
        for p in [AnchorPolicy::First, AnchorPolicy::Last, AnchorPolicy::StabilityWitness] {
            let r = tree_bound_recursive(&w, &z, &m, p).unwrap();
            assert!((r - closed).abs() < 1e-12 * closed, "{p:?}: {r} vs {closed}");
        }
    }

    #[test]
    fn kirchhoff_matches_pruefer() {
        let m = toy(0.0);
        let c = config(&[(0.1, 1), (0.2, -1), (0.25, 1), (0.4, 1), (0.47, -1), (0.6, 1)]);
        let a: f64 = tree_sum_abs_mayer(c.points(), &m);
        let b = tree_sum_enumerated(c.points(), &m).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
    }
}
