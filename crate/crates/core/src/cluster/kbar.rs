//! The two-argument coefficient `kbar(omega, zeta) = (exp*(-k) * D_omega e^{-beta E})(zeta)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{FiniteConfiguration, MarkedPoint, ModelSpec};
use crate::scalar::{CompensatedSum, Scalar};
use crate::starcalc::{star_exp, submasks, ConfigFunctional};

use super::ursell::{energy_table, ursell_functional};
use crate::potential::{energy_of, interaction_of};

/// `|omega| + |zeta|` cap for kbar.
pub const KBAR_CAP: usize = 12;

fn check(m: usize, n: usize) -> Result<()> {
    if m + n > KBAR_CAP {
        return Err(Error::SizeLimit {
            what: "kbar ground",
            size: m + n,
            cap: KBAR_CAP,
        });
    }
    Ok(())
}

pub fn kbar(omega: &FiniteConfiguration, zeta: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    if omega.shares_position_with(zeta) {
        return Err(Error::OverlappingConfigurations);
    }
    kbar_points(omega.points(), zeta.points(), model)
}

/// `kbar` on tuples, without the overlap check (quadrature nodes may coincide).
pub fn kbar_points<T: Scalar>(omega: &[MarkedPoint], zeta: &[MarkedPoint], model: &ModelSpec) -> Result<T> {
    let (m, n) = (omega.len(), zeta.len());
    check(m, n)?;
    if m == 0 {
        return Ok(if n == 0 { T::one() } else { T::zero() });
    }
    // exp*(-k) on the subsets of zeta
    let k: ConfigFunctional<T> = ursell_functional(zeta, model)?;
    let inv = star_exp(&-&k)?;
    // D_omega rho at T subset zeta: e^{-beta (E(omega) + E(T) + W(omega, T))}
    let e_omega = energy_of(omega, model);
    let e_zeta = energy_table(zeta, model);
    let w_single: Vec<f64> = zeta
        .iter()
        .map(|y| interaction_of(omega, std::slice::from_ref(y), model))
        .collect();
    let full = (1u32 << n) - 1;
    let mut acc = CompensatedSum::new();
    for t in submasks(full) {
        let mut e = e_omega + e_zeta[t as usize];
        let mut r = t;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            e += w_single[j];
        }
        let rho = T::of(model.boltzmann(if e.is_nan() { f64::INFINITY } else { e }));
        if rho != T::zero() {
            acc.add(inv.get(full ^ t) * rho);
        }
    }
    Ok(acc.value())
}

/// `kbar` by the anchored recursion
/// `kbar(w, z) = e^{-beta W(x0, w \ x0)} sum_{w' subset z} prod_{y in w'} f(x0, y) kbar(w \ x0 u w', z \ w')`
/// with `kbar(empty, z) = 1*(z)`.
pub fn kbar_recursive(omega: &FiniteConfiguration, zeta: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    if omega.shares_position_with(zeta) {
        return Err(Error::OverlappingConfigurations);
    }
    let (m, n) = (omega.len(), zeta.len());
    check(m, n)?;
    let pts: Vec<&MarkedPoint> = omega.iter().chain(zeta.iter()).collect();
    let t = m + n;
    let mut phi = vec![0.0; t * t];
    let mut f = vec![0.0; t * t];
    for i in 0..t {
        for j in 0..t {
            if i != j {
                phi[i * t + j] = model.phi(pts[i], pts[j]);
                f[i * t + j] = model.mayer(pts[i], pts[j]);
            }
        }
    }
    let mut memo = HashMap::new();
    let wmask = (1u32 << m) - 1;
    let zmask = ((1u32 << n) - 1) << m;
    Ok(rec(wmask, zmask, t, &phi, &f, model.beta, &mut memo))
}

fn rec(w: u32, z: u32, t: usize, phi: &[f64], f: &[f64], beta: f64, memo: &mut HashMap<(u32, u32), f64>) -> f64 {
    if w == 0 {
        return if z == 0 { 1.0 } else { 0.0 };
    }
    if let Some(v) = memo.get(&(w, z)) {
        return *v;
    }
    let x0 = w.trailing_zeros() as usize;
    let rest = w & (w - 1);
    let mut energy = 0.0;
    let mut r = rest;
    while r != 0 {
        let j = r.trailing_zeros() as usize;
        r &= r - 1;
        energy += phi[x0 * t + j];
    }
    let prefactor = if energy == f64::INFINITY { 0.0 } else { (-beta * energy).exp() };
    let mut acc = CompensatedSum::new();
    if prefactor != 0.0 {
        for sub in submasks(z) {
            let mut prod = 1.0;
            let mut r = sub;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                r &= r - 1;
                prod *= f[x0 * t + j];
            }
            if prod != 0.0 {
                acc.add(prod * rec(rest | sub, z ^ sub, t, phi, f, beta, memo));
            }
        }
    }
    let v = prefactor * acc.value();
    memo.insert((w, z), v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ursell_table;
    use crate::model::{canonicalize, Mark, MarkSpace, PositionSpace};
    use crate::potential::PairPotential;

    fn toy() -> ModelSpec {
        ModelSpec::new(
            PositionSpace::unit_interval(),
            MarkSpace::spins(),
            0.05,
            1.0,
            PairPotential::toy_repulsive_spin(),
        )
        .unwrap()
    }

    fn config(xs: &[(f64, i32)]) -> FiniteConfiguration {
        canonicalize(xs.iter().map(|&(x, s)| MarkedPoint::new(vec![x], Mark::Label(s))).collect()).unwrap()
    }

    #[test]
    fn empty_first_argument_is_unit() {
        let m = toy();
        let e = FiniteConfiguration::empty();
        assert_eq!(kbar(&e, &e, &m).unwrap(), 1.0);
        assert_eq!(kbar(&e, &config(&[(0.2, 1)]), &m).unwrap(), 0.0);
    }

    #[test]
    fn singleton_first_argument_gives_ursell() {
        let m = toy();
        let x = config(&[(0.31, -1)]);
        let zeta = config(&[(0.1, 1), (0.2, -1), (0.45, 1), (0.5, 1)]);
        let k = ursell_table(&x.union(&zeta).unwrap(), &m).unwrap().full();
        let kb = kbar(&x, &zeta, &m).unwrap();
        assert!((k - kb).abs() < 1e-13 * k.abs().max(1e-3), "{k} vs {kb}");
    }

    #[test]
    fn ideal_gas_collapses() {
        let m = toy().with_potential(PairPotential::zero());
        let w = config(&[(0.1, 1), (0.7, -1)]);
        assert_eq!(kbar(&w, &FiniteConfiguration::empty(), &m).unwrap(), 1.0);
        assert_eq!(kbar(&w, &config(&[(0.3, 1)]), &m).unwrap(), 0.0);
        assert_eq!(kbar(&w, &config(&[(0.3, 1), (0.5, 1)]), &m).unwrap(), 0.0);
    }

    #[test]
    fn recursion_agrees_with_definition() {
        let m = toy();
        let w = config(&[(0.1, 1), (0.25, -1)]);
        let z = config(&[(0.15, 1), (0.3, 1), (0.33, -1)]);
        let a = kbar(&w, &z, &m).unwrap();
        let b = kbar_recursive(&w, &z, &m).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
}
