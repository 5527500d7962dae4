//! Local density of the Gibbs state on the model box, projected to a sub-box,
//! through the truncated expansion of `k` integrated over the exterior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpintegrate::{integrate_order, QuadratureScheme};
use crate::model::{Boundary, BoxUnion, FiniteConfiguration, MarkedPoint, ModelSpec, Region, SubBox};
use crate::scalar::{factorial, CompensatedSum};
use crate::starcalc::{star_exp, ConfigFunctional, GROUND_CAP};

use super::ursell::ursell_value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDensity {
    /// Density of the projected state at the configuration w.r.t. the
    /// Lebesgue-Poisson measure on the sub-box.
    pub density: f64,
    /// Log of the projected normalization.
    pub log_partition: f64,
    pub log_partition_error: f64,
    /// Summed integration error of the projected Ursell coefficients.
    pub coefficient_error: f64,
}

/// Points of the model box within distance `width` of `inner` but outside it.
pub fn collar(model: &ModelSpec, inner: &SubBox, width: f64) -> BoxUnion {
    if width <= 0.0 {
        return BoxUnion::new(vec![]);
    }
    let full = model.space.full_box();
    let outer = match model.space.boundary() {
        Boundary::Periodic => full,
        Boundary::Free => match inner.enlarged(width).intersection(&full) {
            Some(b) => b,
            None => return BoxUnion::new(vec![]),
        },
    };
    outer.difference(inner)
}

fn with_inner(inner: &SubBox, ring: BoxUnion) -> BoxUnion {
    let mut boxes = vec![inner.clone()];
    boxes.extend(ring.boxes().iter().cloned());
    BoxUnion::new(boxes)
}

/// Density of the projection to `inner` of the finite-volume Gibbs state on the
/// whole model box, evaluated at `config`:
/// `exp*(k_inner)(config) / Z_inner`, where
/// `k_inner(S) = sum_{j} z^j/j! int_{exterior^j} k(S u y)` and
/// `log Z_inner = int_{Omega_X} k - int_{Omega_{X \ inner}} k`, both truncated at
/// total order `max_order`. Range-disconnected clusters vanish, so order `n`
/// only integrates over the `(n - 1) R` neighbourhood of `inner`.
pub fn limit_local_density(
    config: &FiniteConfiguration,
    model: &ModelSpec,
    inner: &SubBox,
    max_order: usize,
    scheme: &QuadratureScheme,
) -> Result<LocalDensity> {
    let range = model.potential.interaction_range().ok_or(Error::RequiresFiniteRange)?;
    if !model.space.contains_box(inner) {
        return Err(Error::RegionOutOfBounds {
            region: inner.to_string(),
        });
    }
    if let Some(p) = config.iter().find(|p| !inner.contains(&p.position)) {
        return Err(Error::RegionOutOfBounds {
            region: format!("point {:?} outside {inner}", p.position),
        });
    }
    let m = config.len();
    if max_order > GROUND_CAP || m > max_order {
        return Err(Error::SizeLimit {
            what: "local density order",
            size: max_order.max(m),
            cap: GROUND_CAP.min(max_order.max(1)),
        });
    }
    let z = model.activity;
    let fail = |n: usize| move |e: Error| Error::IntegrationFailure(format!("order {n}: {e}"));

    // log Z_inner
    let mut log_z = CompensatedSum::new();
    let mut log_z_err = 0.0;
    log_z.add(z * model.sigma_tau(inner));
    let k_of = |pts: &[MarkedPoint]| ursell_value(pts, model);
    for l in 2..=max_order {
        let pref = z.powi(l as i32) / factorial(l);
        if pref == 0.0 {
            continue;
        }
        let ring = collar(model, inner, (l - 1) as f64 * range);
        let whole = with_inner(inner, ring.clone());
        let a = integrate_order(&k_of, model, &whole, l, scheme).map_err(fail(l))?;
        let b = integrate_order(&k_of, model, &ring, l, scheme).map_err(fail(l))?;
        log_z.add(pref * (a.value - b.value));
        log_z_err += pref * (a.error + b.error);
    }

    // k_inner on the subsets of config
    let pts = config.points();
    let mut coeff_err = 0.0;
    let mut table = ConfigFunctional::<f64>::zeros(m)?;
    for s in 1u32..1 << m {
        let sub: Vec<MarkedPoint> = (0..m).filter(|i| s >> i & 1 == 1).map(|i| pts[i].clone()).collect();
        let mut acc = CompensatedSum::new();
        acc.add(ursell_value(&sub, model));
        for j in 1..=max_order - sub.len() {
            let pref = z.powi(j as i32) / factorial(j);
            if pref == 0.0 {
                break;
            }
            let ring = collar(model, inner, j as f64 * range);
            let f = |ys: &[MarkedPoint]| {
                let mut all = sub.clone();
                all.extend_from_slice(ys);
                ursell_value(&all, model)
            };
            let est = integrate_order(&f, model, &ring, j, scheme).map_err(fail(j))?;
            acc.add(pref * est.value);
            coeff_err += pref * est.error;
        }
        table.set(s, acc.value());
    }
    let e = star_exp(&table)?;
    let log_partition = log_z.value();
    Ok(LocalDensity {
        density: e.get(e.full_mask()) * (-log_partition).exp(),
        log_partition,
        log_partition_error: log_z_err,
        coefficient_error: coeff_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpintegrate::{MarkRule, PositionRule};
    use crate::model::{canonicalize, Mark, MarkSpace, PositionSpace};
    use crate::potential::PairPotential;

    fn scheme() -> QuadratureScheme {
        QuadratureScheme::grid(8, PositionRule::GaussLegendre, MarkRule::ExactDiscreteSum)
    }

    #[test]
    fn collar_shapes() {
        let m = ModelSpec::new(PositionSpace::unit_interval(), MarkSpace::spins(), 0.1, 1.0, PairPotential::zero()).unwrap();
        let inner = SubBox::interval(0.4, 0.6).unwrap();
        assert!(collar(&m, &inner, 0.0).is_empty());
        assert!((collar(&m, &inner, 0.1).volume() - 0.2).abs() < 1e-15);
        assert!((collar(&m, &inner, 0.5).volume() - 0.8).abs() < 1e-15);
        let edge = SubBox::interval(0.0, 0.2).unwrap();
        assert!((collar(&m, &edge, 0.1).volume() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ideal_gas_density_is_poisson() {
        let m = ModelSpec::new(PositionSpace::unit_interval(), MarkSpace::spins(), 0.3, 1.0, PairPotential::zero()).unwrap();
        let inner = SubBox::interval(0.2, 0.7).unwrap();
        let c = canonicalize(vec![
            MarkedPoint::new(vec![0.3], Mark::Label(1)),
            MarkedPoint::new(vec![0.5], Mark::Label(-1)),
        ])
        .unwrap();
        let d = limit_local_density(&c, &m, &inner, 3, &scheme()).unwrap();
        assert!((d.density - (-0.15f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn infinite_range_is_rejected() {
        let m = ModelSpec::new(
            PositionSpace::unit_interval(),
            MarkSpace::spins(),
            0.1,
            1.0,
            PairPotential::toy_repulsive_spin(),
        )
        .unwrap();
        let r = limit_local_density(&FiniteConfiguration::empty(), &m, &SubBox::interval(0.2, 0.4).unwrap(), 2, &scheme());
        assert!(matches!(r, Err(Error::RequiresFiniteRange)));
    }
}
