//! Pair potentials and the energies built from them.

mod registry;

pub use registry::{builtin, builtin_names, RegistryEntry};

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lpintegrate::{gauss_kronrod_adaptive, mark_nodes, MarkRule};
use crate::model::{
    canonicalize, FiniteConfiguration, MarkSpace, MarkedPoint, ModelSpec, PositionSpace, Region, SubBox,
};
use crate::scalar::CompensatedSum;

pub type PairFn = dyn Fn(&MarkedPoint, &MarkedPoint, f64) -> f64 + Send + Sync;

/// Radial and mark dependence of a potential. `r` is the (minimum image)
/// distance between the two positions.
#[derive(Clone)]
pub enum Profile {
    Zero,
    Constant(f64),
    /// `amplitude * (1 + coupling * s * t) * exp(-(r / length)^2)`
    ToyRepulsiveSpin {
        amplitude: f64,
        coupling: f64,
        length: f64,
    },
    /// `+inf` inside `diameter`, 0 outside.
    HardCore { diameter: f64 },
    /// `a r^-(d+1) + j0 e^{-r/length} s t`
    Ferrofluid { a: f64, j0: f64, length: f64 },
    /// `a r^-(d+1) - j0 e^{-r/length} cos(theta - theta')`
    PlanarRotator { a: f64, j0: f64, length: f64 },
    /// `repulsion * 1{r < reach} * (1 - delta(s, t))`, hard core below `core`.
    ContinuumPotts { repulsion: f64, reach: f64, core: f64 },
    Custom(Arc<PairFn>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Custom(_) => f.write_str("Custom(..)"),
            Profile::Zero => f.write_str("Zero"),
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::ToyRepulsiveSpin {
                amplitude,
                coupling,
                length,
            } => write!(f, "ToyRepulsiveSpin({amplitude}, {coupling}, {length})"),
            Profile::HardCore { diameter } => write!(f, "HardCore({diameter})"),
            Profile::Ferrofluid { a, j0, length } => write!(f, "Ferrofluid({a}, {j0}, {length})"),
            Profile::PlanarRotator { a, j0, length } => write!(f, "PlanarRotator({a}, {j0}, {length})"),
            Profile::ContinuumPotts { repulsion, reach, core } => {
                write!(f, "ContinuumPotts({repulsion}, {reach}, {core})")
            }
        }
    }
}

/// Symmetric pair interaction with values in `R u {+inf}`, a declared
/// stability constant `B` and an optional range `R`.
#[derive(Debug, Clone)]
pub struct PairPotential {
    name: String,
    profile: Profile,
    stability_b: f64,
    range: Option<f64>,
}

impl PairPotential {
    pub fn new(name: impl Into<String>, profile: Profile, stability_b: f64, range: Option<f64>) -> Result<Self> {
        if !(stability_b.is_finite() && stability_b >= 0.0) {
            return Err(Error::InvalidModel(format!("stability constant must be >= 0, got {stability_b}")));
        }
        if let Some(r) = range {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidModel(format!("range must be positive, got {r}")));
            }
        }
        Ok(Self {
            name: name.into(),
            profile,
            stability_b,
            range,
        })
    }

    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            profile: Profile::Zero,
            stability_b: 0.0,
            range: None,
        }
    }

    /// Constant pair value; `B` must be declared by the caller.
    pub fn constant(c: f64, stability_b: f64) -> Result<Self> {
        Self::new("constant", Profile::Constant(c), stability_b, None)
    }

    /// `(1 + 0.5 s t) exp(-(r / 0.2)^2)`, positive and therefore stable with `B = 0`.
    pub fn toy_repulsive_spin() -> Self {
        Self {
            name: "toy-repulsive-spin".into(),
            profile: Profile::ToyRepulsiveSpin {
                amplitude: 1.0,
                coupling: 0.5,
                length: 0.2,
            },
            stability_b: 0.0,
            range: None,
        }
    }

    pub fn hard_core(diameter: f64) -> Result<Self> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(Error::InvalidModel("hard-core diameter must be positive".into()));
        }
        Self::new("hard-core", Profile::HardCore { diameter }, 0.0, Some(diameter))
    }

    /// Ferrofluid; `B = 0` is declared automatically when
    /// `a >= j0 ((d+1) length)^{d+1} e^{-(d+1)}` (then `phi >= 0` for marks in
    /// `[-1, 1]`), otherwise `stability_b` must be supplied.
    pub fn ferrofluid(a: f64, j0: f64, length: f64, dimension: usize, stability_b: Option<f64>) -> Result<Self> {
        let b = radial_stability(a, j0, length, dimension, stability_b, "ferrofluid")?;
        Self::new("ferrofluid", Profile::Ferrofluid { a, j0, length }, b, None)
    }

    pub fn planar_rotator(a: f64, j0: f64, length: f64, dimension: usize, stability_b: Option<f64>) -> Result<Self> {
        let b = radial_stability(a, j0, length, dimension, stability_b, "planar-rotator")?;
        Self::new("planar-rotator", Profile::PlanarRotator { a, j0, length }, b, None)
    }

    pub fn continuum_potts(repulsion: f64, reach: f64, core: f64) -> Result<Self> {
        if !(repulsion >= 0.0 && reach > 0.0 && core >= 0.0 && core <= reach) {
            return Err(Error::InvalidModel(
                "continuum Potts needs repulsion >= 0 and 0 <= core <= reach".into(),
            ));
        }
        Self::new(
            "continuum-potts",
            Profile::ContinuumPotts { repulsion, reach, core },
            0.0,
            Some(reach),
        )
    }

    pub fn custom(name: impl Into<String>, f: Arc<PairFn>, stability_b: f64, range: Option<f64>) -> Result<Self> {
        Self::new(name, Profile::Custom(f), stability_b, range)
    }

    /// Cut the interaction off at distance `range`.
    pub fn truncated(mut self, range: f64) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::InvalidModel(format!("range must be positive, got {range}")));
        }
        self.range = Some(self.range.map_or(range, |r| r.min(range)));
        Ok(self)
    }

    pub fn with_stability_b(mut self, b: f64) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidModel(format!("stability constant must be >= 0, got {b}")));
        }
        self.stability_b = b;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn stability_b(&self) -> f64 {
        self.stability_b
    }

    pub fn range(&self) -> Option<f64> {
        self.range
    }

    /// Distance beyond which `phi` vanishes: the declared range, or 0 for the
    /// zero potential.
    pub fn interaction_range(&self) -> Option<f64> {
        match self.profile {
            Profile::Zero => Some(self.range.unwrap_or(0.0)),
            _ => self.range,
        }
    }

    /// Named numeric parameters, for reports.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        let mut p = match self.profile {
            Profile::Zero | Profile::Custom(_) => vec![],
            Profile::Constant(c) => vec![("value", c)],
            Profile::ToyRepulsiveSpin {
                amplitude,
                coupling,
                length,
            } => vec![("amplitude", amplitude), ("coupling", coupling), ("length", length)],
            Profile::HardCore { diameter } => vec![("diameter", diameter)],
            Profile::Ferrofluid { a, j0, length } | Profile::PlanarRotator { a, j0, length } => {
                vec![("a", a), ("j0", j0), ("length", length)]
            }
            Profile::ContinuumPotts { repulsion, reach, core } => {
                vec![("repulsion", repulsion), ("reach", reach), ("core", core)]
            }
        };
        p.push(("stability_b", self.stability_b));
        if let Some(r) = self.range {
            p.push(("range", r));
        }
        p
    }

    /// Distances at which the profile is not smooth, used as quadrature breakpoints.
    pub fn singular_radii(&self) -> Vec<f64> {
        let mut v = match self.profile {
            Profile::HardCore { diameter } => vec![diameter],
            Profile::ContinuumPotts { reach, core, .. } => vec![reach, core],
            _ => vec![],
        };
        v.extend(self.range);
        v.retain(|r| *r > 0.0);
        v
    }

    #[inline]
    pub fn evaluate(&self, space: &PositionSpace, a: &MarkedPoint, b: &MarkedPoint) -> f64 {
        let r = space.distance(&a.position, &b.position);
        if let Some(range) = self.range {
            if r >= range {
                return 0.0;
            }
        }
        self.profile_at(r, space.dimension(), a, b)
    }

    fn profile_at(&self, r: f64, dim: usize, a: &MarkedPoint, b: &MarkedPoint) -> f64 {
        match &self.profile {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::ToyRepulsiveSpin {
                amplitude,
                coupling,
                length,
            } => {
                let u = r / length;
                amplitude * (1.0 + coupling * a.mark.value() * b.mark.value()) * (-u * u).exp()
            }
            Profile::HardCore { diameter } => {
                if r < *diameter {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Profile::Ferrofluid { a: amp, j0, length } => {
                if r == 0.0 {
                    return f64::INFINITY;
                }
                amp * r.powi(-(dim as i32 + 1)) + j0 * (-r / length).exp() * a.mark.value() * b.mark.value()
            }
            Profile::PlanarRotator { a: amp, j0, length } => {
                if r == 0.0 {
                    return f64::INFINITY;
                }
                amp * r.powi(-(dim as i32 + 1)) - j0 * (-r / length).exp() * (a.mark.value() - b.mark.value()).cos()
            }
            Profile::ContinuumPotts { repulsion, reach, core } => {
                if r < *core {
                    f64::INFINITY
                } else if r < *reach && a.mark != b.mark {
                    *repulsion
                } else {
                    0.0
                }
            }
            Profile::Custom(f) => f(a, b, r),
        }
    }
}

fn radial_stability(
    a: f64,
    j0: f64,
    length: f64,
    dimension: usize,
    declared: Option<f64>,
    what: &str,
) -> Result<f64> {
    if !(a >= 0.0 && j0 >= 0.0 && length > 0.0) {
        return Err(Error::InvalidModel(format!("{what}: need a >= 0, j0 >= 0, length > 0")));
    }
    if let Some(b) = declared {
        return Ok(b);
    }
    let k = (dimension + 1) as f64;
    if a >= j0 * (k * length).powf(k) * (-k).exp() {
        Ok(0.0)
    } else {
        Err(Error::InvalidModel(format!(
            "{what}: repulsion does not dominate the coupling pointwise; declare stability_b"
        )))
    }
}

/// `phi(a, b)` evaluated through the model.
#[inline]
fn phi(model: &ModelSpec, a: &MarkedPoint, b: &MarkedPoint) -> f64 {
    model.potential.evaluate(&model.space, a, b)
}

/// `E(omega) = sum_{pairs} phi`, `+inf` as soon as one pair is `+inf`.
pub fn energy_of(points: &[MarkedPoint], model: &ModelSpec) -> f64 {
    let mut acc = CompensatedSum::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let v = phi(model, a, b);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc.add(v);
        }
    }
    acc.value()
}

/// `W(omega, zeta) = sum_{x in omega, y in zeta} phi(x, y)` without overlap checks.
pub fn interaction_of(omega: &[MarkedPoint], zeta: &[MarkedPoint], model: &ModelSpec) -> f64 {
    let mut acc = CompensatedSum::new();
    for a in omega {
        for b in zeta {
            let v = phi(model, a, b);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc.add(v);
        }
    }
    acc.value()
}

pub fn energy(omega: &FiniteConfiguration, model: &ModelSpec) -> f64 {
    energy_of(omega.points(), model)
}

pub fn interaction(omega: &FiniteConfiguration, zeta: &FiniteConfiguration, model: &ModelSpec) -> Result<f64> {
    if omega.shares_position_with(zeta) {
        return Err(Error::OverlappingConfigurations);
    }
    Ok(interaction_of(omega.points(), zeta.points(), model))
}

/// `E_Lambda(omega) = E(omega_Lambda) + W(omega_Lambda, omega outside Lambda)`.
pub fn conditional_energy<R: Region + ?Sized>(region: &R, omega: &FiniteConfiguration, model: &ModelSpec) -> f64 {
    let inside = omega.within(region);
    let outside = omega.outside(region);
    let e = energy(&inside, model);
    if e == f64::INFINITY {
        return e;
    }
    let w = interaction_of(inside.points(), outside.points(), model);
    if w == f64::INFINITY {
        return w;
    }
    e + w
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    /// Maximum of the reference integral over the reference grid.
    pub c_beta: f64,
    pub finite: bool,
    pub grid_size: usize,
    /// Same maximum on the doubled reference grid.
    pub c_beta_refined: f64,
    /// `|c_beta_refined - c_beta| / c_beta_refined`.
    pub refinement_change: f64,
    /// Reference point attaining the maximum.
    pub argmax: MarkedPoint,
}

/// Tolerance of the adaptive reference integrals.
const REFERENCE_TOL: f64 = 1e-11;

/// `int |e^{-beta phi((x,s),(y,t))} - 1| dsigma^tau(x, s)` over the model box.
pub fn reference_integral(reference: &MarkedPoint, model: &ModelSpec) -> Result<f64> {
    let marks = reference_mark_nodes(&model.marks);
    let radii = model.potential.singular_radii();
    let space = &model.space;
    let full = space.full_box();
    let mut total = 0.0;
    for (mark, w) in &marks {
        let v = integrate_box(&full, reference, &radii, space, &|x: &[f64]| {
            let p = MarkedPoint::new(x.to_vec(), *mark);
            model.mayer(&p, reference).abs()
        })?;
        total += w * v;
    }
    if !total.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "reference integral at {:?} is not finite",
            reference.position
        )));
    }
    Ok(total)
}

fn reference_mark_nodes(marks: &MarkSpace) -> Vec<(crate::model::Mark, f64)> {
    match marks {
        MarkSpace::Discrete { .. } => mark_nodes(marks, MarkRule::ExactDiscreteSum),
        MarkSpace::Circle { .. } => mark_nodes(marks, MarkRule::PeriodicTrapezoid { nodes: 64 }),
        MarkSpace::Interval { .. } => mark_nodes(marks, MarkRule::Gauss { nodes: 24 }),
    }
    .expect("rule chosen to match the mark space")
}

/// Nested adaptive quadrature of `f` over `region`, with breakpoints where
/// the reference point's coordinate +- each singular radius crosses an axis.
fn integrate_box(
    region: &SubBox,
    reference: &MarkedPoint,
    radii: &[f64],
    space: &PositionSpace,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<f64> {
    fn rec(
        axis: usize,
        prefix: &mut Vec<f64>,
        region: &SubBox,
        reference: &MarkedPoint,
        radii: &[f64],
        space: &PositionSpace,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
    ) -> Result<f64> {
        let d = region.dimension();
        let (lo, hi) = (region.lower()[axis], region.upper()[axis]);
        let y = reference.position[axis];
        let l = space.side_lengths()[axis];
        let mut breaks = vec![lo, hi, y];
        for &r in radii {
            breaks.extend([y - r, y + r]);
        }
        if space.boundary() == crate::model::Boundary::Periodic {
            let extra: Vec<f64> = breaks.iter().flat_map(|b| [b - l, b + l]).collect();
            breaks.extend(extra);
            breaks.extend([y + 0.5 * l, y - 0.5 * l]);
        }
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut total = 0.0;
        let mut err = None;
        for w in breaks.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let (v, _) = gauss_kronrod_adaptive(
                |x| {
                    if err.is_some() {
                        return 0.0;
                    }
                    prefix.push(x);
                    let v = if axis + 1 == d {
                        f(prefix)
                    } else {
                        match rec(axis + 1, &mut prefix.clone(), region, reference, radii, space, f) {
                            Ok(v) => v,
                            Err(e) => {
                                err = Some(e);
                                0.0
                            }
                        }
                    };
                    prefix.pop();
                    v
                },
                w[0],
                w[1],
                REFERENCE_TOL,
                40,
            )?;
            total += v;
        }
        match err {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
    rec(0, &mut Vec::with_capacity(region.dimension()), region, reference, radii, space, f)
}

/// Reference points: an endpoint-inclusive grid of `grid_size` positions per
/// axis times the mark quadrature nodes.
pub fn reference_points(model: &ModelSpec, grid_size: usize) -> Vec<MarkedPoint> {
    let m = grid_size.max(2);
    let d = model.space.dimension();
    let marks: Vec<_> = match &model.marks {
        MarkSpace::Discrete { .. } => reference_mark_nodes(&model.marks).into_iter().map(|(s, _)| s).collect(),
        MarkSpace::Circle { .. } => (0..m)
            .map(|i| crate::model::Mark::Angle(std::f64::consts::TAU * i as f64 / m as f64))
            .collect(),
        MarkSpace::Interval { lower, upper, .. } => (0..m)
            .map(|i| crate::model::Mark::Real(lower + (upper - lower) * i as f64 / (m - 1) as f64))
            .collect(),
    };
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let pos: Vec<f64> = idx
            .iter()
            .zip(model.space.side_lengths())
            .map(|(&i, &l)| {
                // keep the top endpoint inside the half-open box
                let x = l * i as f64 / (m - 1) as f64;
                if i == m - 1 {
                    l * (1.0 - f64::EPSILON)
                } else {
                    x
                }
            })
            .collect();
        for s in &marks {
            out.push(MarkedPoint::new(pos.clone(), *s));
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn max_reference(model: &ModelSpec, grid_size: usize) -> Result<(f64, MarkedPoint)> {
    use rayon::prelude::*;
    let refs = reference_points(model, grid_size);
    let vals: Vec<Result<f64>> = refs.par_iter().map(|p| reference_integral(p, model)).collect();
    let mut best = (f64::NEG_INFINITY, refs[0].clone());
    for (v, p) in vals.into_iter().zip(refs) {
        let v = v?;
        if v > best.0 {
            best = (v, p);
        }
    }
    Ok(best)
}

/// `C(beta)`: the essential supremum of the reference integral, approximated by
/// its maximum over a reference grid and re-evaluated on the doubled grid.
pub fn check_integrability(model: &ModelSpec, reference_grid_size: usize) -> Result<IntegrabilityReport> {
    let m = reference_grid_size.max(3);
    if matches!(model.potential.profile(), Profile::Zero) {
        return Ok(IntegrabilityReport {
            c_beta: 0.0,
            finite: true,
            grid_size: m,
            c_beta_refined: 0.0,
            refinement_change: 0.0,
            argmax: reference_points(model, 2)[0].clone(),
        });
    }
    let (c, argmax) = max_reference(model, m)?;
    let (c2, argmax2) = max_reference(model, 2 * m - 1)?;
    let change = if c2 > 0.0 { (c2 - c).abs() / c2 } else { 0.0 };
    let (c_beta, argmax) = if c2 >= c { (c2, argmax2) } else { (c, argmax) };
    Ok(IntegrabilityReport {
        c_beta,
        finite: c_beta.is_finite(),
        grid_size: m,
        c_beta_refined: c2,
        refinement_change: change,
        argmax,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub trials: usize,
    /// `min over trials of (E(omega) + B |omega|)`.
    pub worst_margin: f64,
    pub worst_size: usize,
}

/// Falsification test of `E(omega) >= -B |omega|` on random configurations
/// with sizes cycling through `2..=max_n`.
pub fn spot_check_stability(model: &ModelSpec, trials: usize, max_n: usize, seed: u64) -> Result<StabilityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = model.potential.stability_b();
    let max_n = max_n.max(2);
    let mut worst = (f64::INFINITY, 0);
    for t in 0..trials {
        let n = 2 + t % (max_n - 1);
        let config = random_configuration(model, &model.space.full_box(), n, &mut rng);
        let e = energy(&config, model);
        let margin = e + b * n as f64;
        if margin < -1e-12 * e.abs().max(1.0) {
            return Err(Error::StabilityViolation {
                witness: config,
                energy: e,
                bound: -b * n as f64,
            });
        }
        if margin < worst.0 {
            worst = (margin, n);
        }
    }
    Ok(StabilityReport {
        trials,
        worst_margin: worst.0,
        worst_size: worst.1,
    })
}

/// `n` uniform positions in `region` with marks from `tau / tau(S)`.
pub fn random_configuration<R: rand::Rng + ?Sized>(
    model: &ModelSpec,
    region: &SubBox,
    n: usize,
    rng: &mut R,
) -> FiniteConfiguration {
    loop {
        let pts: Vec<MarkedPoint> = (0..n)
            .map(|_| {
                let pos = region
                    .lower()
                    .iter()
                    .zip(region.upper())
                    .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect();
                MarkedPoint::new(pos, model.marks.sample(rng))
            })
            .collect();
        if let Ok(c) = canonicalize(pts) {
            return c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, Mark};

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

    fn pt(x: f64, s: i32) -> MarkedPoint {
        MarkedPoint::new(vec![x], Mark::Label(s))
    }

    #[test]
    fn energy_small_cases() {
        let m = toy();
        assert_eq!(energy(&FiniteConfiguration::empty(), &m), 0.0);
        assert_eq!(energy(&canonicalize(vec![pt(0.3, 1)]).unwrap(), &m), 0.0);
        let c = canonicalize(vec![pt(0.1, 1), pt(0.2, -1), pt(0.45, 1)]).unwrap();
        let g = |r: f64| (-(r / 0.2f64).powi(2)).exp();
        let hand = 0.5 * g(0.1) + 1.5 * g(0.35) + 0.5 * g(0.25);
        assert!((energy(&c, &m) - hand).abs() < 1e-14);
    }

    #[test]
    fn interaction_additivity_and_overlap() {
        let m = toy();
        let a = canonicalize(vec![pt(0.1, 1), pt(0.6, -1)]).unwrap();
        let b = canonicalize(vec![pt(0.3, -1), pt(0.9, 1)]).unwrap();
        let w = interaction(&a, &b, &m).unwrap();
        let u = a.union(&b).unwrap();
        assert!((energy(&u, &m) - energy(&a, &m) - energy(&b, &m) - w).abs() < 1e-12);
        assert!(matches!(interaction(&a, &a, &m), Err(Error::OverlappingConfigurations)));
        assert_eq!(interaction(&FiniteConfiguration::empty(), &b, &m).unwrap(), 0.0);
    }

    #[test]
    fn conditional_energy_cases() {
        let m = toy();
        let region = SubBox::interval(0.0, 0.5).unwrap();
        let inside = canonicalize(vec![pt(0.1, 1), pt(0.3, -1)]).unwrap();
        assert_eq!(conditional_energy(&region, &inside, &m), energy(&inside, &m));
        let outside = canonicalize(vec![pt(0.6, 1), pt(0.8, -1)]).unwrap();
        assert_eq!(conditional_energy(&region, &outside, &m), 0.0);
        let all = inside.union(&outside).unwrap();
        let lhs = conditional_energy(&region, &all, &m);
        assert!((lhs - (energy(&all, &m) - energy(&outside, &m))).abs() < 1e-12);
    }

    #[test]
    fn hard_core_is_exact() {
        let p = PairPotential::hard_core(0.1).unwrap();
        let m = toy().with_potential(p);
        assert_eq!(m.mayer(&pt(0.1, 1), &pt(0.15, 1)), -1.0);
        assert_eq!(m.mayer(&pt(0.1, 1), &pt(0.25, 1)), 0.0);
        assert_eq!(m.boltzmann(f64::INFINITY), 0.0);
    }

    #[test]
    fn zero_potential_has_zero_c() {
        let m = toy().with_potential(PairPotential::zero());
        assert_eq!(check_integrability(&m, 9).unwrap().c_beta, 0.0);
    }

    #[test]
    fn hard_core_c_is_core_length() {
        let r0 = 0.1;
        let m = toy().with_potential(PairPotential::hard_core(r0).unwrap());
        let rep = check_integrability(&m, 11).unwrap();
        assert!((rep.c_beta - 2.0 * r0).abs() < 1e-9, "{}", rep.c_beta);
    }

    #[test]
    fn unstable_constant_fails_on_two_points() {
        let m = toy().with_potential(PairPotential::constant(-1.0, 0.0).unwrap());
        match spot_check_stability(&m, 10, 5, 1) {
            Err(Error::StabilityViolation { witness, .. }) => assert_eq!(witness.len(), 2),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn periodic_breakpoints_integrate_wrapped_core() {
        let space = PositionSpace::new(vec![1.0], Boundary::Periodic).unwrap();
        let m = ModelSpec::new(space, MarkSpace::spins(), 0.1, 1.0, PairPotential::hard_core(0.1).unwrap()).unwrap();
        let v = reference_integral(&pt(0.02, 1), &m).unwrap();
        assert!((v - 0.2).abs() < 1e-9);
    }

    #[test]
    fn ferrofluid_defaults_are_pointwise_nonnegative() {
        let p = PairPotential::ferrofluid(0.05, 1.0, 0.1, 1, None).unwrap();
        assert_eq!(p.stability_b(), 0.0);
        assert!(PairPotential::ferrofluid(0.001, 1.0, 0.1, 1, None).is_err());
        let space = PositionSpace::unit_interval();
        for i in 1..200 {
            let r = i as f64 * 0.005;
            let v = p.evaluate(
                &space,
                &MarkedPoint::new(vec![0.0], Mark::Real(1.0)),
                &MarkedPoint::new(vec![r], Mark::Real(-1.0)),
            );
            assert!(v >= 0.0, "r = {r}: {v}");
        }
    }
}
