//! Convergence certificate and truncated Lebesgue-Poisson series for
//! `log Z`, `Z` and the correlation functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpintegrate::{integrate_order, lp_integral, IntegralEstimate, QuadratureScheme};
use crate::model::{BoxUnion, FiniteConfiguration, MarkedPoint, ModelSpec, Region, SubBox};
use crate::potential::{check_integrability, energy_of, interaction_of};
use crate::scalar::{extended_real, factorial, pairwise_sum};

use super::kbar::{kbar_points, KBAR_CAP};
use super::ursell::ursell_value;

/// `C(beta)`, the radius `z* = 1 / (2 e e^{2 beta B} C(beta))` and the ratio
/// `q = 2 z e C(beta) e^{2 beta B}` of the geometric majorant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCertificate {
    pub c_beta: f64,
    #[serde(with = "extended_real")]
    pub z_star: f64,
    pub activity: f64,
    pub q: f64,
    pub within_radius: bool,
    pub stability_b: f64,
    pub beta: f64,
}

impl RadiusCertificate {
    /// The certificate for a known `C(beta)`.
    pub fn from_c_beta(model: &ModelSpec, c_beta: f64) -> Result<Self> {
        if !c_beta.is_finite() || c_beta < 0.0 {
            return Err(Error::InfiniteCBeta);
        }
        let growth = model.stability_factor();
        let z_star = if c_beta == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (2.0 * std::f64::consts::E * growth * c_beta)
        };
        let q = 2.0 * model.activity * std::f64::consts::E * c_beta * growth;
        Ok(Self {
            c_beta,
            z_star,
            activity: model.activity,
            q,
            within_radius: model.activity < z_star,
            stability_b: model.potential.stability_b(),
            beta: model.beta,
        })
    }

    /// `(mass / C) q^{from_order} / (1 - q)`, a bound on `sum_{n >= from_order} z^n/n! int |k|`
    /// over a region of `sigma^tau`-mass `mass`.
    pub fn tail_bound(&self, mass: f64, from_order: usize) -> Result<f64> {
        if self.c_beta == 0.0 {
            return Ok(if from_order <= 1 { self.activity * mass } else { 0.0 });
        }
        if self.q >= 1.0 {
            return Err(Error::OutsideRadius { q: self.q });
        }
        Ok(mass / self.c_beta * self.q.powi(from_order as i32) / (1.0 - self.q))
    }

    /// `(mass / C) q^n`, the `n`-th term of the geometric majorant.
    pub fn majorant_term(&self, mass: f64, n: usize) -> f64 {
        if self.c_beta == 0.0 {
            return if n == 1 { self.activity * mass } else { 0.0 };
        }
        mass / self.c_beta * self.q.powi(n as i32)
    }

    /// Bound on `sum_{n > max_order} z^n/n! int |kbar(points, y)|` for `points`
    /// fixed points. `|kbar| <= Q`, the series of `Q` factorizes over the
    /// anchors, and each anchor contributes
    /// `z^k/k! int Q({x}, y) <= e^{2 beta B (k+1)} (zC)^k (k+1)^{k-1} / k!`.
    /// Infinite once that series diverges (`q >= 2`).
    pub fn correlation_tail_bound(&self, points: usize, max_order: usize) -> f64 {
        if points == 0 {
            return 0.0;
        }
        let growth = (2.0 * self.beta * self.stability_b).exp();
        let ratio = self.q / 2.0;
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        let degree = max_order + 200;
        let anchor: Vec<f64> = (0..=degree)
            .map(|k| {
                let k1 = (k + 1) as f64;
                let log = k as f64 * (self.activity * self.c_beta * growth).ln() + (k as f64 - 1.0) * k1.ln()
                    - factorial(k).ln();
                if k == 0 {
                    growth
                } else if self.c_beta == 0.0 || self.activity == 0.0 {
                    0.0
                } else {
                    growth * log.exp()
                }
            })
            .collect();
        // successive terms shrink by at most `ratio`, so the anchor terms past
        // `degree` sum to at most `rest`
        let rest = anchor[degree] * ratio / (1.0 - ratio);
        let kept: f64 = anchor.iter().sum();
        let mut poly = vec![1.0];
        for _ in 0..points {
            let mut next = vec![0.0; poly.len() + degree];
            for (i, &p) in poly.iter().enumerate().filter(|(_, p)| **p != 0.0) {
                for (j, &a) in anchor.iter().enumerate() {
                    next[i + j] += p * a;
                }
            }
            poly = next;
        }
        // (kept + rest)^m - kept^m without cancellation
        let beyond = rest
            * (0..points)
                .map(|i| (kept + rest).powi(i as i32) * kept.powi((points - 1 - i) as i32))
                .sum::<f64>();
        poly.get(max_order + 1..).map_or(0.0, |t| t.iter().sum::<f64>()) + beyond
    }

    /// Smallest `N` whose tail beyond `N` is at most `accuracy`, capped at `max_order`.
    pub fn order_for_accuracy(&self, mass: f64, accuracy: f64, max_order: usize) -> Result<usize> {
        for n in 1..=max_order {
            if self.tail_bound(mass, n + 1)? <= accuracy {
                return Ok(n);
            }
        }
        Ok(max_order)
    }
}

/// Certificate with `C(beta)` taken from the integrability check on a reference
/// grid of `reference_grid` points per axis.
pub fn convergence_radius(model: &ModelSpec, reference_grid: usize) -> Result<RadiusCertificate> {
    let report = check_integrability(model, reference_grid)?;
    if !report.finite {
        return Err(Error::InfiniteCBeta);
    }
    RadiusCertificate::from_c_beta(model, report.c_beta)
}

/// Truncated series for `log Z` with its error budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub truncation_order: usize,
    /// `b_n = z^n / n! int k`, `n = 1..=N`.
    pub coefficients: Vec<f64>,
    pub coefficient_errors: Vec<f64>,
    pub log_z: f64,
    pub integration_error: f64,
    /// Infinite when the activity lies outside the certified radius.
    #[serde(with = "extended_real")]
    pub tail_bound: f64,
    #[serde(with = "extended_real")]
    pub z_star: f64,
    pub c_beta: f64,
    pub within_radius: bool,
    pub region_mass: f64,
}

/// `log Z ~ sum_{n=1}^{N} z^n / n! int_{(region x S)^n} k`. The first
/// coefficient is `z sigma^tau(region)` since `k` is 1 on singletons.
pub fn log_partition_truncated(
    model: &ModelSpec,
    region: &SubBox,
    max_order: usize,
    scheme: &QuadratureScheme,
    cert: &RadiusCertificate,
) -> Result<ExpansionReport> {
    if max_order == 0 {
        return Err(Error::InvalidModel("truncation order must be at least 1".into()));
    }
    let mass = model.sigma_tau(region);
    let domain = BoxUnion::from(region.clone());
    let f = |pts: &[MarkedPoint]| ursell_value(pts, model);
    let mut coefficients = vec![model.activity * mass];
    let mut errors = vec![0.0];
    for n in 2..=max_order {
        let pref = model.activity.powi(n as i32) / factorial(n);
        if pref == 0.0 {
            coefficients.push(0.0);
            errors.push(0.0);
            continue;
        }
        let est = integrate_order(&f, model, &domain, n, scheme)
            .map_err(|e| Error::IntegrationFailure(format!("order {n}: {e}")))?;
        coefficients.push(pref * est.value);
        errors.push(pref * est.error);
    }
    let tail = match cert.tail_bound(mass, max_order + 1) {
        Ok(t) => t,
        Err(Error::OutsideRadius { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(ExpansionReport {
        truncation_order: max_order,
        log_z: pairwise_sum(&coefficients),
        integration_error: errors.iter().sum(),
        coefficients,
        coefficient_errors: errors,
        tail_bound: tail,
        z_star: cert.z_star,
        c_beta: cert.c_beta,
        within_radius: cert.within_radius,
        region_mass: mass,
    })
}

/// `Z(boundary) ~ 1 + sum_{n=1}^{N} z^n/n! int e^{-beta (E(y) + W(y, boundary))}`,
/// the partition function of the specification on `region` given an exterior
/// configuration.
pub fn partition_direct_truncated(
    model: &ModelSpec,
    region: &SubBox,
    boundary: &FiniteConfiguration,
    max_order: usize,
    scheme: &QuadratureScheme,
) -> Result<IntegralEstimate> {
    let domain = BoxUnion::from(region.clone());
    let bpts = boundary.points();
    let f = |pts: &[MarkedPoint]| {
        let e = energy_of(pts, model);
        if e == f64::INFINITY {
            return 0.0;
        }
        model.boltzmann(e + interaction_of(pts, bpts, model))
    };
    lp_integral(&f, model, &domain, max_order, scheme).map_err(|e| Error::IntegrationFailure(e.to_string()))
}

/// `rho(points) ~ sum_{n=0}^{N} z^n/n! int kbar(points, y)`. No `z^m` factor is
/// attached to the fixed points.
pub fn correlation_truncated(
    points: &FiniteConfiguration,
    model: &ModelSpec,
    region: &SubBox,
    max_order: usize,
    scheme: &QuadratureScheme,
) -> Result<IntegralEstimate> {
    check_inside(points, region)?;
    if points.len() + max_order > KBAR_CAP {
        return Err(Error::SizeLimit {
            what: "correlation series (points + order)",
            size: points.len() + max_order,
            cap: KBAR_CAP,
        });
    }
    let domain = BoxUnion::from(region.clone());
    let omega = points.points();
    let f = |ys: &[MarkedPoint]| kbar_points::<f64>(omega, ys, model).expect("size checked above");
    lp_integral(&f, model, &domain, max_order, scheme).map_err(|e| Error::IntegrationFailure(e.to_string()))
}

/// The ratio form `rho(points) = Z^{-1} sum_n z^n/n! int e^{-beta E(points u y)}`
/// with numerator and denominator truncated at the same order. Returns the value
/// and a first-order error from the two integration errors.
pub fn correlation_ratio(
    points: &FiniteConfiguration,
    model: &ModelSpec,
    region: &SubBox,
    max_order: usize,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    check_inside(points, region)?;
    let domain = BoxUnion::from(region.clone());
    let omega = points.points();
    let base = energy_of(omega, model);
    let num = |ys: &[MarkedPoint]| {
        let e = energy_of(ys, model);
        if e == f64::INFINITY || base == f64::INFINITY {
            return 0.0;
        }
        model.boltzmann(base + e + interaction_of(omega, ys, model))
    };
    let n = lp_integral(&num, model, &domain, max_order, scheme)
        .map_err(|e| Error::IntegrationFailure(e.to_string()))?;
    let d = partition_direct_truncated(model, region, &FiniteConfiguration::empty(), max_order, scheme)?;
    let value = n.value / d.value;
    let error = value.abs() * (n.error / n.value.abs() + d.error / d.value.abs());
    Ok((value, error))
}

/// Terms `a_n = z^n/n! int |k|` of the absolutely convergent series next to
/// the geometric majorant `(mass / C) q^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteSeries {
    pub terms: Vec<f64>,
    pub errors: Vec<f64>,
    pub majorant: Vec<f64>,
}

impl AbsoluteSeries {
    pub fn partial_sums(&self) -> Vec<f64> {
        self.terms
            .iter()
            .scan(0.0, |s, t| {
                *s += t;
                Some(*s)
            })
            .collect()
    }

    pub fn majorant_partial_sums(&self) -> Vec<f64> {
        self.majorant
            .iter()
            .scan(0.0, |s, t| {
                *s += t;
                Some(*s)
            })
            .collect()
    }
}

pub fn absolute_series(
    model: &ModelSpec,
    region: &SubBox,
    max_order: usize,
    scheme: &QuadratureScheme,
    cert: &RadiusCertificate,
) -> Result<AbsoluteSeries> {
    let mass = model.sigma_tau(region);
    let domain = BoxUnion::from(region.clone());
    let f = |pts: &[MarkedPoint]| ursell_value(pts, model).abs();
    let mut terms = Vec::with_capacity(max_order);
    let mut errors = Vec::with_capacity(max_order);
    for n in 1..=max_order {
        let pref = model.activity.powi(n as i32) / factorial(n);
        if n == 1 {
            terms.push(model.activity * mass);
            errors.push(0.0);
            continue;
        }
        let est = integrate_order(&f, model, &domain, n, scheme)
            .map_err(|e| Error::IntegrationFailure(format!("order {n}: {e}")))?;
        terms.push(pref * est.value);
        errors.push(pref * est.error);
    }
    Ok(AbsoluteSeries {
        terms,
        errors,
        majorant: (1..=max_order).map(|n| cert.majorant_term(mass, n)).collect(),
    })
}

fn check_inside(points: &FiniteConfiguration, region: &SubBox) -> Result<()> {
    match points.iter().find(|p| !region.contains(&p.position)) {
        Some(p) => Err(Error::RegionOutOfBounds {
            region: format!("point {:?} outside {region}", p.position),
        }),
        None => Ok(()),
    }
}
