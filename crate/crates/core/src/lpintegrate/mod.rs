//! Lebesgue-Poisson integration
//! `int f dnu = sum_n z^n / n! int_{(Lambda x S)^n} f dsigma^tau`
//! by tensor quadrature or seeded Monte Carlo.

mod rules;

pub use rules::{gauss_kronrod_adaptive, gauss_legendre};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoxUnion, Mark, MarkSpace, MarkedPoint, ModelSpec, Region, SubBox};
use crate::scalar::{factorial, pairwise_sum, CompensatedSum};

/// Name of the generator behind Monte Carlo node streams.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha), stream = order << 40 | chunk";

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionRule {
    Midpoint,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkRule {
    ExactDiscreteSum,
    PeriodicTrapezoid { nodes: usize },
    Gauss { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    TensorGrid {
        points_per_axis: usize,
        rule: PositionRule,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// Tensor grid for orders with at most 6 integration dimensions and
    /// `max_nodes` nodes, Monte Carlo above.
    Hybrid {
        points_per_axis: usize,
        rule: PositionRule,
        max_nodes: usize,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub kind: SchemeKind,
    pub mark_rule: MarkRule,
}

impl QuadratureScheme {
    pub fn grid(points_per_axis: usize, rule: PositionRule, mark_rule: MarkRule) -> Self {
        Self {
            kind: SchemeKind::TensorGrid { points_per_axis, rule },
            mark_rule,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64, mark_rule: MarkRule) -> Self {
        Self {
            kind: SchemeKind::MonteCarlo { samples, seed },
            mark_rule,
        }
    }

    pub fn validate(&self, marks: &MarkSpace) -> Result<()> {
        match self.kind {
            SchemeKind::TensorGrid { points_per_axis, .. } if points_per_axis == 0 => {
                return Err(Error::SchemeMismatch("points_per_axis must be positive".into()));
            }
            SchemeKind::MonteCarlo { samples, .. } if samples < 2 => {
                return Err(Error::SchemeMismatch("Monte Carlo needs at least 2 samples".into()));
            }
            SchemeKind::Hybrid {
                points_per_axis,
                samples,
                ..
            } if points_per_axis == 0 || samples < 2 => {
                return Err(Error::SchemeMismatch("hybrid scheme needs positive counts".into()));
            }
            _ => {}
        }
        mark_nodes(marks, self.mark_rule).map(|_| ())
    }
}

/// Estimate of one order, `int_{(U x S)^n} f` without the `z^n / n!` factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub order: usize,
    pub value: f64,
    /// Refinement difference for grids, standard error for Monte Carlo.
    pub error: f64,
    pub monte_carlo: bool,
    pub nodes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error: f64,
    /// Per order, including the `z^n / n!` factor.
    pub terms: Vec<OrderEstimate>,
    pub scheme_echo: QuadratureScheme,
}

/// Mark quadrature: `(mark, weight)` with weights summing to `tau(S)`.
pub fn mark_nodes(marks: &MarkSpace, rule: MarkRule) -> Result<Vec<(Mark, f64)>> {
    match (marks, rule) {
        (MarkSpace::Discrete { labels, weights }, MarkRule::ExactDiscreteSum) => Ok(labels
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(l, w)| (Mark::Label(*l), *w))
            .collect()),
        (MarkSpace::Circle { mass }, MarkRule::PeriodicTrapezoid { nodes }) if nodes > 0 => Ok((0..nodes)
            .map(|i| {
                (
                    Mark::Angle(std::f64::consts::TAU * i as f64 / nodes as f64),
                    mass / nodes as f64,
                )
            })
            .collect()),
        (
            MarkSpace::Interval {
                lower,
                upper,
                density,
            },
            MarkRule::Gauss { nodes },
        ) if nodes > 0 => {
            let (x, w) = gauss_legendre(nodes);
            let cells = match density {
                crate::model::IntervalDensity::Uniform { mass } => vec![(*lower, *upper, mass / (upper - lower))],
                crate::model::IntervalDensity::Histogram { heights } => {
                    let h = (upper - lower) / heights.len() as f64;
                    heights
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (lower + h * i as f64, lower + h * (i + 1) as f64, *v))
                        .collect()
                }
            };
            let mut out = Vec::new();
            for (a, b, dens) in cells {
                for (xi, wi) in x.iter().zip(&w) {
                    out.push((Mark::Real(0.5 * (a + b) + 0.5 * (b - a) * xi), 0.5 * (b - a) * wi * dens));
                }
            }
            Ok(out)
        }
        (m, r) => Err(Error::SchemeMismatch(format!("mark rule {r:?} does not fit mark space {m:?}"))),
    }
}

fn axis_nodes(lo: f64, hi: f64, m: usize, rule: PositionRule) -> Vec<(f64, f64)> {
    let h = hi - lo;
    match rule {
        PositionRule::Midpoint => (0..m)
            .map(|i| (lo + h * (i as f64 + 0.5) / m as f64, h / m as f64))
            .collect(),
        PositionRule::GaussLegendre => {
            let (x, w) = gauss_legendre(m);
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| (lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
                .collect()
        }
    }
}

/// One-point tensor nodes over a union of boxes.
pub fn single_point_nodes(
    marks: &MarkSpace,
    region: &BoxUnion,
    points_per_axis: usize,
    rule: PositionRule,
    mark_rule: MarkRule,
) -> Result<Vec<(MarkedPoint, f64)>> {
    let mn = mark_nodes(marks, mark_rule)?;
    let mut out = Vec::new();
    for b in region.boxes() {
        let d = b.dimension();
        let axes: Vec<Vec<(f64, f64)>> = (0..d)
            .map(|k| axis_nodes(b.lower()[k], b.upper()[k], points_per_axis, rule))
            .collect();
        let mut idx = vec![0usize; d];
        'outer: loop {
            let pos: Vec<f64> = (0..d).map(|k| axes[k][idx[k]].0).collect();
            let w: f64 = (0..d).map(|k| axes[k][idx[k]].1).product();
            for (mark, mw) in &mn {
                out.push((MarkedPoint::new(pos.clone(), *mark), w * mw));
            }
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < points_per_axis {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
    }
    Ok(out)
}

fn continuous_mark_dims(marks: &MarkSpace) -> usize {
    match marks {
        MarkSpace::Discrete { .. } => 0,
        _ => 1,
    }
}

enum OrderMethod {
    Tensor { points_per_axis: usize, rule: PositionRule },
    MonteCarlo { samples: usize, seed: u64 },
}

fn method_for(scheme: &QuadratureScheme, model: &ModelSpec, n: usize, nodes_per_point: usize) -> Result<OrderMethod> {
    let dims = (model.space.dimension() + continuous_mark_dims(&model.marks)) * n;
    match scheme.kind {
        SchemeKind::TensorGrid { points_per_axis, rule } => {
            if dims > 6 {
                return Err(Error::SchemeMismatch(format!(
                    "tensor grids are limited to 6 integration dimensions, order {n} needs {dims}"
                )));
            }
            Ok(OrderMethod::Tensor { points_per_axis, rule })
        }
        SchemeKind::MonteCarlo { samples, seed } => Ok(OrderMethod::MonteCarlo { samples, seed }),
        SchemeKind::Hybrid {
            points_per_axis,
            rule,
            max_nodes,
            samples,
            seed,
        } => {
            let count = (nodes_per_point as f64).powi(n as i32);
            if dims <= 6 && count <= max_nodes as f64 {
                Ok(OrderMethod::Tensor { points_per_axis, rule })
            } else {
                Ok(OrderMethod::MonteCarlo { samples, seed })
            }
        }
    }
}

fn tensor_order<F>(f: &F, nodes: &[(MarkedPoint, f64)], n: usize) -> Result<f64>
where
    F: Fn(&[MarkedPoint]) -> f64 + Sync,
{
    let m = nodes.len() as u64;
    let total = m.checked_pow(n as u32).ok_or(Error::SizeLimit {
        what: "tensor nodes",
        size: usize::MAX,
        cap: usize::MAX,
    })?;
    let chunks = total.div_ceil(CHUNK as u64);
    let partial: Vec<std::result::Result<f64, ()>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK as u64;
            let end = (start + CHUNK as u64).min(total);
            let mut buf: Vec<MarkedPoint> = vec![nodes[0].0.clone(); n];
            let mut acc = CompensatedSum::new();
            for idx in start..end {
                let mut rest = idx;
                let mut w = 1.0;
                for slot in buf.iter_mut() {
                    let (p, pw) = &nodes[(rest % m) as usize];
                    rest /= m;
                    slot.clone_from(p);
                    w *= pw;
                }
                let v = f(&buf);
                if !v.is_finite() {
                    return Err(());
                }
                acc.add(w * v);
            }
            Ok(acc.value())
        })
        .collect();
    let mut vals = Vec::with_capacity(partial.len());
    for p in partial {
        vals.push(p.map_err(|_| Error::NonFiniteIntegrand { order: n })?);
    }
    Ok(pairwise_sum(&vals))
}

fn mc_rng(seed: u64, order: usize, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((order as u64) << 40) | chunk);
    rng
}

/// Uniform point on a union of boxes (box chosen by volume), mark from `tau / tau(S)`.
pub fn sample_point<R: Rng + ?Sized>(marks: &MarkSpace, region: &BoxUnion, rng: &mut R) -> MarkedPoint {
    let boxes = region.boxes();
    let b = if boxes.len() == 1 {
        &boxes[0]
    } else {
        let total = region.volume();
        let mut u = rng.random::<f64>() * total;
        let mut pick = &boxes[boxes.len() - 1];
        for b in boxes {
            let v = b.volume();
            if u < v {
                pick = b;
                break;
            }
            u -= v;
        }
        pick
    };
    let pos = b
        .lower()
        .iter()
        .zip(b.upper())
        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    MarkedPoint::new(pos, marks.sample(rng))
}

/// Returns (mean of f, standard error of the mean) over `samples` draws.
fn mc_order<F>(f: &F, model: &ModelSpec, region: &BoxUnion, n: usize, samples: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&[MarkedPoint]) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK) as u64;
    let partial: Vec<std::result::Result<(f64, f64, f64), ()>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = mc_rng(seed, n, c);
            let count = CHUNK.min(samples - c as usize * CHUNK);
            let mut buf: Vec<MarkedPoint> = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(count);
            for _ in 0..count {
                buf.clear();
                for _ in 0..n {
                    buf.push(sample_point(&model.marks, region, &mut rng));
                }
                let v = f(&buf);
                if !v.is_finite() {
                    return Err(());
                }
                vals.push(v);
            }
            let s = pairwise_sum(&vals);
            let mean = s / count as f64;
            let ss: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
            Ok((count as f64, s, pairwise_sum(&ss)))
        })
        .collect();
    // merge chunk moments in fixed order
    let (mut cnt, mut sum, mut m2) = (0.0, 0.0, 0.0);
    for p in partial {
        let (c, s, q) = p.map_err(|_| Error::NonFiniteIntegrand { order: n })?;
        if cnt == 0.0 {
            (cnt, sum, m2) = (c, s, q);
            continue;
        }
        let delta = s / c - sum / cnt;
        m2 += q + delta * delta * cnt * c / (cnt + c);
        sum += s;
        cnt += c;
    }
    let mean = sum / cnt;
    let var = if cnt > 1.0 { m2 / (cnt - 1.0) } else { 0.0 };
    Ok((mean, (var / cnt).sqrt()))
}

/// `int_{(U x S)^n} f dsigma^tau^{(x) n}` for a single order `n >= 1`.
pub fn integrate_order<F>(
    f: &F,
    model: &ModelSpec,
    region: &BoxUnion,
    n: usize,
    scheme: &QuadratureScheme,
) -> Result<OrderEstimate>
where
    F: Fn(&[MarkedPoint]) -> f64 + Sync,
{
    scheme.validate(&model.marks)?;
    if n == 0 {
        let v = f(&[]);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { order: 0 });
        }
        return Ok(OrderEstimate {
            order: 0,
            value: v,
            error: 0.0,
            monte_carlo: false,
            nodes: 1,
        });
    }
    if region.is_empty() {
        return Ok(OrderEstimate {
            order: n,
            value: 0.0,
            error: 0.0,
            monte_carlo: false,
            nodes: 0,
        });
    }
    let ppa = match scheme.kind {
        SchemeKind::TensorGrid { points_per_axis, .. } | SchemeKind::Hybrid { points_per_axis, .. } => points_per_axis,
        SchemeKind::MonteCarlo { .. } => 1,
    };
    let per_point = ppa.pow(model.space.dimension() as u32)
        * region.boxes().len()
        * mark_nodes(&model.marks, scheme.mark_rule)?.len();
    match method_for(scheme, model, n, per_point)? {
        OrderMethod::Tensor { points_per_axis, rule } => {
            let fine = single_point_nodes(&model.marks, region, points_per_axis, rule, scheme.mark_rule)?;
            let value = tensor_order(f, &fine, n)?;
            let coarse_ppa = (points_per_axis / 2).max(1);
            let error = if coarse_ppa < points_per_axis {
                let coarse = single_point_nodes(&model.marks, region, coarse_ppa, rule, scheme.mark_rule)?;
                (value - tensor_order(f, &coarse, n)?).abs()
            } else {
                f64::INFINITY
            };
            Ok(OrderEstimate {
                order: n,
                value,
                error,
                monte_carlo: false,
                nodes: (fine.len() as u64).saturating_pow(n as u32),
            })
        }
        OrderMethod::MonteCarlo { samples, seed } => {
            let (mean, se) = mc_order(f, model, region, n, samples, seed)?;
            let vol = model.sigma_tau(region).powi(n as i32);
            Ok(OrderEstimate {
                order: n,
                value: mean * vol,
                error: se * vol,
                monte_carlo: true,
                nodes: samples as u64,
            })
        }
    }
}

/// `sum_{n=0}^{N} z^n / n! int f_n`. Grid errors add linearly, Monte Carlo
/// standard errors in quadrature.
pub fn lp_integral<F>(
    f: &F,
    model: &ModelSpec,
    region: &BoxUnion,
    max_order: usize,
    scheme: &QuadratureScheme,
) -> Result<IntegralEstimate>
where
    F: Fn(&[MarkedPoint]) -> f64 + Sync,
{
    let mut terms = Vec::with_capacity(max_order + 1);
    for n in 0..=max_order {
        let mut t = integrate_order(f, model, region, n, scheme)?;
        let pref = model.activity.powi(n as i32) / factorial(n);
        t.value *= pref;
        t.error *= pref;
        terms.push(t);
    }
    let value = pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
    let grid_err: f64 = terms.iter().filter(|t| !t.monte_carlo).map(|t| t.error).sum();
    let mc_var: f64 = terms.iter().filter(|t| t.monte_carlo).map(|t| t.error * t.error).sum();
    Ok(IntegralEstimate {
        value,
        error: grid_err + mc_var.sqrt(),
        terms,
        scheme_echo: *scheme,
    })
}

/// Nodes `(n-tuple, weight)` of the scheme at order `n`, in evaluation order.
pub fn marked_point_nodes(
    model: &ModelSpec,
    region: &SubBox,
    n: usize,
    scheme: &QuadratureScheme,
) -> Result<Box<dyn Iterator<Item = (Vec<MarkedPoint>, f64)>>> {
    scheme.validate(&model.marks)?;
    let region = BoxUnion::from(region.clone());
    let ppa = match scheme.kind {
        SchemeKind::TensorGrid { points_per_axis, .. } | SchemeKind::Hybrid { points_per_axis, .. } => points_per_axis,
        SchemeKind::MonteCarlo { .. } => 1,
    };
    let per_point = ppa.pow(model.space.dimension() as u32) * mark_nodes(&model.marks, scheme.mark_rule)?.len();
    match method_for(scheme, model, n, per_point)? {
        OrderMethod::Tensor { points_per_axis, rule } => {
            let nodes = single_point_nodes(&model.marks, &region, points_per_axis, rule, scheme.mark_rule)?;
            let m = nodes.len() as u64;
            let total = m.pow(n as u32);
            Ok(Box::new((0..total).map(move |idx| {
                let mut rest = idx;
                let mut w = 1.0;
                let mut tuple = Vec::with_capacity(n);
                for _ in 0..n {
                    let (p, pw) = &nodes[(rest % m) as usize];
                    rest /= m;
                    tuple.push(p.clone());
                    w *= pw;
                }
                (tuple, w)
            })))
        }
        OrderMethod::MonteCarlo { samples, seed } => {
            let marks = model.marks.clone();
            let w = model.sigma_tau(&region).powi(n as i32) / samples as f64;
            let chunks = samples.div_ceil(CHUNK) as u64;
            Ok(Box::new((0..chunks).flat_map(move |c| {
                let mut rng = mc_rng(seed, n, c);
                let count = CHUNK.min(samples - c as usize * CHUNK);
                let marks = marks.clone();
                let region = region.clone();
                (0..count).map(move |_| {
                    let t: Vec<MarkedPoint> = (0..n).map(|_| sample_point(&marks, &region, &mut rng)).collect();
                    (t, w)
                })
            })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PositionSpace;
    use crate::potential::PairPotential;

    fn ideal(z: f64) -> ModelSpec {
        ModelSpec::new(PositionSpace::unit_interval(), MarkSpace::spins(), z, 1.0, PairPotential::zero()).unwrap()
    }

    fn unit() -> BoxUnion {
        SubBox::interval(0.0, 1.0).unwrap().into()
    }

    fn grid(m: usize) -> QuadratureScheme {
        QuadratureScheme::grid(m, PositionRule::Midpoint, MarkRule::ExactDiscreteSum)
    }

    #[test]
    fn one_point_nodes_spins() {
        let m = ideal(0.1);
        let nodes: Vec<_> = marked_point_nodes(&m, &SubBox::interval(0.0, 1.0).unwrap(), 1, &grid(4))
            .unwrap()
            .collect();
        assert_eq!(nodes.len(), 8);
        assert!(nodes.iter().all(|(_, w)| (*w - 0.125).abs() < 1e-15));
    }

    #[test]
    fn constant_integrand_gives_truncated_exponential() {
        let z = 0.7;
        let m = ideal(z);
        let est = lp_integral(&|_: &[MarkedPoint]| 1.0, &m, &unit(), 5, &grid(3)).unwrap();
        let exact: f64 = (0..=5).map(|n| z.powi(n) / factorial(n as usize)).sum();
        assert!((est.value - exact).abs() < 1e-13);
    }

    #[test]
    fn order_indicator() {
        let z = 0.3;
        let m = ideal(z);
        let f = |w: &[MarkedPoint]| if w.len() == 2 { 1.0 } else { 0.0 };
        let est = lp_integral(&f, &m, &unit(), 4, &grid(2)).unwrap();
        assert!((est.value - z * z / 2.0).abs() < 1e-15);
    }

    #[test]
    fn abs_difference_converges_to_third() {
        let m = ideal(1.0);
        let f = |w: &[MarkedPoint]| (w[0].position[0] - w[1].position[0]).abs();
        let e1 = integrate_order(&f, &m, &unit(), 2, &grid(20)).unwrap();
        let e2 = integrate_order(&f, &m, &unit(), 2, &grid(40)).unwrap();
        let third = 1.0 / 3.0;
        assert!((e2.value - third).abs() < (e1.value - third).abs());
        assert!((e2.value - third).abs() < 1e-3);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_close() {
        let m = ideal(1.0);
        let f = |w: &[MarkedPoint]| w[0].position[0] * w[0].position[0];
        let s = QuadratureScheme::monte_carlo(20_000, 7, MarkRule::ExactDiscreteSum);
        let a = integrate_order(&f, &m, &unit(), 1, &s).unwrap();
        let b = integrate_order(&f, &m, &unit(), 1, &s).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!((a.value - 1.0 / 3.0).abs() < 4.0 * a.error);
        let n1: Vec<_> = marked_point_nodes(&m, &SubBox::interval(0.0, 1.0).unwrap(), 2, &s).unwrap().take(5).collect();
        let n2: Vec<_> = marked_point_nodes(&m, &SubBox::interval(0.0, 1.0).unwrap(), 2, &s).unwrap().take(5).collect();
        assert_eq!(n1, n2);
    }

    #[test]
    fn scheme_mismatch() {
        let m = ideal(1.0);
        let s = QuadratureScheme::grid(4, PositionRule::Midpoint, MarkRule::Gauss { nodes: 4 });
        assert!(matches!(
            integrate_order(&|_: &[MarkedPoint]| 1.0, &m, &unit(), 1, &s),
            Err(Error::SchemeMismatch(_))
        ));
        assert!(matches!(
            integrate_order(&|_: &[MarkedPoint]| 1.0, &m, &unit(), 7, &grid(2)),
            Err(Error::SchemeMismatch(_))
        ));
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let m = ideal(1.0);
        let r = integrate_order(&|_: &[MarkedPoint]| f64::NAN, &m, &unit(), 1, &grid(2));
        assert!(matches!(r, Err(Error::NonFiniteIntegrand { order: 1 })));
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let m = ideal(1.0);
        let f = |w: &[MarkedPoint]| (w[0].position[0] * 3.1).sin() * (w[1].position[0] + 0.2).ln();
        let s = grid(120);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| integrate_order(&f, &m, &unit(), 2, &s).unwrap());
        let b = four.install(|| integrate_order(&f, &m, &unit(), 2, &s).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
