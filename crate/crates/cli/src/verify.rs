//! The invariant suite run by `verify` and by the acceptance tests.
//!
//! Every check draws its randomness from a ChaCha stream derived from the
//! suite seed and the check id, so results do not depend on which checks run
//! or in what order.

use std::collections::{BTreeMap, HashSet};

use markedgibbs::cluster::{
    absolute_series, boltzmann_functional, convergence_radius, correlation_truncated, log_partition_truncated, partition_direct_truncated,
    tree_bound_q_multi, tree_bound_q_points, tree_bound_recursive, ursell_direct, ursell_table, ursell_tree_bound,
    AnchorPolicy,
};
use markedgibbs::combinat::{enumerate_connected_graphs, enumerate_trees};
use markedgibbs::gibbsmc::{dlr_check, mcmc_run_chains, BoundaryCondition, RejectionSampler, SamplerConfig};
use markedgibbs::lpintegrate::{integrate_order, MarkRule, PositionRule, QuadratureScheme, SchemeKind};
use markedgibbs::potential::builtin;
use markedgibbs::scalar::{extended_real, factorial};
use markedgibbs::starcalc::{d_shift, star_exp, star_log, star_mul, ConfigFunctional};
use markedgibbs::{
    canonicalize, BoxUnion, ConfigFunctional64, FiniteConfiguration, Mark, MarkedPoint, ModelSpec, SubBox,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative tolerance of the exact-arithmetic identities.
pub const REL_TOL: f64 = 1e-10;
/// Absolute allowance for values computed from Boltzmann weights: those routes
/// subtract O(1) numbers, so results far below 1 carry O(ulp) absolute error.
pub const ABS_FLOOR: f64 = 1e-14;

pub const CRITERIA: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    /// The checked quantity: a worst error, a ratio, or a violation count.
    #[serde(with = "extended_real")]
    pub observed: f64,
    /// The bound `observed` must not exceed.
    #[serde(with = "extended_real")]
    pub allowed: f64,
    pub detail: String,
}

impl PropertyResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: observed {:.3e} allowed {:.3e}; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.observed,
            self.allowed,
            self.detail
        )
    }
}

/// `Full` runs every check at its stated size; `Quick` cuts instance and
/// sample counts tenfold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    #[default]
    Full,
    Quick,
}

impl Budget {
    fn count(self, full: usize) -> usize {
        match self {
            Budget::Full => full,
            Budget::Quick => (full / 10).max(1),
        }
    }
}

pub fn criterion_name(id: usize) -> &'static str {
    match id {
        1 => "Cayley count",
        2 => "connected-graph oracle",
        3 => "Ursell triangle",
        4 => "cluster decomposition",
        5 => "tree-graph bound",
        6 => "closed-form tree bound",
        7 => "integral tree bound",
        8 => "convergence certificate",
        9 => "partition-function cross-check",
        10 => "star-calculus identities",
        11 => "ideal gas end-to-end",
        12 => "three-route consistency",
        13 => "DLR and locality",
        _ => "unknown",
    }
}

pub fn run_criterion(id: usize, budget: Budget, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let outcome = match id {
        1 => cayley(),
        2 => connected_graphs(),
        3 => ursell_triangle(budget, &mut rng),
        4 => cluster_decomposition(budget, &mut rng),
        5 => tree_graph_bound(budget, &mut rng),
        6 => closed_form_tree_bound(budget, &mut rng),
        7 => integral_tree_bound(),
        8 => certificate(seed),
        9 => partition_cross_check(seed),
        10 => star_identities(budget, seed, &mut rng),
        11 => ideal_gas(budget, seed, &mut rng),
        12 => three_routes(budget, seed, &mut rng),
        13 => dlr(budget, seed),
        _ => Err(format!("no criterion {id}")),
    };
    let name = criterion_name(id).to_string();
    match outcome {
        Ok(c) => PropertyResult {
            id,
            name,
            passed: c.observed <= c.allowed,
            observed: c.observed,
            allowed: c.allowed,
            detail: c.detail,
        },
        Err(e) => PropertyResult {
            id,
            name,
            passed: false,
            observed: f64::NAN,
            allowed: 0.0,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_suite(budget: Budget, seed: u64) -> Vec<PropertyResult> {
    (1..=CRITERIA).map(|id| run_criterion(id, budget, seed)).collect()
}

struct Check {
    observed: f64,
    allowed: f64,
    detail: String,
}

type Outcome = std::result::Result<Check, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn toy_with(params: &[(&str, f64)]) -> std::result::Result<ModelSpec, String> {
    let o: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Ok(builtin("toy-repulsive-spin", &o).map_err(err)?.model)
}

fn unit() -> SubBox {
    SubBox::interval(0.0, 1.0).expect("valid interval")
}

fn gl(points_per_axis: usize) -> QuadratureScheme {
    QuadratureScheme::grid(points_per_axis, PositionRule::GaussLegendre, MarkRule::ExactDiscreteSum)
}

fn hybrid(points_per_axis: usize, max_nodes: usize, samples: usize, seed: u64) -> QuadratureScheme {
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

fn spin_point(x: f64, s: i32) -> MarkedPoint {
    MarkedPoint::new(vec![x], Mark::Label(s))
}

/// Spin configuration on `[0, 1)` with a uniform size in `lo..=hi`.
fn random_config(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> FiniteConfiguration {
    loop {
        let n = rng.random_range(lo..=hi);
        let pts = (0..n)
            .map(|_| spin_point(rng.random::<f64>(), if rng.random::<bool>() { 1 } else { -1 }))
            .collect();
        if let Ok(c) = canonicalize(pts) {
            return c;
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()) || (a - b).abs() <= ABS_FLOOR
}

fn connected_by_search(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn edge_key(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    e.sort_unstable();
    e
}

fn cayley() -> Outcome {
    let mut bad = Vec::new();
    for n in 2..=7usize {
        let trees: Vec<_> = enumerate_trees(n).map_err(err)?.collect();
        let expected = n.pow(n as u32 - 2);
        let distinct: HashSet<_> = trees.iter().map(|t| edge_key(t.edges())).collect();
        let valid = trees
            .iter()
            .all(|t| t.edges().len() == n - 1 && connected_by_search(n, t.edges()));
        let below = (expected as f64) < (n as f64).exp() * factorial(n);
        if trees.len() != expected || distinct.len() != expected || !valid || !below {
            bad.push(n);
        }
    }
    Ok(Check {
        observed: bad.len() as f64,
        allowed: 0.0,
        detail: if bad.is_empty() {
            "n^(n-2) distinct spanning trees for n = 2..7, all below e^n n!".into()
        } else {
            format!("mismatch at n = {bad:?}")
        },
    })
}

fn connected_graphs() -> Outcome {
    let expected = [1usize, 1, 4, 38, 728];
    let mut bad = Vec::new();
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let oracle: HashSet<Vec<(usize, usize)>> = (0u64..1 << pairs.len())
            .map(|mask| {
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect::<Vec<_>>()
            })
            .filter(|edges| connected_by_search(n, edges))
            .map(|edges| edge_key(&edges))
            .collect();
        let produced: Vec<_> = enumerate_connected_graphs(n).map_err(err)?.map(|g| edge_key(g.edges())).collect();
        let produced_set: HashSet<_> = produced.iter().cloned().collect();
        if produced.len() != expected[n - 1] || oracle.len() != expected[n - 1] || produced_set != oracle {
            bad.push(n);
        }
    }
    Ok(Check {
        observed: bad.len() as f64,
        allowed: 0.0,
        detail: if bad.is_empty() {
            "1, 1, 4, 38, 728 graphs, identical edge sets to the exhaustive filter".into()
        } else {
            format!("mismatch at n = {bad:?}")
        },
    })
}

fn ursell_triangle(budget: Budget, rng: &mut ChaCha8Rng) -> Outcome {
    let m = toy_with(&[])?;
    let trials = budget.count(500);
    let (mut violations, mut floored, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..trials {
        let c = random_config(rng, 1, 5);
        let direct = ursell_direct(&c, &m).map_err(err)?;
        let table = ursell_table(&c, &m).map_err(err)?.full();
        let rho: ConfigFunctional64 = boltzmann_functional(c.points(), &m).map_err(err)?;
        let l = star_log(&rho).map_err(err)?;
        let log_route = l.get(l.full_mask());
        for (a, b) in [(direct, table), (direct, log_route), (table, log_route)] {
            if !agree(a, b) {
                violations += 1;
            } else if rel(a, b) > REL_TOL {
                floored += 1;
            } else {
                worst = worst.max(rel(a, b));
            }
        }
    }
    Ok(Check {
        observed: violations as f64,
        allowed: 0.0,
        detail: format!(
            "{trials} configurations n <= 5; worst relative error {worst:.2e} among pairs within 1e-10 relative; \
             {floored} pairs with |k| << 1 agree only to the {ABS_FLOOR:e} absolute floor"
        ),
    })
}

fn cluster_decomposition(budget: Budget, rng: &mut ChaCha8Rng) -> Outcome {
    let m = toy_with(&[])?;
    let trials = budget.count(500);
    let (mut violations, mut floored, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..trials {
        let c = random_config(rng, 1, 8);
        let k = ursell_table(&c, &m).map_err(err)?;
        let back = star_exp(k.functional()).map_err(err)?;
        let rho: ConfigFunctional64 = boltzmann_functional(c.points(), &m).map_err(err)?;
        for s in 0..1u32 << c.len() {
            let (a, b) = (back.get(s), rho.get(s));
            if !agree(a, b) {
                violations += 1;
            } else if rel(a, b) > REL_TOL {
                floored += 1;
            } else {
                worst = worst.max(rel(a, b));
            }
        }
    }
    Ok(Check {
        observed: violations as f64,
        allowed: 0.0,
        detail: format!(
            "{trials} configurations n <= 8, every subset; worst relative error {worst:.2e}; \
             {floored} entries needed the {ABS_FLOOR:e} absolute floor"
        ),
    })
}

fn tree_graph_bound(budget: Budget, rng: &mut ChaCha8Rng) -> Outcome {
    let m = toy_with(&[])?;
    let trials = budget.count(1000);
    let (mut violations, mut float_ties, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..trials {
        let c = random_config(rng, 1, 6);
        let k = ursell_table(&c, &m).map_err(err)?.full().abs();
        let q = ursell_tree_bound(c.points(), &m);
        if k > q * (1.0 + 1e-12) + ABS_FLOOR {
            violations += 1;
        } else if k > q {
            float_ties += 1;
        }
        if q > 0.0 {
            worst = worst.max(k / q);
        }
    }
    Ok(Check {
        observed: violations as f64,
        allowed: 0.0,
        detail: format!(
            "{trials} configurations n <= 6; largest |k| / bound {worst:.6}; \
             {float_ties} two-point ties (bound is an equality there) exceed it by rounding only"
        ),
    })
}

fn closed_form_tree_bound(budget: Budget, rng: &mut ChaCha8Rng) -> Outcome {
    let base = toy_with(&[])?;
    let trials = budget.count(200);
    let (mut worst_closed, mut worst_policy) = (0.0f64, 0.0f64);
    for t in 0..trials {
        let b = if t % 2 == 0 { 0.0 } else { 0.25 };
        let m = base.with_potential(base.potential.as_ref().clone().with_stability_b(b).map_err(err)?);
        let c = random_config(rng, 2, 7);
        let n = c.len();
        let mask = rng.random_range(1u64..(1 << n));
        let full = (1u64 << n) - 1;
        let (omega, zeta) = (c.subset(mask), c.subset(!mask & full));
        let closed = tree_bound_q_multi(&omega, &zeta, &m).map_err(err)?;
        let first = tree_bound_recursive(&omega, &zeta, &m, AnchorPolicy::First).map_err(err)?;
        let last = tree_bound_recursive(&omega, &zeta, &m, AnchorPolicy::Last).map_err(err)?;
        let witness = tree_bound_recursive(&omega, &zeta, &m, AnchorPolicy::StabilityWitness).map_err(err)?;
        worst_closed = worst_closed.max(rel(first, closed)).max(rel(witness, closed));
        worst_policy = worst_policy.max(rel(first, last)).max(rel(first, witness));
    }
    Ok(Check {
        observed: (worst_closed / REL_TOL).max(worst_policy / 1e-12),
        allowed: 1.0,
        detail: format!(
            "{trials} instances |omega| + |zeta| <= 7, B in {{0, 0.25}}; recursion vs closed form {worst_closed:.2e} \
             (tolerance 1e-10), first/last/witness anchors {worst_policy:.2e} (tolerance 1e-12); \
             observed is the larger error in units of its tolerance"
        ),
    })
}

fn integral_tree_bound() -> Outcome {
    let m = toy_with(&[])?;
    let cert = convergence_radius(&m, 64).map_err(err)?;
    let c = cert.c_beta;
    let growth = m.stability_factor();
    let region = BoxUnion::from(unit());
    let anchors = [spin_point(0.0, 1), spin_point(0.5, 1), spin_point(0.5, -1), spin_point(0.93, -1)];
    let grids = [64usize, 32, 16, 10];
    let (mut violations, mut worst, mut worst_higher) = (0usize, 0.0f64, 0.0f64);
    for x in &anchors {
        let edge = |y: &[MarkedPoint]| m.mayer(x, &y[0]).abs();
        let one = integrate_order(&edge, &m, &region, 1, &gl(256)).map_err(err)?;
        for (i, &ppa) in grids.iter().enumerate() {
            let n = i + 1;
            let q = |ys: &[MarkedPoint]| tree_bound_q_points::<f64>(x, ys, &m);
            let lhs = integrate_order(&q, &m, &region, n, &gl(ppa)).map_err(err)?;
            let rhs = growth.powi(n as i32 + 1) * c.powi(n as i32 - 1) * ((n + 1) as f64).powi(n as i32 - 1) * one.value;
            let rhs_err = rhs / one.value.max(f64::MIN_POSITIVE) * one.error;
            let allowed = rhs + rhs_err + lhs.error;
            if lhs.value > allowed {
                violations += 1;
            }
            worst = worst.max(lhs.value / allowed);
            if n > 1 {
                worst_higher = worst_higher.max(lhs.value / rhs);
            }
        }
    }
    Ok(Check {
        observed: violations as f64,
        allowed: 0.0,
        detail: format!(
            "4 anchors x n = 1..4, C = {c:.6}; largest LHS / (RHS + quadrature budget) {worst:.4} \
             (n = 1 is an identity); largest LHS / RHS for n >= 2 {worst_higher:.4}"
        ),
    })
}

fn certificate(seed: u64) -> Outcome {
    let m = toy_with(&[])?;
    let cert0 = convergence_radius(&m, 64).map_err(err)?;
    if !(cert0.z_star > 0.0 && cert0.z_star.is_finite()) {
        return Err(format!("z_star = {}", cert0.z_star));
    }
    let mz = m.with_activity(0.5 * cert0.z_star);
    let cert = convergence_radius(&mz, 64).map_err(err)?;
    let series = absolute_series(&mz, &unit(), 5, &hybrid(16, 2_000_000, 200_000, seed), &cert).map_err(err)?;
    let partial = series.partial_sums();
    let majorant = series.majorant_partial_sums();
    let mut observed = 0.0f64;
    let mut err_sum = 0.0;
    for n in 0..series.terms.len() {
        err_sum += series.errors[n];
        observed = observed
            .max((series.terms[n] + series.errors[n]) / series.majorant[n])
            .max((partial[n] + err_sum) / majorant[n]);
        if n > 0 && partial[n] < partial[n - 1] {
            return Err("partial sums decrease".into());
        }
    }
    Ok(Check {
        observed,
        allowed: 1.0,
        detail: format!(
            "C = {:.6}, z_star = {:.6}, z = z_star / 2 (q = {:.3}); terms {:?} vs majorant {:?}; \
             observed is the largest (term + error) / majorant over terms and partial sums, N = 5",
            cert.c_beta,
            cert0.z_star,
            cert.q,
            series.terms.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>(),
            series.majorant.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>(),
        ),
    })
}

fn partition_cross_check(seed: u64) -> Outcome {
    let m = toy_with(&[("z", 0.05)])?;
    let cert = convergence_radius(&m, 64).map_err(err)?;
    let scheme = hybrid(24, 2_000_000, 200_000, seed);
    let series = log_partition_truncated(&m, &unit(), 4, &scheme, &cert).map_err(err)?;
    let direct =
        partition_direct_truncated(&m, &unit(), &FiniteConfiguration::empty(), 8, &scheme).map_err(err)?;
    // the direct integrand is at most e^{beta B n}, so the rest of its series is bounded by the Poisson tail
    let mass = m.activity * m.stability_factor().sqrt() * m.sigma_tau(&unit());
    let direct_tail = mass.powi(9) / factorial(9) * mass.exp();
    let budget = series.tail_bound + series.integration_error + (direct.error + direct_tail) / direct.value;
    let diff = (series.log_z - direct.value.ln()).abs();
    Ok(Check {
        observed: (diff / budget).max(budget / 1e-3),
        allowed: 1.0,
        detail: format!(
            "log Z series (N = 4) {:.12} vs log direct (N = 8) {:.12}; |diff| {diff:.2e}; budget {budget:.2e} \
             (tail {:.2e}, series quadrature {:.2e}); observed is max(|diff| / budget, budget / 1e-3)",
            series.log_z,
            direct.value.ln(),
            series.tail_bound,
            series.integration_error,
        ),
    })
}

// ----- star calculus -----

fn random_functional(rng: &mut ChaCha8Rng, n: usize, scale: f64, empty: f64) -> ConfigFunctional64 {
    let mut v: Vec<f64> = (0..1usize << n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    v[0] = empty;
    ConfigFunctional::new(n, v).expect("valid ground")
}

fn singleton_weight(p: &MarkedPoint) -> f64 {
    0.8 + 0.3 * (2.0 * std::f64::consts::PI * p.position[0]).cos() * p.mark.value()
}

fn pair_weight(a: &MarkedPoint, b: &MarkedPoint) -> f64 {
    let d = (a.position[0] - b.position[0]) / 0.3;
    -0.5 * (-d * d).exp() * (1.0 + 0.2 * a.mark.value() * b.mark.value())
}

/// Bound on the singleton weight; the pair weight is below its square.
const SINGLETON_MAX: f64 = 1.1;

/// The functional supported on singletons and pairs, on a tuple.
fn pair_functional(pts: &[MarkedPoint]) -> ConfigFunctional64 {
    let n = pts.len();
    ConfigFunctional::from_fn(n, |mask| match mask.count_ones() {
        1 => singleton_weight(&pts[mask.trailing_zeros() as usize]),
        2 => {
            let i = mask.trailing_zeros() as usize;
            let j = 31 - mask.leading_zeros() as usize;
            pair_weight(&pts[i], &pts[j])
        }
        _ => 0.0,
    })
    .expect("small ground")
}

/// Number of partitions of an `n`-set into blocks of size one and two.
fn involutions(n: usize) -> f64 {
    let (mut a, mut b) = (1.0f64, 1.0f64);
    for k in 2..=n {
        let c = b + (k - 1) as f64 * a;
        a = b;
        b = c;
    }
    if n == 0 {
        1.0
    } else {
        b
    }
}

/// `sum_{n > max_order} z^n / n! vol^n T(n + fixed) M^{n + fixed}`, bounding the
/// discarded orders of the exponential integrals.
fn pair_series_tail(z: f64, vol: f64, fixed: usize, max_order: usize) -> f64 {
    (max_order + 1..max_order + 80)
        .map(|n| {
            (z * vol).powi(n as i32) / factorial(n) * involutions(n + fixed) * SINGLETON_MAX.powi((n + fixed) as i32)
        })
        .sum()
}

struct McSeries {
    value: f64,
    se: f64,
}

/// `sum_{n=0}^{N} z^n/n! int_{region^n} exp*(psi)(fixed u y)` by Monte Carlo.
fn mc_exp_integral(
    model: &ModelSpec,
    region: &BoxUnion,
    fixed: &[MarkedPoint],
    max_order: usize,
    samples: usize,
    seed: u64,
) -> std::result::Result<McSeries, String> {
    let f = |ys: &[MarkedPoint]| {
        let pts: Vec<MarkedPoint> = fixed.iter().chain(ys).cloned().collect();
        let e = star_exp(&pair_functional(&pts)).expect("small ground");
        e.get(e.full_mask())
    };
    let mut value = f(&[]);
    let mut var = 0.0;
    for n in 1..=max_order {
        let scheme = QuadratureScheme::monte_carlo(samples, seed.wrapping_add(n as u64), MarkRule::ExactDiscreteSum);
        let est = integrate_order(&f, model, region, n, &scheme).map_err(err)?;
        let pref = model.activity.powi(n as i32) / factorial(n);
        value += pref * est.value;
        var += (pref * est.error).powi(2);
    }
    Ok(McSeries { value, se: var.sqrt() })
}

/// `int psi dnu = z int g + z^2/2 int int h` over `region` by Gauss-Legendre.
fn pair_integral(model: &ModelSpec, region: &BoxUnion) -> std::result::Result<(f64, f64), String> {
    let g = integrate_order(&|y: &[MarkedPoint]| singleton_weight(&y[0]), model, region, 1, &gl(64)).map_err(err)?;
    let h = integrate_order(&|y: &[MarkedPoint]| pair_weight(&y[0], &y[1]), model, region, 2, &gl(64)).map_err(err)?;
    let z = model.activity;
    Ok((z * g.value + z * z / 2.0 * h.value, z * g.error + z * z / 2.0 * h.error))
}

fn star_identities(budget: Budget, seed: u64, rng: &mut ChaCha8Rng) -> Outcome {
    let mut notes = Vec::new();
    let mut failures = 0usize;

    let mut worst_trip = 0.0f64;
    for _ in 0..budget.count(200) {
        let n = rng.random_range(1..=8);
        let psi = random_functional(rng, n, 0.5, 0.0);
        let back = star_log(&star_exp(&psi).map_err(err)?).map_err(err)?;
        let f = random_functional(rng, n, 0.5, 1.0);
        let again = star_exp(&star_log(&f).map_err(err)?).map_err(err)?;
        for s in 0..1u32 << n {
            worst_trip = worst_trip
                .max((back.get(s) - psi.get(s)).abs() / psi.get(s).abs().max(1.0))
                .max((again.get(s) - f.get(s)).abs() / f.get(s).abs().max(1.0));
        }
    }
    if worst_trip > REL_TOL {
        failures += 1;
    }
    notes.push(format!("round trips {worst_trip:.1e} (1e-10)"));

    let mut worst_rule = 0.0f64;
    for _ in 0..budget.count(200) {
        let n = rng.random_range(2..=6);
        let (ea, eb) = (2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0);
        let a = random_functional(rng, n, 1.0, ea);
        let b = random_functional(rng, n, 1.0, eb);
        let psi = random_functional(rng, n, 1.0, 0.0);
        let x = 1u32 << rng.random_range(0..n);
        let lhs = d_shift(&star_mul(&a, &b).map_err(err)?, x);
        let rhs = &star_mul(&d_shift(&a, x), &b).map_err(err)? + &star_mul(&a, &d_shift(&b, x)).map_err(err)?;
        let e = star_exp(&psi).map_err(err)?;
        let lhs_e = d_shift(&e, x);
        let rhs_e = star_mul(&e, &d_shift(&psi, x)).map_err(err)?;
        for w in (0..1u32 << n).filter(|w| w & x == 0) {
            worst_rule = worst_rule
                .max((lhs.get(w) - rhs.get(w)).abs())
                .max((lhs_e.get(w) - rhs_e.get(w)).abs());
        }
    }
    if worst_rule > 1e-12 {
        failures += 1;
    }
    notes.push(format!("Leibniz/exponential rules {worst_rule:.1e} (1e-12)"));

    let samples = budget.count(100_000);
    let max_order = 8;
    let ideal = builtin("ideal-gas", &BTreeMap::from([("z".to_string(), 0.3)])).map_err(err)?.model;
    let whole = BoxUnion::from(unit());

    let lhs = mc_exp_integral(&ideal, &whole, &[], max_order, samples, seed)?;
    let (log_rhs, log_rhs_err) = pair_integral(&ideal, &whole)?;
    let rhs = log_rhs.exp();
    let tail = pair_series_tail(0.3, 1.0, 0, max_order);
    let tol = 3.0 * lhs.se + tail + rhs * log_rhs_err;
    let gap_cor = (lhs.value - rhs).abs();
    if gap_cor > tol {
        failures += 1;
    }
    notes.push(format!(
        "exp integral {:.6} vs {:.6}, |diff| {gap_cor:.1e} <= {tol:.1e} (3 SE + tail {tail:.0e})",
        lhs.value, rhs
    ));

    let inner = SubBox::interval(0.3, 0.6).map_err(err)?;
    let exterior = unit().difference(&inner);
    let fixed = [spin_point(0.4, 1), spin_point(0.5, -1)];
    let lhs = mc_exp_integral(&ideal, &exterior, &fixed, max_order, samples, seed ^ 0xA5A5)?;
    let (log_ext, log_ext_err) = pair_integral(&ideal, &exterior)?;
    let z = ideal.activity;
    let mut dressed = [0.0; 2];
    let mut dressed_err = [0.0; 2];
    for (k, a) in fixed.iter().enumerate() {
        let h = integrate_order(&|y: &[MarkedPoint]| pair_weight(a, &y[0]), &ideal, &exterior, 1, &gl(64)).map_err(err)?;
        dressed[k] = singleton_weight(a) + z * h.value;
        dressed_err[k] = z * h.error;
    }
    let rhs = log_ext.exp() * (dressed[0] * dressed[1] + pair_weight(&fixed[0], &fixed[1]));
    let rhs_err = rhs.abs() * log_ext_err
        + log_ext.exp() * (dressed[1].abs() * dressed_err[0] + dressed[0].abs() * dressed_err[1]);
    let tail = pair_series_tail(z, ideal.sigma_tau(&exterior), 2, max_order);
    let tol = 3.0 * lhs.se + tail + rhs_err;
    let gap_lemma = (lhs.value - rhs).abs();
    if gap_lemma > tol {
        failures += 1;
    }
    notes.push(format!(
        "restriction {:.6} vs {:.6}, |diff| {gap_lemma:.1e} <= {tol:.1e}",
        lhs.value, rhs
    ));

    Ok(Check {
        observed: failures as f64,
        allowed: 0.0,
        detail: notes.join("; "),
    })
}

// ----- samplers -----

/// `|a - b| <= 3 sqrt(se_a^2 + se_b^2)`, returning the gap in combined standard errors.
fn sigmas(a: (f64, f64), b: (f64, f64)) -> f64 {
    let se = a.1.hypot(b.1);
    if se == 0.0 {
        if a.0 == b.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.0 - b.0).abs() / se
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn rejection_counts(
    model: &ModelSpec,
    region: &SubBox,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<f64>, String> {
    let sampler = RejectionSampler::new(model, region, &BoundaryCondition::empty()).map_err(err)?;
    let mut counts = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (c, _) = sampler.sample(rng);
        if has_coincident_positions(&c) {
            return Err("sampled configuration with coincident positions".into());
        }
        counts.push(c.len() as f64);
    }
    Ok(counts)
}

fn has_coincident_positions(c: &FiniteConfiguration) -> bool {
    c.points().windows(2).any(|w| w[0].position == w[1].position)
}

fn chain_config(seed: u64, sweeps: u64) -> SamplerConfig {
    SamplerConfig {
        seed,
        sweeps,
        burn_in: 2_000,
        ..SamplerConfig::default()
    }
}

fn ideal_gas(budget: Budget, seed: u64, rng: &mut ChaCha8Rng) -> Outcome {
    let z = 2.0;
    let ideal = builtin("ideal-gas", &BTreeMap::from([("z".to_string(), z)])).map_err(err)?.model;
    let mut exact_failures = Vec::new();

    for _ in 0..budget.count(100) {
        let c = random_config(rng, 1, 8);
        let k = ursell_table(&c, &ideal).map_err(err)?;
        if (0..1u32 << c.len()).any(|s| k.get(s) != if s.count_ones() == 1 { 1.0 } else { 0.0 }) {
            exact_failures.push("k beyond singletons");
            break;
        }
    }
    let cert = convergence_radius(&ideal, 16).map_err(err)?;
    let one = log_partition_truncated(&ideal, &unit(), 1, &gl(8), &cert).map_err(err)?;
    if one.log_z != z * ideal.sigma_tau(&unit()) {
        exact_failures.push("log Z at N = 1");
    }
    let four = log_partition_truncated(&ideal, &unit(), 4, &gl(8), &cert).map_err(err)?;
    if four.coefficients[1..].iter().any(|c| *c != 0.0) {
        exact_failures.push("higher log Z coefficients");
    }
    for pts in [
        vec![(0.3, 1)],
        vec![(0.2, -1), (0.7, 1)],
        vec![(0.1, 1), (0.5, 1), (0.9, -1)],
    ] {
        let c = canonicalize(pts.iter().map(|&(x, s)| spin_point(x, s)).collect()).map_err(err)?;
        let rho = correlation_truncated(&c, &ideal, &unit(), 3, &gl(8)).map_err(err)?;
        if rho.value != 1.0 {
            exact_failures.push("correlation collapse");
        }
    }

    let draws = budget.count(100_000);
    let counts = rejection_counts(&ideal, &unit(), draws, rng)?;
    let mean = mean_se(&counts);
    let dispersion_sigma = {
        let var = counts.iter().map(|c| (c - mean.0).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        (var - z).abs() / ((z + 2.0 * z * z) / draws as f64).sqrt()
    };
    let empty = counts.iter().filter(|c| **c == 0.0).count() as f64 / draws as f64;
    let p0 = (-z).exp();
    let empty_sigma = (empty - p0).abs() / (p0 * (1.0 - p0) / draws as f64).sqrt();
    let chain = mcmc_run_chains(&ideal, &unit(), &BoundaryCondition::empty(), &chain_config(seed, draws as u64 / 4), 4)
        .map_err(err)?;
    let chain_sigma = sigmas(chain.density(), (z, 0.0));
    let mean_sigma = sigmas(mean, (z, 0.0));
    let worst = mean_sigma.max(dispersion_sigma).max(empty_sigma).max(chain_sigma);

    Ok(Check {
        observed: if exact_failures.is_empty() { worst } else { f64::INFINITY },
        allowed: 3.0,
        detail: format!(
            "exact checks {}; z = {z}: rejection mean {:.4} ({mean_sigma:.2} sigma), variance ({dispersion_sigma:.2} sigma), \
             P(empty) {empty:.4} ({empty_sigma:.2} sigma), MCMC density {:.4} ({chain_sigma:.2} sigma); observed is the worst sigma",
            if exact_failures.is_empty() { "hold".to_string() } else { format!("failed: {exact_failures:?}") },
            mean.0,
            chain.density().0
        ),
    })
}

fn three_routes(budget: Budget, seed: u64, rng: &mut ChaCha8Rng) -> Outcome {
    let z = 0.05;
    let m = toy_with(&[("z", z)])?;
    let cert = convergence_radius(&m, 64).map_err(err)?;
    let order = 3;

    // (a) expansion: mean density z int sum_s tau(s) rho(x, s) dx over the box
    let density_at = |nodes: usize| -> std::result::Result<(f64, f64), String> {
        let mut acc = 0.0;
        let mut acc_err = 0.0;
        let (xs, ws) = markedgibbs::lpintegrate::gauss_legendre(nodes);
        for (x, w) in xs.iter().zip(&ws) {
            for s in [1, -1] {
                let c = canonicalize(vec![spin_point(0.5 + 0.5 * x, s)]).map_err(err)?;
                let rho = correlation_truncated(&c, &m, &unit(), order, &gl(16)).map_err(err)?;
                acc += 0.5 * w * 0.5 * rho.value;
                acc_err += 0.5 * w * 0.5 * rho.error;
            }
        }
        Ok((z * acc, z * acc_err))
    };
    let (fine, fine_err) = density_at(16)?;
    let (coarse, _) = density_at(8)?;
    // discarded orders of rho, times the activity that turns rho into a density
    let tail = z * cert.correlation_tail_bound(1, order);
    let expansion = (fine, fine_err + (fine - coarse).abs() + tail);

    // (b) exact rejection draws
    let draws = budget.count(100_000);
    let counts = rejection_counts(&m, &unit(), draws, rng)?;
    let rejection = mean_se(&counts);

    // (c) Metropolis-Hastings
    let chains = 4u64;
    let chain =
        mcmc_run_chains(&m, &unit(), &BoundaryCondition::empty(), &chain_config(seed, draws as u64 / chains), chains)
            .map_err(err)?;
    let mcmc = chain.density();

    let ab = sigmas(expansion, rejection);
    let ac = sigmas(expansion, mcmc);
    let bc = sigmas(rejection, mcmc);
    Ok(Check {
        observed: ab.max(ac).max(bc),
        allowed: 3.0,
        detail: format!(
            "mean one-point density on [0, 1], z = {z}: expansion {:.6} +- {:.1e}, rejection {:.6} +- {:.1e}, \
             MCMC {:.6} +- {:.1e} (tau {:.2}); pairwise {ab:.2}, {ac:.2}, {bc:.2} combined SE",
            expansion.0,
            expansion.1,
            rejection.0,
            rejection.1,
            mcmc.0,
            mcmc.1,
            chain.tau_int()
        ),
    })
}

fn dlr(budget: Budget, seed: u64) -> Outcome {
    let m = toy_with(&[("z", 1.5), ("cutoff", 0.15)])?;
    let inner = SubBox::interval(0.4, 0.6).map_err(err)?;
    let report = dlr_check(
        &m,
        &inner,
        &unit(),
        |c| c.within(&inner).len() as f64,
        budget.count(100_000),
        seed,
        budget.count(1000),
    )
    .map_err(err)?;
    let sig = if report.difference_se > 0.0 {
        report.difference.abs() / report.difference_se
    } else if report.difference == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Check {
        observed: if report.locality.violations == 0 { sig } else { f64::INFINITY },
        allowed: 3.0,
        detail: format!(
            "range 0.15, z = 1.5, F = points in [0.4, 0.6): direct {:.5} resampled {:.5}, paired difference \
             {:.2e} +- {:.1e} ({sig:.2} sigma); locality {} / {} trials changed a bit",
            report.direct_mean,
            report.resampled_mean,
            report.difference,
            report.difference_se,
            report.locality.violations,
            report.locality.trials
        ),
    })
}
