//! Positions, marks, finite marked configurations and model specifications.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PairPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Free,
    Periodic,
}

/// Rectangular box `[0, L_1) x ... x [0, L_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSpace {
    side_lengths: Vec<f64>,
    boundary: Boundary,
}

impl PositionSpace {
    pub fn new(side_lengths: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if side_lengths.is_empty() {
            return Err(Error::InvalidModel("position space needs dimension >= 1".into()));
        }
        if side_lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "side lengths must be positive and finite: {side_lengths:?}"
            )));
        }
        Ok(Self {
            side_lengths,
            boundary,
        })
    }

    pub fn unit_interval() -> Self {
        Self {
            side_lengths: vec![1.0],
            boundary: Boundary::Free,
        }
    }

    pub fn dimension(&self) -> usize {
        self.side_lengths.len()
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    pub fn full_box(&self) -> SubBox {
        SubBox {
            lower: vec![0.0; self.dimension()],
            upper: self.side_lengths.clone(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(&self.side_lengths)
                .all(|(&xi, &l)| (0.0..l).contains(&xi))
    }

    /// Euclidean distance, minimum image under periodic boundary.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&ai, &bi), &l) in a.iter().zip(b).zip(&self.side_lengths) {
            let mut d = (ai - bi).abs();
            if self.boundary == Boundary::Periodic && d > 0.5 * l {
                d = l - d;
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// Smallest distance from `x` to any point of `region`.
    pub fn distance_to_box(&self, x: &[f64], region: &SubBox) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dimension() {
            let (lo, hi) = (region.lower[i], region.upper[i]);
            let mut d = if x[i] < lo {
                lo - x[i]
            } else if x[i] > hi {
                x[i] - hi
            } else {
                0.0
            };
            if self.boundary == Boundary::Periodic && d > 0.0 {
                let l = self.side_lengths[i];
                // distance to the periodic images of the slab
                let wrapped = if x[i] < lo { x[i] + l - hi } else { lo + l - x[i] };
                d = d.min(wrapped.max(0.0));
            }
            s += d * d;
        }
        s.sqrt()
    }

    pub fn contains_box(&self, region: &SubBox) -> bool {
        region.dimension() == self.dimension()
            && region
                .lower
                .iter()
                .zip(&region.upper)
                .zip(&self.side_lengths)
                .all(|((&lo, &hi), &l)| lo >= 0.0 && hi <= l)
    }
}

/// Anything points can be tested against.
pub trait Region {
    fn contains(&self, x: &[f64]) -> bool;
    fn volume(&self) -> f64;
}

/// Half-open axis-aligned box `[lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SubBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidModel("box corners must have equal, nonzero dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidModel(format!("degenerate box {lower:?}..{upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains_box(&self, other: &SubBox) -> bool {
        other
            .lower
            .iter()
            .zip(&self.lower)
            .all(|(o, s)| o >= s)
            && other.upper.iter().zip(&self.upper).all(|(o, s)| o <= s)
    }

    /// Box grown by `r` on every side.
    pub fn enlarged(&self, r: f64) -> SubBox {
        SubBox {
            lower: self.lower.iter().map(|x| x - r).collect(),
            upper: self.upper.iter().map(|x| x + r).collect(),
        }
    }

    pub fn intersection(&self, other: &SubBox) -> Option<SubBox> {
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).map(|(a, b)| a.min(*b)).collect();
        SubBox::new(lower, upper).ok()
    }

    /// `self \ inner` as disjoint boxes (slab decomposition, at most `2d` pieces).
    pub fn difference(&self, inner: &SubBox) -> BoxUnion {
        let Some(cut) = self.intersection(inner) else {
            return BoxUnion::from(self.clone());
        };
        let mut pieces = Vec::new();
        let mut rest = self.clone();
        for axis in 0..self.dimension() {
            if rest.lower[axis] < cut.lower[axis] {
                let mut piece = rest.clone();
                piece.upper[axis] = cut.lower[axis];
                pieces.push(piece);
                rest.lower[axis] = cut.lower[axis];
            }
            if cut.upper[axis] < rest.upper[axis] {
                let mut piece = rest.clone();
                piece.lower[axis] = cut.upper[axis];
                pieces.push(piece);
                rest.upper[axis] = cut.upper[axis];
            }
        }
        BoxUnion { boxes: pieces }
    }
}

impl Region for SubBox {
    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&lo, &hi))| lo <= xi && xi < hi)
    }

    fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }
}

impl fmt::Display for SubBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}..{:?}", self.lower, self.upper)
    }
}

/// Disjoint union of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxUnion {
    boxes: Vec<SubBox>,
}

impl BoxUnion {
    /// Caller guarantees the boxes are pairwise disjoint.
    pub fn new(boxes: Vec<SubBox>) -> Self {
        Self { boxes }
    }

    pub fn boxes(&self) -> &[SubBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

impl From<SubBox> for BoxUnion {
    fn from(b: SubBox) -> Self {
        Self { boxes: vec![b] }
    }
}

impl Region for BoxUnion {
    fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    fn volume(&self) -> f64 {
        self.boxes.iter().map(|b| b.volume()).sum()
    }
}

/// The mark carried by a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Label(i32),
    Angle(f64),
    Real(f64),
}

impl Mark {
    /// Numeric value used by spin-like couplings.
    pub fn value(&self) -> f64 {
        match *self {
            Mark::Label(l) => l as f64,
            Mark::Angle(a) | Mark::Real(a) => a,
        }
    }

    fn total_cmp(&self, other: &Mark) -> Ordering {
        let rank = |m: &Mark| match m {
            Mark::Label(_) => 0,
            Mark::Angle(_) => 1,
            Mark::Real(_) => 2,
        };
        rank(self)
            .cmp(&rank(other))
            .then_with(|| self.value().total_cmp(&other.value()))
    }
}

/// Density of a real-valued mark distribution on `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalDensity {
    /// Constant density, total mass `mass`.
    Uniform { mass: f64 },
    /// Piecewise constant on equal-width cells.
    Histogram { heights: Vec<f64> },
}

/// Mark space `S` with its finite measure `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkSpace {
    Discrete { labels: Vec<i32>, weights: Vec<f64> },
    /// Uniform on `[0, 2pi)` with total mass `mass`.
    Circle { mass: f64 },
    Interval {
        lower: f64,
        upper: f64,
        density: IntervalDensity,
    },
}

impl MarkSpace {
    pub fn spins() -> Self {
        MarkSpace::Discrete {
            labels: vec![1, -1],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        match self {
            MarkSpace::Discrete { labels, weights } => {
                if labels.is_empty() || labels.len() != weights.len() {
                    return bad("discrete marks need one weight per label".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("mark weights must be nonnegative".into());
                }
                let mut sorted = labels.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != labels.len() {
                    return bad("duplicate mark labels".into());
                }
            }
            MarkSpace::Circle { mass } => {
                if !(mass.is_finite() && *mass > 0.0) {
                    return bad("circle mass must be positive".into());
                }
            }
            MarkSpace::Interval {
                lower,
                upper,
                density,
            } => {
                if !(lower < upper) {
                    return bad("mark interval is empty".into());
                }
                match density {
                    IntervalDensity::Uniform { mass } if !(mass.is_finite() && *mass > 0.0) => {
                        return bad("interval mass must be positive".into());
                    }
                    IntervalDensity::Histogram { heights }
                        if heights.is_empty() || heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) =>
                    {
                        return bad("histogram heights must be nonnegative".into());
                    }
                    _ => {}
                }
            }
        }
        if !(self.total_mass() > 0.0) {
            return bad("tau(S) must be positive".into());
        }
        Ok(())
    }

    /// `tau(S)`.
    pub fn total_mass(&self) -> f64 {
        match self {
            MarkSpace::Discrete { weights, .. } => weights.iter().sum(),
            MarkSpace::Circle { mass } => *mass,
            MarkSpace::Interval {
                lower,
                upper,
                density,
            } => match density {
                IntervalDensity::Uniform { mass } => *mass,
                IntervalDensity::Histogram { heights } => {
                    let w = (upper - lower) / heights.len() as f64;
                    heights.iter().sum::<f64>() * w
                }
            },
        }
    }

    /// `tau(x, S)`; all built-in kernels ignore the position.
    pub fn total_mass_at(&self, _position: &[f64]) -> f64 {
        self.total_mass()
    }

    /// Density of `tau` at `mark`: w.r.t. counting measure for discrete
    /// marks, Lebesgue measure otherwise.
    pub fn density(&self, mark: &Mark) -> f64 {
        match (self, mark) {
            (MarkSpace::Discrete { labels, weights }, Mark::Label(l)) => labels
                .iter()
                .position(|x| x == l)
                .map_or(0.0, |i| weights[i]),
            (MarkSpace::Circle { mass }, Mark::Angle(a)) if (0.0..TAU).contains(a) => mass / TAU,
            (
                MarkSpace::Interval {
                    lower,
                    upper,
                    density,
                },
                Mark::Real(s),
            ) if (*lower..=*upper).contains(s) => match density {
                IntervalDensity::Uniform { mass } => mass / (upper - lower),
                IntervalDensity::Histogram { heights } => {
                    let w = (upper - lower) / heights.len() as f64;
                    let i = (((s - lower) / w) as usize).min(heights.len() - 1);
                    heights[i]
                }
            },
            _ => 0.0,
        }
    }

    pub fn contains(&self, mark: &Mark) -> bool {
        match (self, mark) {
            (MarkSpace::Discrete { labels, .. }, Mark::Label(l)) => labels.contains(l),
            (MarkSpace::Circle { .. }, Mark::Angle(a)) => (0.0..TAU).contains(a),
            (MarkSpace::Interval { lower, upper, .. }, Mark::Real(s)) => (*lower..=*upper).contains(s),
            _ => false,
        }
    }

    /// Draw from the normalized kernel `tau / tau(S)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mark {
        match self {
            MarkSpace::Discrete { labels, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (l, w) in labels.iter().zip(weights) {
                    if u < *w {
                        return Mark::Label(*l);
                    }
                    u -= w;
                }
                // rounding left u slightly above the last cumulative weight
                let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
                Mark::Label(labels[last])
            }
            MarkSpace::Circle { .. } => Mark::Angle(rng.random::<f64>() * TAU),
            MarkSpace::Interval {
                lower,
                upper,
                density,
            } => match density {
                IntervalDensity::Uniform { .. } => Mark::Real(lower + (upper - lower) * rng.random::<f64>()),
                IntervalDensity::Histogram { heights } => {
                    let w = (upper - lower) / heights.len() as f64;
                    let total: f64 = heights.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    let mut cell = heights.len() - 1;
                    for (i, h) in heights.iter().enumerate() {
                        if u < *h {
                            cell = i;
                            break;
                        }
                        u -= h;
                    }
                    Mark::Real(lower + w * (cell as f64 + rng.random::<f64>()))
                }
            },
        }
    }
}

/// `x^ = (x, s_x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub position: Vec<f64>,
    pub mark: Mark,
}

impl MarkedPoint {
    pub fn new(position: Vec<f64>, mark: Mark) -> Self {
        Self { position, mark }
    }

    fn position_cmp(&self, other: &MarkedPoint) -> Ordering {
        for (a, b) in self.position.iter().zip(&other.position) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.position.len().cmp(&other.position.len())
    }
}

/// Finite marked configuration in canonical (lexicographic position) order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FiniteConfiguration {
    points: Vec<MarkedPoint>,
}

impl<'de> Deserialize<'de> for FiniteConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            points: Vec<MarkedPoint>,
        }
        let raw = Raw::deserialize(d)?;
        canonicalize(raw.points).map_err(serde::de::Error::custom)
    }
}

/// Sort by position and reject coincident positions.
pub fn canonicalize(mut points: Vec<MarkedPoint>) -> Result<FiniteConfiguration> {
    points.sort_by(|a, b| a.position_cmp(b).then_with(|| a.mark.total_cmp(&b.mark)));
    if let Some(w) = points
        .windows(2)
        .find(|w| w[0].position_cmp(&w[1]) == Ordering::Equal)
    {
        return Err(Error::DuplicatePosition {
            position: w[0].position.clone(),
        });
    }
    Ok(FiniteConfiguration { points })
}

/// Points of `config` inside `region`; the region must lie in the model box.
pub fn restrict(config: &FiniteConfiguration, region: &SubBox, space: &PositionSpace) -> Result<FiniteConfiguration> {
    if !space.contains_box(region) {
        return Err(Error::RegionOutOfBounds {
            region: region.to_string(),
        });
    }
    Ok(config.within(region))
}

impl FiniteConfiguration {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[MarkedPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<MarkedPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MarkedPoint> {
        self.points.iter()
    }

    /// `omega_Lambda`.
    pub fn within<R: Region + ?Sized>(&self, region: &R) -> Self {
        Self {
            points: self.points.iter().filter(|p| region.contains(&p.position)).cloned().collect(),
        }
    }

    /// `omega_{X \ Lambda}`.
    pub fn outside<R: Region + ?Sized>(&self, region: &R) -> Self {
        Self {
            points: self.points.iter().filter(|p| !region.contains(&p.position)).cloned().collect(),
        }
    }

    /// Union of position-disjoint configurations.
    pub fn union(&self, other: &FiniteConfiguration) -> Result<Self> {
        let mut all = self.points.clone();
        all.extend(other.points.iter().cloned());
        canonicalize(all)
    }

    /// Sub-configuration selected by a bitmask over the canonical order.
    pub fn subset(&self, mask: u64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, p)| p.clone())
                .collect(),
        }
    }

    pub fn shares_position_with(&self, other: &FiniteConfiguration) -> bool {
        self.points
            .iter()
            .any(|p| other.points.iter().any(|q| p.position == q.position))
    }
}

impl<'a> IntoIterator for &'a FiniteConfiguration {
    type Item = &'a MarkedPoint;
    type IntoIter = std::slice::Iter<'a, MarkedPoint>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Everything needed to define the Lebesgue-Poisson measure and the
/// specification: box, marks, activity `z`, inverse temperature `beta` and
/// the pair potential.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub space: PositionSpace,
    pub marks: MarkSpace,
    pub activity: f64,
    pub beta: f64,
    pub potential: Arc<PairPotential>,
}

impl ModelSpec {
    pub fn new(space: PositionSpace, marks: MarkSpace, activity: f64, beta: f64, potential: PairPotential) -> Result<Self> {
        let m = Self {
            space,
            marks,
            activity,
            beta,
            potential: Arc::new(potential),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.marks.validate()?;
        if !(self.activity.is_finite() && self.activity >= 0.0) {
            return Err(Error::InvalidModel(format!("activity must be >= 0, got {}", self.activity)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidModel(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn with_activity(&self, z: f64) -> Self {
        Self {
            activity: z,
            ..self.clone()
        }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn with_potential(&self, potential: PairPotential) -> Self {
        Self {
            potential: Arc::new(potential),
            ..self.clone()
        }
    }

    /// `sigma^tau(region x S)` for position-independent marks.
    pub fn sigma_tau<R: Region + ?Sized>(&self, region: &R) -> f64 {
        region.volume() * self.marks.total_mass()
    }

    /// `sigma^tau(Lambda x S)` over the whole box.
    pub fn total_sigma_tau(&self) -> f64 {
        self.space.volume() * self.marks.total_mass()
    }

    #[inline]
    pub fn phi(&self, a: &MarkedPoint, b: &MarkedPoint) -> f64 {
        self.potential.evaluate(&self.space, a, b)
    }

    /// `e^{-beta phi} - 1`, exactly `-1` on `+inf`.
    #[inline]
    pub fn mayer(&self, a: &MarkedPoint, b: &MarkedPoint) -> f64 {
        let v = self.phi(a, b);
        if v == f64::INFINITY {
            -1.0
        } else {
            (-self.beta * v).exp_m1()
        }
    }

    /// `e^{-beta e}`, exactly `0` on `+inf`.
    #[inline]
    pub fn boltzmann(&self, energy: f64) -> f64 {
        if energy == f64::INFINITY {
            0.0
        } else {
            (-self.beta * energy).exp()
        }
    }

    /// `e^{2 beta B}`.
    pub fn stability_factor(&self) -> f64 {
        (2.0 * self.beta * self.potential.stability_b()).exp()
    }
}
