//! Cluster expansion for marked Gibbs point processes: Ursell coefficients,
//! tree-graph bounds, convergence certificates, truncated series, and exact
//! and Markov chain samplers to check them against.

pub mod cluster;
pub mod combinat;
pub mod error;
pub mod gibbsmc;
pub mod lpintegrate;
pub mod model;
pub mod potential;
pub mod scalar;
pub mod starcalc;

pub use error::{Error, Result};
pub use model::{
    canonicalize, restrict, Boundary, BoxUnion, FiniteConfiguration, IntervalDensity, Mark, MarkSpace, MarkedPoint,
    ModelSpec, PositionSpace, Region, SubBox,
};
pub use potential::PairPotential;
pub use scalar::Scalar;

pub type ConfigFunctional64 = starcalc::ConfigFunctional<f64>;
pub type ConfigFunctional32 = starcalc::ConfigFunctional<f32>;

pub type UrsellTable64 = cluster::UrsellTable<f64>;
pub type UrsellTable32 = cluster::UrsellTable<f32>;
