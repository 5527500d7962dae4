use thiserror::Error;

use crate::model::FiniteConfiguration;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("two points share the position {position:?}")]
    DuplicatePosition { position: Vec<f64> },

    #[error("region {region} is not contained in the model box")]
    RegionOutOfBounds { region: String },

    #[error("{what}: size {size} exceeds the cap {cap}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("functionals live on grounds of different size ({left} vs {right})")]
    GroundMismatch { left: usize, right: usize },

    #[error("exp* is only defined on functionals vanishing at the empty set (got {value})")]
    NotInIdeal { value: f64 },

    #[error("ln* needs f(empty) = 1 (got {value})")]
    NotNormalized { value: f64 },

    #[error("configurations share a position")]
    OverlappingConfigurations,

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("stability violated: E = {energy} < -B|w| = {bound} on {} points", witness.len())]
    StabilityViolation {
        witness: FiniteConfiguration,
        energy: f64,
        bound: f64,
    },

    #[error("integrability constant C(beta) is not finite")]
    InfiniteCBeta,

    #[error("activity outside the certified radius (q = {q} >= 1)")]
    OutsideRadius { q: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("quadrature scheme does not fit the problem: {0}")]
    SchemeMismatch(String),

    #[error("integrand returned a non-finite value at order {order}")]
    NonFiniteIntegrand { order: usize },

    #[error("rejection sampler acceptance {estimated:.3e} below floor {floor:.3e}")]
    AcceptanceTooLow { estimated: f64, floor: f64 },

    #[error("operation requires a finite-range potential")]
    RequiresFiniteRange,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),
}
