use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unstable cavity geometry: length {length} m must lie in (0, 2 * roc = {max} m)")]
    UnstableGeometry { length: f64, max: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("insufficient statistics: total photon count is zero")]
    InsufficientCounts,

    #[error("transmitted intensity vanishes, rotation angle undefined")]
    ZeroIntensity,

    #[error(
        "Fock cutoff {cutoff} inadequate: top level holds population {top_population:.3e} \
         (limit 1e-6); increase the cutoff"
    )]
    CutoffInadequate { cutoff: usize, top_population: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("conditioning on an outcome with zero probability")]
    ImpossibleOutcome,

    #[error(
        "coincidence acceptance {accepted}/{tried} is below 1e-4; widen the source region \
         or check the detection rate"
    )]
    AcceptanceTooLow { accepted: usize, tried: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),
}
