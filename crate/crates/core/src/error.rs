use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A spectral parameter hit an excluded point (a pole, or the origin of the μ chart).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Fixed-point search for the half-plane cutoff did not settle.
    #[error("coefficient bound did not converge after {iterations} iterations (last M = {last})")]
    UnboundedCoefficient { iterations: usize, last: f64 },

    #[error("near-singular Möbius denominator {denominator:e} at mu = {mu}")]
    NearSingularMobius { mu: Complex64, denominator: f64 },

    #[error("degenerate Weyl disk at mu = {mu}: {reason}")]
    DegenerateDisk { mu: Complex64, reason: String },

    #[error("contour radius {radius} must be smaller than the pole gap {gap}")]
    Contour { radius: f64, gap: f64 },

    #[error("principal block at node {r} is ill-conditioned (estimate {estimate:e})")]
    Conditioning { r: usize, estimate: f64 },

    #[error("reconstruction quality: {0}")]
    ReconstructionQuality(String),

    #[error("integration quality: {0}")]
    IntegrationQuality(String),

    #[error("horizon too short: ratio moved by {change:e} between T/2 and T")]
    HorizonTooShort { change: f64 },

    #[error("partition error: {0}")]
    Partition(String),

    /// Borg–Marchenko harness could not fit a rate; differences sit at the noise floor.
    #[error("degenerate fit: max difference {max_difference:e} below noise floor")]
    DegenerateFit { max_difference: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
