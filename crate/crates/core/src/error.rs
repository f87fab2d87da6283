use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: parameters out of range, malformed grids, unknown geometry.
    Config,
    /// Physically meaningless request: unstable operating point, non-classical noise.
    Physics,
    /// The numerics broke down: singular systems, divergence.
    Numerical,
}

/// Failure of the pivoted factorization of a diffusion matrix.
#[derive(Debug, Clone, PartialEq, Error)]
#[error(
    "diffusion matrix is not positive semidefinite: Schur complement of `{variable}` \
     after eliminating [{eliminated}] is {schur_complement:.6e} (tolerance {tolerance:.3e}); \
     it cannot be sampled as real Gaussian noise"
)]
pub struct NotPositiveSemidefinite {
    /// State variable whose pivot went negative.
    pub variable: &'static str,
    /// Variables already eliminated when the violation was found.
    pub eliminated: String,
    pub schur_complement: f64,
    pub tolerance: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pump parameter r = {0} is not above threshold (need r > 1)")]
    BelowThreshold(f64),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("spectra were evaluated on a different frequency grid")]
    GridMismatch,

    #[error("denominator {which} vanishes at omega = {omega} GHz (marginal stability)")]
    SingularDenominator { which: &'static str, omega: f64 },

    #[error("response system is singular at omega = {omega} GHz")]
    SingularResponse { omega: f64 },

    #[error("operating point is unstable: largest eigenvalue real part {max_real:.6e} GHz")]
    Unstable { max_real: f64 },

    #[error(transparent)]
    NotPositiveSemidefinite(#[from] NotPositiveSemidefinite),

    #[error("step-size guard violated: dt * max|eig| = {product:.4} (limit {limit})")]
    StepSizeGuard { product: f64, limit: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("trajectory {trajectory} diverged at t = {time:.4} ns")]
    Diverged { trajectory: usize, time: f64 },

    #[error("segment holds {samples} samples, at least {min} are required")]
    SegmentTooShort { samples: usize, min: usize },

    #[error("unsupported detection geometry: {0}")]
    UnsupportedGeometry(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::GridMismatch
            | Error::InvalidSimConfig(_)
            | Error::SegmentTooShort { .. }
            | Error::UnsupportedGeometry(_)
            | Error::StepSizeGuard { .. }
            | Error::BelowThreshold(_) => ErrorClass::Config,
            Error::Unstable { .. } | Error::NotPositiveSemidefinite(_) => ErrorClass::Physics,
            Error::SingularDenominator { .. }
            | Error::SingularResponse { .. }
            | Error::Diverged { .. } => ErrorClass::Numerical,
        }
    }
}
