use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigen-solver did not converge")]
    EigenNonConvergence,

    #[error("charge cutoff {cutoff} not converged: relative change {change:.3e} exceeds {tolerance:.1e}")]
    CutoffNotConverged {
        cutoff: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("no unique steady state (null space dimension {0})")]
    NoUniqueSteadyState(usize),

    #[error("trace drifted by {drift:.3e} at t = {time:.3e} s; reduce the step (currently {step:.3e} s)")]
    TraceDrift { drift: f64, time: f64, step: f64 },

    #[error("coherence denominator vanishes (delta = 0 and gamma10 = 0)")]
    PoleAtOrigin,

    #[error("population denominator vanishes")]
    DegenerateDenominator,

    #[error("control drive {omega_c:.6e} rad/s exceeds the real-root bound {bound:.6e} rad/s")]
    ComplexRoots { omega_c: f64, bound: f64 },

    #[error(
        "control drive {omega_c:.6e} rad/s is below the splitting threshold {bound:.6e} rad/s"
    )]
    ImaginarySplitting { omega_c: f64, bound: f64 },

    #[error("singular Jacobian: parameter `{0}` has no effect on the model")]
    SingularJacobian(String),

    #[error("residual sum must be positive, got {0}")]
    NonPositiveResidual(f64),

    #[error("weight curve never crosses 0.5")]
    NoCrossing,

    #[error("dispersive detuning is zero")]
    ZeroDetuning,

    #[error("normalization |T2 - T0| vanishes")]
    DegenerateNormalization,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Validation { .. } | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
