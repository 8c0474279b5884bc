use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fast Jacobian is numerically singular")]
    SingularJacobian,

    #[error("the frozen iteration matrix A0 is singular")]
    SingularA0,

    #[error("iteration stagnated at step {iteration} with residual {residual:.3e}")]
    Stagnation { iteration: usize, residual: f64 },

    #[error("sample for axis {axis} around grid point {point} is not available")]
    MissingNeighbor { point: usize, axis: usize },

    #[error("eigenvalue with real part {real_part:.3e} is inside the hyperbolicity floor")]
    NonHyperbolic { real_part: f64 },

    #[error("tolerance {tol:.3e} exceeds the deviation {r:.3e}")]
    InvalidTolerance { tol: f64, r: f64 },

    #[error("fiber correction matrix I + d_eta * phi is singular")]
    SingularCorrection,

    #[error("Newton failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("stage {stage} failed: {source}")]
    Stage { stage: usize, source: Box<Error> },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("bracket [{lo}, {hi}] does not separate the two behaviours")]
    NoBracket { lo: f64, hi: f64 },

    #[error("trajectory did not reach the section")]
    SectionMiss,

    #[error("abscissae coincide, slope is undefined")]
    DegenerateFit,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
