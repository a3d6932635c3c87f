use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Whether a failure came from bad input or from the numerics themselves.
///
/// The command-line front end maps these onto distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("perturbation theory guard: |c1|={c1}, |c2|={c2} must both be <= {limit}")]
    PerturbationGuard { c1: f64, c2: f64, limit: f64 },

    #[error("propagator oracle did not converge: {steps} steps, last change {change:.3e}")]
    OracleNotConverged { steps: usize, change: f64 },

    #[error("positivity lost at t={t}: min eigenvalue {min_eig:.3e}; reduce the step size")]
    StepSize { t: f64, min_eig: f64 },

    #[error("spectrum not converged at cutoff {dim}: low-level drift {drift:.3e}")]
    CutoffNotConverged { dim: usize, drift: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::NotHermitian { .. }
            | Error::NotUnitary { .. }
            | Error::PerturbationGuard { .. }
            | Error::GridMismatch(_)
            | Error::EmptyGrid
            | Error::Io { .. }
            | Error::Json(_) => ErrorKind::Validation,
            Error::OracleNotConverged { .. }
            | Error::StepSize { .. }
            | Error::CutoffNotConverged { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
