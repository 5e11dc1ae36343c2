use nalgebra::Complex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("spectral point collision at {0}")]
    SpectralCollision(Complex<f64>),
    #[error("eigendecomposition rejected (residual {residual:e}, condition {condition:e})")]
    EigenRejected { residual: f64, condition: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("basis is rank deficient")]
    RankDeficient,
    #[error("simple eigenvalue lost at kappa = {kappa} (projection rank {rank})")]
    SimplicityLost { kappa: f64, rank: usize },
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::SpectralCollision(_)
                | Error::EigenRejected { .. }
                | Error::Overflow(_)
                | Error::NoConvergence(_)
                | Error::RankDeficient
                | Error::SimplicityLost { .. }
        )
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
