use thiserror::Error;

/// Errors produced by the operator constructions and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("off-diagonal block a[{index}] is singular (|det| = {det:e})")]
    SingularOffDiagonal { index: usize, det: f64 },

    #[error("diagonal block b[{index}] is not Hermitian (max deviation {deviation:e})")]
    NonHermitianDiagonal { index: usize, deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix of size {size} exceeds the dense solver limit {limit}")]
    SizeLimitExceeded { size: usize, limit: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("wave packet support [{lo}, {hi}] is not inside the window [{window_lo}, {window_hi}]")]
    SupportOutsideWindow {
        lo: i64,
        hi: i64,
        window_lo: i64,
        window_hi: i64,
    },

    #[error("window half-width {actual} is below the required {required}")]
    WindowTooSmall { required: i64, actual: i64 },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("chain of {sites} sites exceeds the limit of {limit}")]
    ChainTooLong { sites: usize, limit: usize },

    #[error("potential window of length {len} is shorter than the {needed} steps requested")]
    WindowTooShort { len: usize, needed: usize },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("initial state violates the envelope |psi(n)| <= m exp(-|n|/m) at n = {site} (m = {m})")]
    PsiEnvelopeViolated { site: i64, m: u32 },

    #[error("no certificate found: {0}")]
    NoCertificateFound(String),
}

impl Error {
    /// True for errors caused by invalid input rather than by a numerical
    /// procedure failing to reach its tolerance.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::QuadratureNotConverged(_) | Error::NoCertificateFound(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularOffDiagonal { .. } => "SingularOffDiagonal",
            Error::NonHermitianDiagonal { .. } => "NonHermitianDiagonal",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SizeLimitExceeded { .. } => "SizeLimitExceeded",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::SupportOutsideWindow { .. } => "SupportOutsideWindow",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::ChainTooLong { .. } => "ChainTooLong",
            Error::WindowTooShort { .. } => "WindowTooShort",
            Error::QuadratureNotConverged(_) => "QuadratureNotConverged",
            Error::PsiEnvelopeViolated { .. } => "PsiEnvelopeViolated",
            Error::NoCertificateFound(_) => "NoCertificateFound",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
