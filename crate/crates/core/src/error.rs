use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not in SL_d: det = {det}")]
    NotUnimodular { det: f64 },

    #[error("singular value decomposition failed: {0}")]
    Decomposition(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("eigen-data not separated: {0}")]
    Eigen(String),

    /// A certified inequality was recomputed and found violated.
    #[error("bound violated: {name}: lhs = {lhs:e}, rhs = {rhs:e}")]
    BoundViolation { name: String, lhs: f64, rhs: f64 },

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("singular resolvent at z = {re}{im:+}i (smallest singular value ~ {sigma_min:e})")]
    Singular { re: f64, im: f64, sigma_min: f64 },

    #[error("z = {re}{im:+}i outside the analyticity domain")]
    OutOfDomain { re: f64, im: f64 },

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("Fourier cutoff too small: tail bound {tail:e} exceeds tolerance {tolerance:e}")]
    Cutoff { tail: f64, tolerance: f64 },

    #[error("walk is not transient: lambda = {lambda} with std error {std_error}")]
    NonTransient { lambda: f64, std_error: f64 },

    #[error("tolerance not met: {0}")]
    Tolerance(String),

    #[error("no regular points at the requested scale")]
    EmptyRegularSet,
}

impl Error {
    /// Short machine-readable category, used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NotUnimodular { .. } => "not-unimodular",
            Error::Decomposition(_) => "decomposition",
            Error::Precondition(_) => "precondition",
            Error::Eigen(_) => "eigen",
            Error::BoundViolation { .. } => "bound-violation",
            Error::Measure(_) => "measure",
            Error::Resolution(_) => "resolution",
            Error::Grid(_) => "grid",
            Error::DegenerateSpectrum(_) => "degenerate-spectrum",
            Error::Singular { .. } => "singular",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::Quadrature(_) => "quadrature",
            Error::Cutoff { .. } => "cutoff",
            Error::NonTransient { .. } => "non-transient",
            Error::Tolerance(_) => "tolerance",
            Error::EmptyRegularSet => "empty-regular-set",
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
