use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants fall into two families: validation failures (bad inputs, schema
/// problems, preconditions) and numerical failures (singular solves,
/// degenerate spectra, broken reconstruction chains). [`Error::is_numerical`]
/// tells them apart; the command-line front end maps them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid voltage profile: {0}")]
    InvalidProfile(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} sites")]
    OutOfRange { index: usize, len: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("truncated spectrum: {0} (the grid must extend at least {MARGIN_LINEWIDTHS} linewidths beyond every dip)")]
    TruncatedSpectrum(String),

    #[error("underdetermined fit: {params} free parameters but only {records} informative records")]
    Underdetermined { params: usize, records: usize },

    #[error("grids differ; resample required ({0})")]
    ResampleRequired(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular solve at grid point {index} (omega = {omega} GHz)")]
    SingularFrequency { index: usize, omega: f64 },

    #[error("degenerate spectrum: mode {mode} is quasi-defective (|v^T v| = {self_product:e})")]
    DegenerateSpectrum { mode: usize, self_product: f64 },

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("broken chain at site {site}: hopping {magnitude:e} GHz cannot be resolved")]
    BrokenChain { site: usize, magnitude: f64 },

    #[error("inconsistent modes at site {site}: weight normalization drift {drift:e}")]
    InconsistentModes { site: usize, drift: f64 },

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Margin rule for reflection fits, in linewidths (full widths) per side.
pub const MARGIN_LINEWIDTHS: f64 = 5.0;

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularFrequency { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::EigenFailure
                | Error::BrokenChain { .. }
                | Error::InconsistentModes { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
