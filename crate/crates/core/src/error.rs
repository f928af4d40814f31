use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping of failures, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("no records for country {country}, year {year}")]
    MissingCountryYear { country: String, year: i32 },

    #[error("spectral radius of A is {spectral_radius:.6} (must be < 1)")]
    NonProductiveEconomy { spectral_radius: f64 },

    #[error("sector {sector} has zero output but nonzero input flows")]
    ZeroOutputSector { sector: String },

    #[error("noise scale must be positive, got {value}")]
    NonPositiveScale { value: f64 },

    #[error("linear system is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("drift matrix is not Hurwitz (max real eigenvalue {max_real_eigenvalue:.6})")]
    UnstableDrift { max_real_eigenvalue: f64 },

    #[error("trajectory blew up at t = {time} (|Y| > {bound:e}); reduce dt")]
    NumericalBlowup { time: f64, bound: f64 },

    #[error("need at least {required} replicas for standard errors, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("panel is missing cells: {}", format_cells(.cells))]
    MissingPanelCell { cells: Vec<(String, i32)> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("truncated susceptibility is ill-conditioned (condition estimate {condition:e}, cap {cap:e})")]
    IllConditioned { condition: f64, cap: f64 },

    #[error("series of length {len} is too short (need at least {required})")]
    TooShortSeries { len: usize, required: usize },

    #[error("optimizer did not converge after {iterations} iterations (objective {objective:e})")]
    NonConvergent { iterations: usize, objective: f64 },

    #[error("regressor matrix is rank deficient: {0}")]
    RankDeficientRegressors(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("misaligned panel: {0}")]
    MisalignedPanel(String),

    #[error("no export detail for {country}/{sector} to {destination}")]
    MissingExportDetail {
        country: String,
        sector: String,
        destination: String,
    },

    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidP(f64),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_cells(cells: &[(String, i32)]) -> String {
    cells
        .iter()
        .map(|(c, y)| format!("{c}/{y}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn class(&self) -> &'static str {
        match self {
            Error::MalformedRow { .. } => "MalformedRow",
            Error::MissingCountryYear { .. } => "MissingCountryYear",
            Error::NonProductiveEconomy { .. } => "NonProductiveEconomy",
            Error::ZeroOutputSector { .. } => "ZeroOutputSector",
            Error::NonPositiveScale { .. } => "NonPositiveScale",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::UnstableDrift { .. } => "UnstableDrift",
            Error::NumericalBlowup { .. } => "NumericalBlowup",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::MissingPanelCell { .. } => "MissingPanelCell",
            Error::GridMismatch(_) => "GridMismatch",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::TooShortSeries { .. } => "TooShortSeries",
            Error::NonConvergent { .. } => "NonConvergent",
            Error::RankDeficientRegressors(_) => "RankDeficientRegressors",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::MisalignedPanel(_) => "MisalignedPanel",
            Error::MissingExportDetail { .. } => "MissingExportDetail",
            Error::InvalidP(_) => "InvalidP",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MalformedRow { .. }
            | Error::MissingCountryYear { .. }
            | Error::ZeroOutputSector { .. }
            | Error::MissingPanelCell { .. }
            | Error::MisalignedPanel(_)
            | Error::MissingExportDetail { .. }
            | Error::TooShortSeries { .. }
            | Error::Io(_) => ErrorKind::Data,
            Error::NonProductiveEconomy { .. }
            | Error::SingularSystem { .. }
            | Error::UnstableDrift { .. }
            | Error::NumericalBlowup { .. }
            | Error::IllConditioned { .. }
            | Error::NonConvergent { .. }
            | Error::RankDeficientRegressors(_)
            | Error::DegenerateInput(_)
            | Error::InsufficientSamples { .. } => ErrorKind::Numerical,
            Error::NonPositiveScale { .. }
            | Error::GridMismatch(_)
            | Error::InvalidP(_)
            | Error::UnsupportedFormat(_)
            | Error::InvalidArgument(_) => ErrorKind::Usage,
        }
    }
}
