use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Each variant carries a stable, module-qualified code (see [`Error::code`])
/// that the command-line front end prints and maps to its exit status.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // core data
    #[error("duplicate condition label {label:?} at index {index}")]
    DuplicateLabel { index: usize, label: String },
    #[error("frame times not strictly increasing at index {index}")]
    NonMonotonicTime { index: usize },
    #[error("non-finite value at (frame {frame}, condition {condition}, channel {channel})")]
    NonFiniteValue { frame: usize, condition: usize, channel: usize },
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("too few conditions: {found} (need at least {required})")]
    TooFewConditions { found: usize, required: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    // dissimilarity
    #[error("row {row} is degenerate for the {measure} measure{}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    DegenerateRow { row: usize, measure: &'static str, frame: Option<usize> },

    // geotopo
    #[error("invalid transform parameters: {0}")]
    InvalidTransform(String),
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold band ({lower}, {upper}) is degenerate: resolved lower {l} >= upper {u}")]
    DegenerateBand { lower: f64, upper: f64, l: f64, u: f64 },

    // shared
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // alignment
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    // simcompare
    #[error("degenerate representation: {0}")]
    DegenerateRepresentation(String),
    #[error("RDM entries have zero variance; correlation comparator undefined")]
    ZeroVarianceRdm,
    #[error("condition labels differ between the compared RDMs")]
    LabelMismatch,

    // simplicial
    #[error("temporal window requested but the point cloud has no timestamps")]
    MissingTimestamps,
    #[error("clique enumeration budget of {budget} exceeded (reached dimension {dim_reached})")]
    BudgetExceeded { budget: u64, dim_reached: usize },
    #[error("sample size {sample_size} exceeds point count {available}")]
    SampleTooLarge { sample_size: usize, available: usize },
}

impl Error {
    /// Module-qualified machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateLabel { .. } => "core.duplicate_label",
            Error::NonMonotonicTime { .. } => "core.non_monotonic_time",
            Error::NonFiniteValue { .. } => "core.non_finite_value",
            Error::Shape(_) => "core.shape",
            Error::TooFewConditions { .. } => "core.too_few_conditions",
            Error::InvalidDistanceMatrix(_) => "core.invalid_distance_matrix",
            Error::DegenerateRow { .. } => "dissimilarity.degenerate_row",
            Error::InvalidTransform(_) => "geotopo.invalid_transform",
            Error::EmptyGrid => "geotopo.empty_grid",
            Error::DegenerateBand { .. } => "geotopo.degenerate_band",
            Error::DimensionMismatch(_) => "core.dimension_mismatch",
            Error::InvalidParameter(_) => "core.invalid_parameter",
            Error::DegenerateConfiguration(_) => "alignment.degenerate_configuration",
            Error::DegenerateRepresentation(_) => "simcompare.degenerate_representation",
            Error::ZeroVarianceRdm => "simcompare.zero_variance_rdm",
            Error::LabelMismatch => "simcompare.label_mismatch",
            Error::MissingTimestamps => "simplicial.missing_timestamps",
            Error::BudgetExceeded { .. } => "simplicial.budget_exceeded",
            Error::SampleTooLarge { .. } => "simplicial.sample_too_large",
        }
    }
}
