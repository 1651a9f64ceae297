use thiserror::Error;

use crate::dynamics::ChordRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// No boundary crossing within the length cap. The trajectory is a
    /// trapping candidate.
    #[error("no boundary hit within length cap {l_max}")]
    Trapped { l_max: f64 },

    #[error("start point lies on the boundary with an outward direction (cos_in = {cos_in})")]
    DegenerateStart { cos_in: f64 },

    #[error("point is not on the boundary (|gauge| = {gauge:e})")]
    NotOnBoundary { gauge: f64 },

    /// The chord was computed but leaves through the grazing band.
    #[error("chord exits within the grazing band (cos_in = {})", .0.exit_cos_in)]
    GrazingExit(Box<ChordRecord>),

    #[error("enclosing body too small: {0}")]
    BodyTooSmall(String),

    #[error("test set has zero empirical mass")]
    DegenerateSet,

    #[error("excluded fraction {fraction} exceeds the 1% budget")]
    TooManyTrapped { fraction: f64 },

    #[error("empty sequence")]
    EmptySequence,

    #[error("antipodal endpoints do not determine a unique geodesic")]
    AmbiguousGeodesic,

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag used in error reports and across the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Trapped { .. } => "trapped",
            Error::DegenerateStart { .. } => "degenerate_start",
            Error::NotOnBoundary { .. } => "not_on_boundary",
            Error::GrazingExit(_) => "grazing_exit",
            Error::BodyTooSmall(_) => "body_too_small",
            Error::DegenerateSet => "degenerate_set",
            Error::TooManyTrapped { .. } => "too_many_trapped",
            Error::EmptySequence => "empty_sequence",
            Error::AmbiguousGeodesic => "ambiguous_geodesic",
            Error::InvalidTable(_) => "invalid_table",
            Error::Config(_) => "config",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Validation-class errors (bad input) as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidTable(_) | Error::Config(_) | Error::Unsupported(_) | Error::Json(_)
        )
    }
}
