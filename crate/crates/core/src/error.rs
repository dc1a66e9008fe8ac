use thiserror::Error;

/// Errors produced anywhere in the pipeline, from CSV ingestion through
/// estimation and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: column `{column}`: {message}")]
    BadField {
        line: u64,
        column: String,
        message: String,
    },

    #[error("unrecognized mode code {0}")]
    UnknownModeCode(u16),

    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    BadCoordinate { lat: f64, lon: f64 },

    #[error("observation `{obs}`: {message}")]
    BadObservation { obs: String, message: String },

    #[error("weather index contains no stations")]
    EmptyWeatherIndex,

    #[error("observation `{obs}` carries no endpoint coordinates/times; cannot attach weather")]
    MissingEndpoints { obs: String },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("term `{term}`: covariate `{covariate}` missing on observation `{obs}`")]
    MissingCovariate {
        term: String,
        covariate: String,
        obs: String,
    },

    #[error("no observations available for estimation")]
    EmptyData,

    #[error("objective is not finite at the start point")]
    NonFiniteObjective,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
