use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: row {row}: column `{column}` is not a number: {value:?}")]
    NonNumericValue {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}: {message}")]
    InvalidValue {
        path: String,
        row: usize,
        message: String,
    },

    #[error("at least 3 samples are required, got {0}")]
    FewerThanThreeSamples(usize),

    #[error("MOS scale is degenerate: min == max == {0}")]
    DegenerateScale(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid range ({min}, {max}): max must exceed min")]
    InvalidRange { min: f64, max: f64 },

    #[error("surface fit needs at least {needed} defined query points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("integration region has no overlap with the surface domain")]
    EmptyRegion,

    #[error("subset of {requested} samples requested without replacement from {available}")]
    SubsetTooLarge { requested: usize, available: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("`{model}` scores different images than `{reference}`: MOS differs at data row {row}")]
    MosMismatch {
        model: String,
        reference: String,
        row: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for problems with the user's configuration, as opposed to the data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidRange { .. }
                | Error::Config(_)
                | Error::LengthMismatch { .. }
                | Error::MosMismatch { .. }
        )
    }
}
