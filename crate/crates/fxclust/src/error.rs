use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-positive price {value} for {column} at line {line}")]
    NonPositivePrice {
        line: u64,
        column: String,
        value: f64,
    },

    #[error("duplicate date {date} in series {series} at line {line}")]
    DuplicateDate {
        series: String,
        date: NaiveDate,
        line: u64,
    },

    #[error("only {common} common dates, need at least 3")]
    EmptyIntersection { common: usize },

    #[error("price orientation of the dataset is not set")]
    OrientationUnknown,

    #[error("{dates} dates cannot be split into {periods} periods of at least 3 dates")]
    TooFewDates { dates: usize, periods: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Numeric(#[from] fxclust_core::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 3 for numeric or degenerate-data failures, 2 for
    /// everything caused by the input files or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Numeric(
                fxclust_core::Error::InvalidMatrix(_)
                | fxclust_core::Error::LabelMismatch
                | fxclust_core::Error::LengthMismatch { .. }
                | fxclust_core::Error::NonPositiveBinWidth,
            ) => 2,
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
