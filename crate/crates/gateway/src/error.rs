use std::path::PathBuf;

use chrono::NaiveDateTime;
use pvtwin_core::forecast::ForecastError;
use pvtwin_core::weather::WeatherError;
use thiserror::Error;

use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: cannot parse timestamp {value:?}")]
    BadTimestamp { row: usize, value: String },
    #[error("row {row}, column {column}: cannot parse number {value:?}")]
    BadValue { row: usize, column: String, value: String },
    #[error("duplicate timestamp {0}")]
    DuplicateStamp(NaiveDateTime),
    #[error("timestamps are not on a common grid (at {0})")]
    OffGrid(NaiveDateTime),
    #[error("file holds no data rows")]
    EmptyFile,
    #[error("spreadsheet error: {0}")]
    Spreadsheet(String),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("run references unknown series id {0:?}")]
    UnresolvedSeriesId(String),
    #[error("duplicate run value for model {model}, issue {issue_time}, horizon {horizon}")]
    DuplicateRun {
        model: String,
        issue_time: NaiveDateTime,
        horizon: usize,
    },
    #[error("run of model {model} issued {issue_time} has horizons {found:?}, expected 1..=N")]
    IncompleteRun {
        model: String,
        issue_time: NaiveDateTime,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error("table {0:?} does not exist")]
    TableMissing(String),
    #[error("invalid table name {0:?}")]
    InvalidTableName(String),
    #[error("another writer holds the store")]
    WriteConflict,
    #[error("database error: {0}")]
    Database(rusqlite::Error),
    #[error(transparent)]
    Transport(TransportError),
    #[error("server rejected the credentials")]
    AuthError,
    #[error("server returned no records")]
    EmptyResponse,
    #[error("unknown frequency {0:?} (expected minute, hourly or daily)")]
    UnknownFreq(String),
    #[error("start {start} must precede end {end}")]
    InvalidRange { start: String, end: String },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("environment variable {0} is not set")]
    MissingConfig(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<rusqlite::Error> for GatewayError {
    fn from(e: rusqlite::Error) -> Self {
        match e.sqlite_error_code() {
            Some(rusqlite::ErrorCode::DatabaseBusy) | Some(rusqlite::ErrorCode::DatabaseLocked) => {
                GatewayError::WriteConflict
            }
            _ => GatewayError::Database(e),
        }
    }
}

impl From<TransportError> for GatewayError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Status { code: 401 | 403, .. } => GatewayError::AuthError,
            other => GatewayError::Transport(other),
        }
    }
}

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> GatewayError {
    let path = path.into();
    move |source| GatewayError::Io { path, source }
}
