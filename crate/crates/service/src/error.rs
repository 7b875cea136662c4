use pvtwin_core::eval::EvalError;
use pvtwin_core::forecast::ForecastError;
use pvtwin_core::market::MarketError;
use pvtwin_core::plant::PlantError;
use pvtwin_core::power::SimulationError;
use pvtwin_core::qc::QcError;
use pvtwin_gateway::GatewayError;
use serde::{Deserialize, Serialize};

/// How a failure is reported to HTTP clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    BadRequest,
    NotFound,
    Conflict,
    Unprocessable,
    Upstream,
    Internal,
}

impl ErrorClass {
    pub fn status(self) -> u16 {
        match self {
            Self::BadRequest => 400,
            Self::NotFound => 404,
            Self::Conflict => 409,
            Self::Unprocessable => 422,
            Self::Upstream => 502,
            Self::Internal => 500,
        }
    }
}

/// A classified failure: `code` names the underlying error variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ServiceError {
    pub class: ErrorClass,
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn new(class: ErrorClass, code: &str, message: impl Into<String>) -> Self {
        Self {
            class,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::NotFound, code, message)
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::BadRequest, code, message)
    }

    pub fn status(&self) -> u16 {
        self.class.status()
    }
}

/// Name of an enum variant from its `Debug` rendering.
fn variant<T: std::fmt::Debug>(e: &T) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or_default()
        .to_string()
}

impl From<GatewayError> for ServiceError {
    fn from(e: GatewayError) -> Self {
        use ErrorClass::*;
        let class = match &e {
            GatewayError::Forecast(f) => return f.clone().into(),
            GatewayError::HeaderMismatch { .. }
            | GatewayError::BadTimestamp { .. }
            | GatewayError::BadValue { .. }
            | GatewayError::OffGrid(_)
            | GatewayError::EmptyFile
            | GatewayError::Spreadsheet(_)
            | GatewayError::Csv(_)
            | GatewayError::UnresolvedSeriesId(_)
            | GatewayError::IncompleteRun { .. }
            | GatewayError::Weather(_)
            | GatewayError::InvalidTableName(_)
            | GatewayError::UnknownFreq(_)
            | GatewayError::InvalidRange { .. } => BadRequest,
            GatewayError::DuplicateStamp(_) | GatewayError::DuplicateRun { .. } | GatewayError::WriteConflict => Conflict,
            GatewayError::TableMissing(_) => NotFound,
            GatewayError::Transport(_)
            | GatewayError::AuthError
            | GatewayError::EmptyResponse
            | GatewayError::MalformedPayload(_) => Upstream,
            GatewayError::Database(_) | GatewayError::MissingConfig(_) | GatewayError::Io { .. } => Internal,
        };
        Self::new(class, &variant(&e), e.to_string())
    }
}

impl From<MarketError> for ServiceError {
    fn from(e: MarketError) -> Self {
        let class = match &e {
            MarketError::WrongPeriodCount(_) | MarketError::EmptyForecast(_) | MarketError::MissingHistorical(_) => {
                ErrorClass::Unprocessable
            }
            MarketError::MalformedCsv { .. } | MarketError::UnknownOperation(_) => ErrorClass::BadRequest,
            MarketError::Simulation(_) => ErrorClass::Unprocessable,
        };
        Self::new(class, &variant(&e), e.to_string())
    }
}

impl From<ForecastError> for ServiceError {
    fn from(e: ForecastError) -> Self {
        let class = match &e {
            ForecastError::InsufficientHistory { .. } => ErrorClass::Conflict,
            ForecastError::MisalignedIssueTime(_) => ErrorClass::BadRequest,
            _ => ErrorClass::Unprocessable,
        };
        Self::new(class, &variant(&e), e.to_string())
    }
}

impl From<EvalError> for ServiceError {
    fn from(e: EvalError) -> Self {
        let class = match &e {
            EvalError::UnknownOption(_) => ErrorClass::BadRequest,
            EvalError::NotEnoughModels(_) => ErrorClass::Conflict,
            _ => ErrorClass::Unprocessable,
        };
        Self::new(class, &variant(&e), e.to_string())
    }
}

impl From<PlantError> for ServiceError {
    fn from(e: PlantError) -> Self {
        Self::new(ErrorClass::Unprocessable, &variant(&e), e.to_string())
    }
}

impl From<SimulationError> for ServiceError {
    fn from(e: SimulationError) -> Self {
        Self::new(ErrorClass::Unprocessable, &variant(&e), e.to_string())
    }
}

impl From<QcError> for ServiceError {
    fn from(e: QcError) -> Self {
        Self::new(ErrorClass::Unprocessable, &variant(&e), e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gateway_errors_are_classified() {
        let e: ServiceError = GatewayError::EmptyFile.into();
        assert_eq!((e.status(), e.code.as_str()), (400, "EmptyFile"));
        let e: ServiceError = GatewayError::WriteConflict.into();
        assert_eq!(e.status(), 409);
        let e: ServiceError = GatewayError::HeaderMismatch {
            expected: vec![],
            found: vec![],
        }
        .into();
        assert_eq!((e.status(), e.code.as_str()), (400, "HeaderMismatch"));
    }

    #[test]
    fn domain_errors_are_classified() {
        let e: ServiceError = MarketError::WrongPeriodCount(23).into();
        assert_eq!((e.status(), e.code.as_str()), (422, "WrongPeriodCount"));
        let e: ServiceError = ForecastError::InsufficientHistory { needed: 36, found: 3 }.into();
        assert_eq!((e.status(), e.code.as_str()), (409, "InsufficientHistory"));
        let e: ServiceError = EvalError::UnknownOption("7".into()).into();
        assert_eq!(e.status(), 400);
        let e: ServiceError = EvalError::NotEnoughModels(1).into();
        assert_eq!(e.status(), 409);
    }
}
