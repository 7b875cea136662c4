//! Multi-step irradiance forecasts, hourly aggregation and the
//! smart-persistence reference forecaster.

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{clearsky_ghi, clearsky_index, solar_position, GeometryError, CLEARSKY_GUARD};
use crate::plant::Location;
use crate::weather::{Variable, WeatherSeries};

/// Steps of a native 10-minute forecast (six hours ahead).
pub const NATIVE_STEPS: usize = 36;
pub const NATIVE_STEP_MINUTES: i64 = 10;
pub const HOURLY_STEPS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("forecast must have {expected} steps, got {found}")]
    WrongStepCount { expected: usize, found: usize },
    #[error("negative or non-finite forecast value {value} at step {step}")]
    InvalidValue { step: usize, value: f64 },
    #[error("issue time {0} is not on an hour boundary")]
    MisalignedIssueTime(NaiveDateTime),
    #[error("need {needed} complete history rows ending at the issue time, found {found}")]
    InsufficientHistory { needed: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// GHI predictions for steps 1..=N after `issue_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub issue_time: NaiveDateTime,
    pub step_minutes: i64,
    pub values: Vec<f64>,
}

impl ForecastSeries {
    pub fn new(issue_time: NaiveDateTime, step_minutes: i64, values: Vec<f64>) -> Result<Self, ForecastError> {
        let expected = if step_minutes == 60 { HOURLY_STEPS } else { NATIVE_STEPS };
        if values.len() != expected {
            return Err(ForecastError::WrongStepCount {
                expected,
                found: values.len(),
            });
        }
        if let Some((step, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ForecastError::InvalidValue { step: step + 1, value });
        }
        Ok(Self {
            issue_time,
            step_minutes,
            values,
        })
    }

    pub fn horizons(&self) -> usize {
        self.values.len()
    }

    /// Target timestamp of 1-based horizon `h`.
    pub fn target_time(&self, h: usize) -> NaiveDateTime {
        self.issue_time + Duration::minutes(self.step_minutes * h as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, NaiveDateTime, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1, self.target_time(i + 1), *v))
    }
}

/// Averages each run of six 10-minute steps into one hourly step.
pub fn hourly_average(forecast: &ForecastSeries) -> Result<ForecastSeries, ForecastError> {
    let t = forecast.issue_time;
    if t.minute() != 0 || t.second() != 0 {
        return Err(ForecastError::MisalignedIssueTime(t));
    }
    if forecast.step_minutes != NATIVE_STEP_MINUTES || forecast.values.len() != NATIVE_STEPS {
        return Err(ForecastError::WrongStepCount {
            expected: NATIVE_STEPS,
            found: forecast.values.len(),
        });
    }
    let values = forecast
        .values
        .chunks(6)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Ok(ForecastSeries {
        issue_time: t,
        step_minutes: 60,
        values,
    })
}

/// Persists the mean clear-sky index of the last hour of history onto the
/// clear-sky curve of the next six hours.
///
/// `history` must hold the six hours of 10-minute GHI ending at
/// `issue_time`. Only daylight stamps (clear-sky GHI above the index guard)
/// contribute to the mean; with none, the index is zero.
pub fn baseline_smart_persistence(
    history: &WeatherSeries,
    location: &Location,
    issue_time: NaiveDateTime,
) -> Result<ForecastSeries, ForecastError> {
    let window = history.slice(
        issue_time - Duration::minutes(NATIVE_STEP_MINUTES * NATIVE_STEPS as i64 - 1),
        issue_time + Duration::minutes(1),
    );
    let complete = window
        .column(Variable::Ghi)
        .map(|c| c.iter().filter(|v| v.is_some()).count())
        .unwrap_or(0);
    if window.len() != NATIVE_STEPS || complete != NATIVE_STEPS {
        return Err(ForecastError::InsufficientHistory {
            needed: NATIVE_STEPS,
            found: complete,
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in NATIVE_STEPS - 6..NATIVE_STEPS {
        let t = window.timestamps()[row];
        let cs = clearsky_ghi(&solar_position(location, t)?);
        if cs >= CLEARSKY_GUARD {
            sum += clearsky_index(window.get(Variable::Ghi, row).unwrap(), cs);
            count += 1;
        }
    }
    let k = if count > 0 { sum / count as f64 } else { 0.0 };
    let values = (1..=NATIVE_STEPS)
        .map(|h| {
            let t = issue_time + Duration::minutes(NATIVE_STEP_MINUTES * h as i64);
            solar_position(location, t).map(|pos| (k * clearsky_ghi(&pos)).max(0.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForecastSeries {
        issue_time,
        step_minutes: NATIVE_STEP_MINUTES,
        values,
    })
}
