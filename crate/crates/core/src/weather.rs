//! Timestamped meteorological records on a uniform grid, stored column-wise
//! with explicit missing cells.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeatherError {
    #[error("timestamps must be strictly increasing (at row {0})")]
    NotIncreasing(usize),
    #[error("timestamps are not on a uniform grid (at row {0})")]
    NonUniform(usize),
    #[error("column {column} has {found} values for {expected} timestamps")]
    LengthMismatch {
        column: Variable,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Ghi,
    /// Second pyranometer.
    Ghi2,
    /// hPa
    Pressure,
    /// °C
    AmbientTemperature,
    /// m/s
    WindSpeed,
    /// Degrees, north = 0, direction the wind blows from.
    WindDirection,
    /// °C, measured back-of-module temperature.
    ModuleTemperature,
    /// Percent.
    RelativeHumidity,
    /// °C
    DewPoint,
}

impl Variable {
    pub const ALL: [Variable; 9] = [
        Variable::Ghi,
        Variable::Ghi2,
        Variable::Pressure,
        Variable::AmbientTemperature,
        Variable::WindSpeed,
        Variable::WindDirection,
        Variable::ModuleTemperature,
        Variable::RelativeHumidity,
        Variable::DewPoint,
    ];

    /// Human-readable name as used in missing-data reports.
    pub fn label(self) -> &'static str {
        match self {
            Variable::Ghi => "Global Horizontal Irradiance 1",
            Variable::Ghi2 => "Global Horizontal Irradiance 2",
            Variable::Pressure => "Atmospheric Pressure",
            Variable::AmbientTemperature => "Ambient Temperature",
            Variable::WindSpeed => "Wind Speed",
            Variable::WindDirection => "Wind Direction",
            Variable::ModuleTemperature => "Module Temperature",
            Variable::RelativeHumidity => "Relative Humidity",
            Variable::DewPoint => "Dew Point",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    timestamps: Vec<NaiveDateTime>,
    columns: BTreeMap<Variable, Vec<Option<f64>>>,
}

impl WeatherSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>) -> Result<Self, WeatherError> {
        check_grid(&timestamps)?;
        Ok(Self {
            timestamps,
            columns: BTreeMap::new(),
        })
    }

    /// A grid of `len` stamps starting at `start`, `step_minutes` apart.
    pub fn regular(start: NaiveDateTime, step_minutes: i64, len: usize) -> Self {
        let timestamps = (0..len)
            .map(|i| start + Duration::minutes(step_minutes * i as i64))
            .collect();
        Self {
            timestamps,
            columns: BTreeMap::new(),
        }
    }

    pub fn with_column(mut self, var: Variable, values: Vec<Option<f64>>) -> Result<Self, WeatherError> {
        self.set_column(var, values)?;
        Ok(self)
    }

    pub fn with_values(self, var: Variable, values: Vec<f64>) -> Result<Self, WeatherError> {
        self.with_column(var, values.into_iter().map(Some).collect())
    }

    pub fn set_column(&mut self, var: Variable, values: Vec<Option<f64>>) -> Result<(), WeatherError> {
        if values.len() != self.timestamps.len() {
            return Err(WeatherError::LengthMismatch {
                column: var,
                expected: self.timestamps.len(),
                found: values.len(),
            });
        }
        self.columns.insert(var, values);
        Ok(())
    }

    pub fn remove_column(&mut self, var: Variable) -> Option<Vec<Option<f64>>> {
        self.columns.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn has(&self, var: Variable) -> bool {
        self.columns.contains_key(&var)
    }

    pub fn column(&self, var: Variable) -> Option<&[Option<f64>]> {
        self.columns.get(&var).map(|v| v.as_slice())
    }

    pub fn column_mut(&mut self, var: Variable) -> Option<&mut Vec<Option<f64>>> {
        self.columns.get_mut(&var)
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.columns.keys().copied()
    }

    pub fn get(&self, var: Variable, row: usize) -> Option<f64> {
        self.columns.get(&var).and_then(|c| c[row])
    }

    /// Grid spacing in minutes; `None` for fewer than two rows.
    pub fn resolution_minutes(&self) -> Option<i64> {
        match self.timestamps.as_slice() {
            [a, b, ..] => Some((*b - *a).num_minutes()),
            _ => None,
        }
    }

    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    /// Rows with `start <= t < end`.
    pub fn slice(&self, start: NaiveDateTime, end: NaiveDateTime) -> Self {
        let lo = self.timestamps.partition_point(|t| *t < start);
        let hi = self.timestamps.partition_point(|t| *t < end);
        Self {
            timestamps: self.timestamps[lo..hi].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (*k, v[lo..hi].to_vec()))
                .collect(),
        }
    }

    pub fn missing_count(&self, var: Variable) -> usize {
        self.columns
            .get(&var)
            .map(|c| c.iter().filter(|v| v.is_none()).count())
            .unwrap_or(0)
    }
}

fn check_grid(timestamps: &[NaiveDateTime]) -> Result<(), WeatherError> {
    let Some(step) = timestamps.windows(2).next().map(|w| w[1] - w[0]) else {
        return Ok(());
    };
    for (i, w) in timestamps.windows(2).enumerate() {
        let d = w[1] - w[0];
        if d <= Duration::zero() {
            return Err(WeatherError::NotIncreasing(i + 1));
        }
        if d != step {
            return Err(WeatherError::NonUniform(i + 1));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 5, 9)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    #[test]
    fn rejects_non_uniform_grid() {
        assert_eq!(
            WeatherSeries::new(vec![t(0, 0), t(0, 10), t(0, 30)]),
            Err(WeatherError::NonUniform(2))
        );
        assert_eq!(
            WeatherSeries::new(vec![t(0, 10), t(0, 0)]),
            Err(WeatherError::NotIncreasing(1))
        );
    }

    #[test]
    fn slice_is_half_open() {
        let s = WeatherSeries::regular(t(0, 0), 10, 6)
            .with_values(Variable::Ghi, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
            .unwrap();
        let part = s.slice(t(0, 10), t(0, 40));
        assert_eq!(part.len(), 3);
        assert_eq!(part.get(Variable::Ghi, 0), Some(1.0));
        assert_eq!(s.resolution_minutes(), Some(10));
    }
}
