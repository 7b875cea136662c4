//! Ingest-side quality control of weather series.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::Range;

use chrono::{Datelike, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weather::{Variable, WeatherSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("{column}: slot {slot} has fewer than two samples and no neighbours to interpolate from")]
    InsufficientSlotData { column: Variable, slot: String },
    #[error("{column} is missing at row {row}")]
    IncompleteSeries { column: Variable, row: usize },
    #[error("need at least 10 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("fractions must be non-negative and sum to 1: {0:?}")]
    BadFractions((f64, f64, f64)),
}

/// Percent of missing cells per column, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingReport {
    pub rows: usize,
    pub columns: Vec<MissingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingEntry {
    pub variable: Variable,
    pub label: String,
    pub percent: f64,
}

impl MissingReport {
    pub fn percent(&self, var: Variable) -> Option<f64> {
        self.columns.iter().find(|c| c.variable == var).map(|c| c.percent)
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().all(|c| c.percent == 0.0)
    }
}

pub fn missing_report(series: &WeatherSeries) -> MissingReport {
    let rows = series.len();
    let columns = series
        .variables()
        .map(|var| MissingEntry {
            variable: var,
            label: var.label().to_string(),
            percent: if rows == 0 {
                0.0
            } else {
                series.missing_count(var) as f64 / rows as f64 * 100.0
            },
        })
        .collect();
    MissingReport { rows, columns }
}

/// How rows are pooled into slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SlotKey {
    /// Time of day, all days pooled.
    #[default]
    TimeOfDay,
    /// Month and time of day.
    MonthTimeOfDay,
}

impl SlotKey {
    fn key(self, t: NaiveDateTime) -> (u32, u32) {
        let minute = t.hour() * 60 + t.minute();
        match self {
            SlotKey::TimeOfDay => (0, minute),
            SlotKey::MonthTimeOfDay => (t.month(), minute),
        }
    }

    fn describe(self, key: (u32, u32)) -> String {
        let hm = format!("{:02}:{:02}", key.1 / 60, key.1 % 60);
        match self {
            SlotKey::TimeOfDay => hm,
            SlotKey::MonthTimeOfDay => format!("month {} {hm}", key.0),
        }
    }
}

/// Physical limits; `None` leaves a side open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipBounds {
    pub ghi: (f64, f64),
    pub ambient_temperature: (f64, f64),
    pub wind_speed_min: f64,
    pub relative_humidity: (f64, f64),
}

impl Default for ClipBounds {
    fn default() -> Self {
        Self {
            ghi: (0.0, 1300.0),
            ambient_temperature: (18.0, 45.0),
            wind_speed_min: 0.0,
            relative_humidity: (0.0, 100.0),
        }
    }
}

impl ClipBounds {
    pub fn apply(&self, var: Variable, value: f64) -> f64 {
        match var {
            Variable::Ghi | Variable::Ghi2 => value.clamp(self.ghi.0, self.ghi.1),
            Variable::AmbientTemperature => {
                value.clamp(self.ambient_temperature.0, self.ambient_temperature.1)
            }
            Variable::WindSpeed => value.max(self.wind_speed_min),
            Variable::WindDirection => value.rem_euclid(360.0),
            Variable::RelativeHumidity => {
                value.clamp(self.relative_humidity.0, self.relative_humidity.1)
            }
            Variable::Pressure | Variable::ModuleTemperature | Variable::DewPoint => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ImputeConfig {
    pub slot: SlotKey,
    pub bounds: ClipBounds,
}

pub fn impute_slotwise_normal(series: &WeatherSeries, seed: u64) -> Result<WeatherSeries, QcError> {
    impute_with(series, seed, &ImputeConfig::default())
}

/// Replaces every missing cell with a draw from the normal distribution of
/// the non-missing values sharing its slot. Slots with fewer than two
/// samples fall back to linear interpolation between the nearest non-missing
/// neighbours of the column.
///
/// Each column draws from its own ChaCha stream derived from `seed`, so the
/// result does not depend on how columns are scheduled.
pub fn impute_with(series: &WeatherSeries, seed: u64, config: &ImputeConfig) -> Result<WeatherSeries, QcError> {
    let vars: Vec<Variable> = series.variables().collect();
    let filled = vars
        .par_iter()
        .map(|&var| {
            let column = series.column(var).expect("listed column");
            impute_column(series.timestamps(), column, var, seed, config).map(|c| (var, c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = series.clone();
    for (var, values) in filled {
        out.set_column(var, values).expect("same length");
    }
    Ok(out)
}

fn column_stream(var: Variable) -> u64 {
    Variable::ALL.iter().position(|v| *v == var).unwrap() as u64
}

fn impute_column(
    timestamps: &[NaiveDateTime],
    column: &[Option<f64>],
    var: Variable,
    seed: u64,
    config: &ImputeConfig,
) -> Result<Vec<Option<f64>>, QcError> {
    if column.iter().all(Option::is_some) {
        return Ok(column.to_vec());
    }
    let mut slots: BTreeMap<(u32, u32), Vec<f64>> = BTreeMap::new();
    for (t, v) in timestamps.iter().zip(column) {
        if let Some(v) = v {
            slots.entry(config.slot.key(*t)).or_default().push(*v);
        }
    }
    let stats: BTreeMap<(u32, u32), (f64, f64)> = slots
        .iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(k, s)| (*k, mean_sd(s)))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(column_stream(var));
    let mut out = column.to_vec();
    for (row, cell) in column.iter().enumerate() {
        if cell.is_some() {
            continue;
        }
        let key = config.slot.key(timestamps[row]);
        let value = match stats.get(&key) {
            Some(&(mu, sd)) if sd > 0.0 => Normal::new(mu, sd).expect("finite sd").sample(&mut rng),
            Some(&(mu, _)) => mu,
            None => interpolate(column, row).ok_or_else(|| QcError::InsufficientSlotData {
                column: var,
                slot: config.slot.describe(key),
            })?,
        };
        out[row] = Some(config.bounds.apply(var, value));
    }
    Ok(out)
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn interpolate(column: &[Option<f64>], row: usize) -> Option<f64> {
    let before = column[..row]
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, v)| v.map(|v| (i, v)));
    let after = column[row + 1..]
        .iter()
        .enumerate()
        .find_map(|(i, v)| v.map(|v| (row + 1 + i, v)));
    match (before, after) {
        (Some((i0, v0)), Some((i1, v1))) => {
            let w = (row - i0) as f64 / (i1 - i0) as f64;
            Some(v0 + w * (v1 - v0))
        }
        (Some((_, v)), None) | (None, Some((_, v))) => Some(v),
        (None, None) => None,
    }
}

pub fn clip_physical(series: &WeatherSeries) -> WeatherSeries {
    clip_with(series, &ClipBounds::default())
}

pub fn clip_with(series: &WeatherSeries, bounds: &ClipBounds) -> WeatherSeries {
    let mut out = series.clone();
    let vars: Vec<Variable> = out.variables().collect();
    for var in vars {
        let column = out.column_mut(var).expect("listed column");
        for v in column.iter_mut().flatten() {
            *v = bounds.apply(var, *v);
        }
    }
    out
}

/// Collapses the two pyranometer columns into `Ghi`: their mean where both
/// are present, otherwise whichever is.
pub fn merge_ghi_sensors(series: &WeatherSeries) -> WeatherSeries {
    let mut out = series.clone();
    let Some(second) = out.remove_column(Variable::Ghi2) else {
        return out;
    };
    let first = out
        .column(Variable::Ghi)
        .map(|c| c.to_vec())
        .unwrap_or_else(|| vec![None; second.len()]);
    let merged = first
        .iter()
        .zip(&second)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            (Some(v), None) | (None, Some(v)) => Some(*v),
            (None, None) => None,
        })
        .collect();
    out.set_column(Variable::Ghi, merged).expect("same length");
    out
}

/// Impute, then clip: the standard QC pass.
pub fn quality_control(series: &WeatherSeries, seed: u64, config: &ImputeConfig) -> Result<WeatherSeries, QcError> {
    Ok(clip_with(&impute_with(series, seed, config)?, &config.bounds))
}

/// Sign convention for wind components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindConvention {
    /// Direction is where the wind blows from.
    #[default]
    From,
    /// Direction is where the wind blows to.
    To,
}

pub fn wind_components(speed: f64, direction: f64, convention: WindConvention) -> (f64, f64) {
    let rad = direction.to_radians();
    let sign = match convention {
        WindConvention::From => -1.0,
        WindConvention::To => 1.0,
    };
    (sign * speed * rad.sin(), sign * speed * rad.cos())
}

/// (sin, cos) of the annual and daily cycle angles.
pub fn cyclic_time(t: NaiveDateTime) -> [f64; 4] {
    let doy = 2.0 * PI * t.ordinal() as f64 / 365.25;
    let tod = 2.0 * PI * (t.hour() * 60 + t.minute()) as f64 / 1440.0;
    [doy.sin(), doy.cos(), tod.sin(), tod.cos()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub names: Vec<String>,
    /// Column-major values, one vector per name.
    pub columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self, range: Range<usize>) -> FeatureTable {
        FeatureTable {
            timestamps: self.timestamps[range.clone()].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
        }
    }
}

pub fn engineer_features(series: &WeatherSeries) -> Result<FeatureTable, QcError> {
    engineer_features_with(series, WindConvention::From)
}

pub fn engineer_features_with(series: &WeatherSeries, convention: WindConvention) -> Result<FeatureTable, QcError> {
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for var in series.variables() {
        let column = series.column(var).expect("listed column");
        let values = column
            .iter()
            .enumerate()
            .map(|(row, v)| v.ok_or(QcError::IncompleteSeries { column: var, row }))
            .collect::<Result<Vec<_>, _>>()?;
        names.push(serde_json::to_value(var).unwrap().as_str().unwrap().to_string());
        columns.push(values);
    }
    if let (Some(ws), Some(wd)) = (series.column(Variable::WindSpeed), series.column(Variable::WindDirection)) {
        let (u, v): (Vec<f64>, Vec<f64>) = ws
            .iter()
            .zip(wd)
            .map(|(s, d)| wind_components(s.unwrap(), d.unwrap(), convention))
            .unzip();
        names.extend(["wind_u".to_string(), "wind_v".to_string()]);
        columns.extend([u, v]);
    }
    let cyclic: Vec<[f64; 4]> = series.timestamps().iter().map(|t| cyclic_time(*t)).collect();
    for (i, name) in ["day_sin", "day_cos", "time_sin", "time_cos"].iter().enumerate() {
        names.push(name.to_string());
        columns.push(cyclic.iter().map(|c| c[i]).collect());
    }
    Ok(FeatureTable {
        timestamps: series.timestamps().to_vec(),
        names,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

/// Contiguous chronological partition of `rows` rows.
pub fn split_indices(rows: usize, fractions: (f64, f64, f64)) -> Result<Split, QcError> {
    if rows < 10 {
        return Err(QcError::TooFewRows(rows));
    }
    let (a, b, c) = fractions;
    if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(QcError::BadFractions(fractions));
    }
    let train = (rows as f64 * a).round() as usize;
    let val = ((rows as f64 * b).round() as usize).min(rows - train);
    Ok(Split {
        train: 0..train,
        validation: train..train + val,
        test: train + val..rows,
    })
}

pub fn split_train_val_test(
    table: &FeatureTable,
    fractions: (f64, f64, f64),
) -> Result<(FeatureTable, FeatureTable, FeatureTable), QcError> {
    let s = split_indices(table.len(), fractions)?;
    Ok((table.rows(s.train), table.rows(s.validation), table.rows(s.test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 2, 22)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    #[test]
    fn report_percentages() {
        let s = WeatherSeries::regular(t0(), 10, 4)
            .with_column(Variable::Ghi, vec![Some(1.0), None, Some(2.0), Some(3.0)])
            .unwrap()
            .with_values(Variable::Pressure, vec![1000.0; 4])
            .unwrap();
        let r = missing_report(&s);
        assert_eq!(r.percent(Variable::Ghi), Some(25.0));
        assert_eq!(r.percent(Variable::Pressure), Some(0.0));
    }

    /// Three days, one slot per day at 12:00, third day missing.
    fn three_day_slot(values: [Option<f64>; 4]) -> WeatherSeries {
        let stamps = (0..4).map(|d| t0() + Duration::days(d) + Duration::hours(12)).collect();
        WeatherSeries::new(stamps)
            .unwrap()
            .with_column(Variable::Ghi, values.to_vec())
            .unwrap()
    }

    #[test]
    fn slot_statistics() {
        assert_eq!(mean_sd(&[400.0, 420.0, 440.0]), (420.0, 20.0));
        let s = three_day_slot([Some(400.0), Some(420.0), None, Some(440.0)]);
        let a = impute_slotwise_normal(&s, 7).unwrap();
        let b = impute_slotwise_normal(&s, 7).unwrap();
        assert_eq!(a, b);
        let v = a.get(Variable::Ghi, 2).unwrap();
        assert!((340.0..=500.0).contains(&v), "{v}");
        assert_eq!(a.get(Variable::Ghi, 0), Some(400.0));
    }

    #[test]
    fn degenerate_slot_imputes_mean() {
        let s = three_day_slot([Some(300.0), Some(300.0), None, Some(300.0)]);
        assert_eq!(impute_slotwise_normal(&s, 1).unwrap().get(Variable::Ghi, 2), Some(300.0));
    }

    #[test]
    fn complete_series_is_unchanged() {
        let s = three_day_slot([Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
        assert_eq!(impute_slotwise_normal(&s, 3).unwrap(), s);
    }

    #[test]
    fn sparse_slot_falls_back_to_interpolation() {
        let s = WeatherSeries::regular(t0(), 10, 3)
            .with_column(Variable::Pressure, vec![Some(1000.0), None, Some(1002.0)])
            .unwrap();
        assert_eq!(impute_slotwise_normal(&s, 0).unwrap().get(Variable::Pressure, 1), Some(1001.0));
        let empty = WeatherSeries::regular(t0(), 10, 2)
            .with_column(Variable::Pressure, vec![None, None])
            .unwrap();
        assert!(matches!(
            impute_slotwise_normal(&empty, 0),
            Err(QcError::InsufficientSlotData { column: Variable::Pressure, .. })
        ));
    }

    #[test]
    fn clip_examples() {
        let b = ClipBounds::default();
        assert_eq!(b.apply(Variable::Ghi, 1500.0), 1300.0);
        assert_eq!(b.apply(Variable::Ghi, -3.0), 0.0);
        assert_eq!(b.apply(Variable::AmbientTemperature, 50.0), 45.0);
        assert_eq!(b.apply(Variable::WindSpeed, -0.5), 0.0);
        assert_eq!(b.apply(Variable::WindDirection, 370.0), 10.0);
        assert_eq!(b.apply(Variable::WindDirection, -90.0), 270.0);
    }

    #[test]
    fn merges_two_sensors() {
        let s = WeatherSeries::regular(t0(), 10, 3)
            .with_column(Variable::Ghi, vec![Some(100.0), None, None])
            .unwrap()
            .with_column(Variable::Ghi2, vec![Some(110.0), Some(50.0), None])
            .unwrap();
        let m = merge_ghi_sensors(&s);
        assert!(!m.has(Variable::Ghi2));
        assert_eq!(m.column(Variable::Ghi).unwrap(), &[Some(105.0), Some(50.0), None]);
    }

    #[test]
    fn wind_and_time_features() {
        let (u, v) = wind_components(2.0, 90.0, WindConvention::From);
        assert!((u + 2.0).abs() < 1e-12 && v.abs() < 1e-12);
        assert_eq!(wind_components(0.0, 123.0, WindConvention::From), (-0.0, -0.0));
        let c = cyclic_time(t0() + Duration::hours(6));
        assert!((c[2] - 1.0).abs() < 1e-12 && c[3].abs() < 1e-12);
    }

    #[test]
    fn features_require_complete_series() {
        let s = WeatherSeries::regular(t0(), 10, 2)
            .with_column(Variable::WindSpeed, vec![Some(1.0), None])
            .unwrap();
        assert!(matches!(engineer_features(&s), Err(QcError::IncompleteSeries { row: 1, .. })));
    }

    #[test]
    fn split_sizes() {
        let s = split_indices(100, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        let s = split_indices(10, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        assert_eq!(split_indices(9, (0.8, 0.1, 0.1)), Err(QcError::TooFewRows(9)));
    }
}
