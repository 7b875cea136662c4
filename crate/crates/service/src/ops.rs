//! Operations shared by the command-line interface and the HTTP API.
//!
//! Every operation takes parsed inputs and returns an artifact whose `csv`
//! field is the exact file content both front ends emit, so the two paths
//! produce byte-identical results from the same inputs.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use pvtwin_core::eval::{best_model_heatmap, hourly_observations, HeatmapGrid, MetricOption};
use pvtwin_core::forecast::{baseline_smart_persistence, hourly_average, ForecastSeries};
use pvtwin_core::market::{
    aggregate_intraday, build_offer, emit_offer_csv, emit_redispatch_csv, forecast_hourly_power, parse_offer_csv,
    redispatch_check,
    OfferRow, Operation, RedispatchDecision, SlotClimatology, PERIODS,
};
use pvtwin_core::plant::{parse_plant_architecture, Location, PlantSystem};
use pvtwin_core::power::{simulate_plant, SimulationOptions};
use pvtwin_core::qc::{clip_with, impute_with, missing_report, ImputeConfig};
use pvtwin_core::weather::{Variable, WeatherSeries};
use pvtwin_gateway::model_runs::ModelRun;
use pvtwin_gateway::reuniwatt::{records_to_series, Cast, ReuniwattFetch, DATE_FORMAT};
use pvtwin_gateway::{emit_measurements, group_by_model, ingest_ghi_forecast, ingest_measurements, FileFormat};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Seed of the imputation streams used when none is given.
pub const DEFAULT_QC_SEED: u64 = 20240509;
pub const FORECAST_TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ServiceError::not_found("FileNotFound", format!("{} does not exist", path.display())),
        _ => ServiceError::new(crate::error::ErrorClass::Internal, "Io", format!("{}: {e}", path.display())),
    })
}

fn format_of(path: &Path) -> Result<FileFormat, ServiceError> {
    FileFormat::from_path(path).ok_or_else(|| {
        ServiceError::bad_request("UnsupportedFormat", format!("{}: expected a .csv or .xlsx file", path.display()))
    })
}

pub fn load_plant(path: &Path) -> Result<PlantSystem, ServiceError> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| ServiceError::bad_request("Syntax", format!("{} is not UTF-8", path.display())))?;
    Ok(parse_plant_architecture(&text)?)
}

pub fn load_measurements(path: &Path) -> Result<WeatherSeries, ServiceError> {
    Ok(ingest_measurements(&read_bytes(path)?, format_of(path)?)?)
}

pub fn load_ghi_forecast(path: &Path) -> Result<WeatherSeries, ServiceError> {
    Ok(ingest_ghi_forecast(&read_bytes(path)?, format_of(path)?)?)
}

/// GHI forecast as `timestamp,GHI` rows; missing values are skipped.
pub fn ghi_forecast_csv(series: &WeatherSeries) -> String {
    let mut out = String::from("timestamp,GHI\n");
    for (row, t) in series.timestamps().iter().enumerate() {
        if let Some(v) = series.get(Variable::Ghi, row) {
            writeln!(out, "{},{v}", t.format(FORECAST_TIME_FORMAT)).unwrap();
        }
    }
    out
}

/// Writes each downloaded cast as `<dir>/<YYYYMMDD>/<cast>.csv`, one file
/// per calendar day of the forecast stamps. Returns the written paths.
pub fn export_casts(fetch: &ReuniwattFetch, dir: &Path) -> Result<Vec<std::path::PathBuf>, ServiceError> {
    let mut written = Vec::new();
    for cast in Cast::ALL {
        let mut days: Vec<NaiveDate> = fetch
            .records
            .iter()
            .filter(|r| r.cast == cast)
            .map(|r| r.timestamp.date())
            .collect();
        days.dedup();
        days.sort();
        days.dedup();
        for day in days {
            let records = fetch.records.iter().filter(|r| r.cast == cast && r.timestamp.date() == day);
            let Some(series) = records_to_series(records) else { continue };
            let folder = dir.join(day.format(DATE_FORMAT).to_string());
            let path = folder.join(format!("{}.csv", cast.name()));
            std::fs::create_dir_all(&folder)
                .and_then(|_| std::fs::write(&path, ghi_forecast_csv(&series)))
                .map_err(|e| ServiceError::new(crate::error::ErrorClass::Internal, "Io", format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnQc {
    pub variable: Variable,
    pub label: String,
    pub missing_percent: f64,
    pub imputed: usize,
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestArtifact {
    pub series: WeatherSeries,
    pub columns: Vec<ColumnQc>,
    /// The quality-controlled series in measurement-file layout.
    pub csv: String,
}

/// Parses a measurement file, imputes its holes and clips it to physical
/// bounds.
pub fn ingest(bytes: &[u8], format: FileFormat, seed: u64) -> Result<IngestArtifact, ServiceError> {
    let raw = ingest_measurements(bytes, format)?;
    let config = ImputeConfig::default();
    let imputed = impute_with(&raw, seed, &config)?;
    let clipped = clip_with(&imputed, &config.bounds);
    let report = missing_report(&raw);
    let columns = report
        .columns
        .iter()
        .map(|entry| {
            let var = entry.variable;
            let changed = (0..raw.len())
                .filter(|&row| imputed.get(var, row) != clipped.get(var, row))
                .count();
            ColumnQc {
                variable: var,
                label: entry.label.clone(),
                missing_percent: entry.percent,
                imputed: raw.missing_count(var),
                clipped: changed,
            }
        })
        .collect();
    Ok(IngestArtifact {
        csv: emit_measurements(&clipped),
        series: clipped,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub rows: usize,
    pub peak_poi_kw: f64,
    pub energy_kwh: f64,
    /// Per-level power in kW.
    pub csv: String,
    /// Per-inverter energy in kWh.
    pub summary_csv: String,
}

pub fn simulate(system: &PlantSystem, weather: &WeatherSeries) -> Result<SimulationArtifact, ServiceError> {
    let production = simulate_plant(system, weather, &SimulationOptions::default())?;
    let energy_kwh = production
        .inverters
        .iter()
        .flat_map(|i| i.energy.iter().map(|(_, e)| e))
        .sum();
    Ok(SimulationArtifact {
        rows: production.timestamps.len(),
        peak_poi_kw: production.poi.iter().copied().fold(0.0, f64::max) / 1000.0,
        energy_kwh,
        csv: production.to_csv(),
        summary_csv: production.summary_csv(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferArtifact {
    pub operation: Operation,
    pub date: NaiveDate,
    pub availability_mw: f64,
    /// Simulated hourly plant power before the availability cap.
    pub hourly_power_mw: Vec<f64>,
    pub offer: OfferRow,
    pub csv: String,
}

fn check_availability(availability_mw: f64) -> Result<(), ServiceError> {
    if availability_mw.is_finite() && availability_mw >= 0.0 {
        Ok(())
    } else {
        Err(ServiceError::bad_request(
            "InvalidAvailability",
            format!("availability must be a non-negative number of MW, got {availability_mw}"),
        ))
    }
}

/// Day-ahead offer (or pre-offer) for `date` from a GHI forecast.
pub fn offer(
    system: &PlantSystem,
    gfs: &WeatherSeries,
    history: &WeatherSeries,
    operation: Operation,
    date: NaiveDate,
    availability_mw: f64,
) -> Result<OfferArtifact, ServiceError> {
    if operation == Operation::Redispatch {
        return Err(ServiceError::bad_request(
            "UnsupportedOperation",
            "redispatch is evaluated against a committed offer, not built as one",
        ));
    }
    check_availability(availability_mw)?;
    let climatology = SlotClimatology::from_history(history);
    let hourly_power_mw = forecast_hourly_power(system, gfs, &climatology, date)?;
    let csv = emit_offer_csv(&[build_offer(date, &hourly_power_mw, availability_mw)?]);
    // The committed row is the published one, at the file's precision.
    let row = parse_offer_csv(&csv)?.remove(0);
    Ok(OfferArtifact {
        operation,
        date,
        availability_mw,
        hourly_power_mw,
        csv,
        offer: row,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CastContribution {
    pub cast: Cast,
    /// Derated hourly power; `None` where the cast does not cover the period.
    pub periods: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedispatchArtifact {
    pub date: NaiveDate,
    pub casts: Vec<CastContribution>,
    pub intraday_mw: Vec<f64>,
    pub decision: RedispatchDecision,
    pub csv: String,
}

/// Periods in which `series` has at least one GHI value.
fn covered_periods(series: &WeatherSeries, date: NaiveDate) -> Vec<bool> {
    let mut covered = vec![false; PERIODS];
    let start = date.and_hms_opt(0, 0, 0).unwrap();
    for (row, t) in series.timestamps().iter().enumerate() {
        if t.date() == date && series.get(Variable::Ghi, row).is_some() {
            covered[t.hour() as usize] = true;
        } else if *t == start + Duration::days(1) {
            // A value at midnight closes the last period.
            covered[PERIODS - 1] |= series.get(Variable::Ghi, row).is_some();
        }
    }
    covered
}

/// Compares the committed offer with the intraday casts. Each cast is run
/// through the plant model, capped at the availability, and averaged with
/// the other casts over the periods it covers; uncovered periods keep the
/// committed value.
pub fn redispatch(
    system: &PlantSystem,
    committed: &OfferRow,
    availability_mw: f64,
    casts: &[(Cast, WeatherSeries)],
    history: &WeatherSeries,
    margin: f64,
) -> Result<RedispatchArtifact, ServiceError> {
    check_availability(availability_mw)?;
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(ServiceError::bad_request(
            "InvalidMargin",
            format!("margin must be a non-negative fraction, got {margin}"),
        ));
    }
    if casts.is_empty() {
        return Err(ServiceError::not_found(
            "NoIntradayForecast",
            format!("no intraday forecast covers {}", committed.date),
        ));
    }
    let date = committed.date;
    let climatology = SlotClimatology::from_history(history);
    let mut contributions = Vec::new();
    for (cast, series) in casts {
        let covered = covered_periods(series, date);
        if !covered.iter().any(|c| *c) {
            continue;
        }
        let hourly = forecast_hourly_power(system, series, &climatology, date)?;
        let periods = hourly
            .iter()
            .zip(&covered)
            .map(|(p, c)| c.then(|| p.max(0.0).min(availability_mw)))
            .collect();
        contributions.push(CastContribution { cast: *cast, periods });
    }
    let runs: Vec<Vec<Option<f64>>> = contributions.iter().map(|c| c.periods.clone()).collect();
    let intraday_mw = aggregate_intraday(&runs, committed)?;
    let decision = redispatch_check(committed, &intraday_mw, margin)?;
    Ok(RedispatchArtifact {
        date,
        csv: emit_redispatch_csv(date, &committed.values, &intraday_mw),
        casts: contributions,
        intraday_mw,
        decision,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapArtifact {
    pub option: u8,
    pub metric: String,
    pub models: Vec<String>,
    pub grid: HeatmapGrid,
    pub csv: String,
    pub legend_csv: String,
}

/// Best model per (hour of day, horizon). Runs at hourly resolution are
/// scored against hourly means of the observations.
pub fn heatmap(runs: Vec<ModelRun>, observed: &WeatherSeries, option: &str) -> Result<HeatmapArtifact, ServiceError> {
    let option = MetricOption::from_code(option)?;
    let hourly = runs.iter().any(|r| r.forecast.step_minutes == 60);
    let grouped = group_by_model(runs);
    let observed = if hourly { hourly_observations(observed) } else { observed.clone() };
    let grid = best_model_heatmap(&grouped, &observed, option)?;
    Ok(HeatmapArtifact {
        option: option.code(),
        metric: option.label().to_string(),
        models: grouped.keys().cloned().collect(),
        csv: grid.to_csv(),
        legend_csv: grid.legend_csv(),
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineArtifact {
    pub issue_time: NaiveDateTime,
    pub native: ForecastSeries,
    pub hourly: ForecastSeries,
    pub csv: String,
}

pub fn parse_issue_time(s: &str) -> Result<NaiveDateTime, ServiceError> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| ServiceError::bad_request("BadTimestamp", format!("cannot parse issue time {s:?}")))
}

/// Smart-persistence GHI forecast at native and hourly resolution.
pub fn baseline(history: &WeatherSeries, location: &Location, issue_time: NaiveDateTime) -> Result<BaselineArtifact, ServiceError> {
    let native = baseline_smart_persistence(history, location, issue_time)?;
    let hourly = hourly_average(&native)?;
    let mut csv = String::from("resolution_minutes,horizon,target_time,ghi\n");
    for series in [&native, &hourly] {
        for (h, t, v) in series.iter() {
            writeln!(
                csv,
                "{},{h},{},{v:.6}",
                series.step_minutes,
                t.format(FORECAST_TIME_FORMAT)
            )
            .unwrap();
        }
    }
    Ok(BaselineArtifact {
        issue_time,
        native,
        hourly,
        csv,
    })
}

/// Location used for plant-wide solar geometry: the first conversion unit.
pub fn plant_location(system: &PlantSystem) -> Result<Location, ServiceError> {
    system
        .conversion_units
        .first()
        .map(|cu| cu.location)
        .ok_or_else(|| ServiceError::bad_request("EmptyPlant", "plant has no conversion units"))
}
