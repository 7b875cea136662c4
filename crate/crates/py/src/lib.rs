//! Python bindings for the PV plant digital twin.
//!
//! Structured results (artifacts, metrics, solar positions) cross the
//! boundary as plain dictionaries; artifact `csv` fields hold the same bytes
//! the command-line interface writes.

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use pvtwin_core::eval::metrics_from_pairs;
use pvtwin_core::geometry::{relative_airmass as airmass, solar_position as position};
use pvtwin_core::irradiance::disc_dni as disc;
use pvtwin_core::market::{redispatch_check as check, resolve_operation_date, OfferRow, Operation, DEFAULT_MARGIN};
use pvtwin_core::plant::Location;
use pvtwin_gateway::FileFormat;
use pvtwin_service::ops;
use pvtwin_service::ServiceError;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(pvtwin, PvtwinError, PyException, "Raised with `<code>: <message>` when an operation fails.");

fn fail(e: impl Into<ServiceError>) -> PyErr {
    let e = e.into();
    PvtwinError::new_err(format!("{}: {}", e.code, e.message))
}

/// Converts any serializable value into the equivalent Python object.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PvtwinError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    s.parse()
        .map_err(|_| fail(ServiceError::bad_request("InvalidDate", format!("{s:?} is not a YYYY-MM-DD date"))))
}

/// Solar position at a site for a local standard time `YYYY-MM-DDTHH:MM:SS`.
#[pyfunction]
#[pyo3(signature = (latitude, longitude, altitude, time_zone, local_time))]
fn solar_position<'py>(
    py: Python<'py>,
    latitude: f64,
    longitude: f64,
    altitude: f64,
    time_zone: f64,
    local_time: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let location = Location {
        longitude,
        latitude,
        altitude,
        time_zone,
        surface_albedo: 0.2,
    };
    let t = NaiveDateTime::parse_from_str(local_time, "%Y-%m-%dT%H:%M:%S").map_err(|_| {
        fail(ServiceError::bad_request("InvalidTime", format!("{local_time:?} is not YYYY-MM-DDTHH:MM:SS")))
    })?;
    let p = position(&location, t).map_err(|e| PvtwinError::new_err(e.to_string()))?;
    to_py(py, &p)
}

/// Kasten–Young relative airmass; `None` below the horizon.
#[pyfunction]
fn relative_airmass(zenith: f64) -> Option<f64> {
    airmass(zenith)
}

/// Direct normal irradiance from GHI with the DISC model.
#[pyfunction]
#[pyo3(signature = (ghi, zenith, airmass, extraterrestrial=1366.1))]
fn disc_dni(ghi: f64, zenith: f64, airmass: f64, extraterrestrial: f64) -> f64 {
    disc(ghi, zenith, airmass, extraterrestrial).0
}

/// MAE, RMSE, MBE, nRMSE and MAPE of predictions against observations.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    if observed.len() != predicted.len() {
        return Err(fail(ServiceError::bad_request(
            "LengthMismatch",
            format!("{} observations vs {} predictions", observed.len(), predicted.len()),
        )));
    }
    let pairs: Vec<(f64, f64)> = observed.into_iter().zip(predicted).collect();
    to_py(py, &metrics_from_pairs(&pairs).map_err(fail)?)
}

/// Quality-controls a measurement file; returns the cleaned CSV and per-column report.
#[pyfunction]
#[pyo3(signature = (path, seed=ops::DEFAULT_QC_SEED))]
fn ingest<'py>(py: Python<'py>, path: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let path = Path::new(path);
    let format = file_format(path)?;
    let artifact = ops::ingest(&ops::read_bytes(path).map_err(fail)?, format, seed).map_err(fail)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("columns", to_py(py, &artifact.columns)?)?;
    out.set_item("rows", artifact.series.len())?;
    out.set_item("csv", artifact.csv)?;
    Ok(out.into_any())
}

fn file_format(path: &Path) -> PyResult<FileFormat> {
    FileFormat::from_path(path).ok_or_else(|| {
        fail(ServiceError::bad_request(
            "UnsupportedFormat",
            format!("{}: expected a .csv or .xlsx file", path.display()),
        ))
    })
}

/// Simulates a plant architecture over a measured weather file.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, plant_path: &str, weather_path: &str) -> PyResult<Bound<'py, PyAny>> {
    let system = ops::load_plant(Path::new(plant_path)).map_err(fail)?;
    let weather = ops::load_measurements(Path::new(weather_path)).map_err(fail)?;
    to_py(py, &ops::simulate(&system, &weather).map_err(fail)?)
}

/// Day-ahead offer or pre-offer from a GFS GHI forecast.
#[pyfunction]
#[pyo3(signature = (plant_path, gfs_path, historical_path, availability, operation="offer", date=None, today=None))]
#[allow(clippy::too_many_arguments)]
fn offer<'py>(
    py: Python<'py>,
    plant_path: &str,
    gfs_path: &str,
    historical_path: &str,
    availability: f64,
    operation: &str,
    date: Option<&str>,
    today: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let operation = Operation::parse(operation).map_err(fail)?;
    let today = match today {
        Some(t) => parse_date(t)?,
        None => chrono::Local::now().date_naive(),
    };
    let requested = date.map(parse_date).transpose()?;
    let artifact = ops::offer(
        &ops::load_plant(Path::new(plant_path)).map_err(fail)?,
        &ops::load_ghi_forecast(Path::new(gfs_path)).map_err(fail)?,
        &ops::load_measurements(Path::new(historical_path)).map_err(fail)?,
        operation,
        resolve_operation_date(today, operation, requested),
        availability,
    )
    .map_err(fail)?;
    to_py(py, &artifact)
}

/// Compares 24 committed hourly values with an intraday forecast.
#[pyfunction]
#[pyo3(signature = (date, committed, intraday, margin=DEFAULT_MARGIN))]
fn redispatch_check<'py>(
    py: Python<'py>,
    date: &str,
    committed: Vec<f64>,
    intraday: Vec<f64>,
    margin: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let row = OfferRow::new(parse_date(date)?, committed).map_err(fail)?;
    to_py(py, &check(&row, &intraday, margin).map_err(fail)?)
}

#[pymodule]
fn pvtwin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PvtwinError", m.py().get_type::<PvtwinError>())?;
    m.add("SCHEMA_VERSION", pvtwin_service::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(solar_position, m)?)?;
    m.add_function(wrap_pyfunction!(relative_airmass, m)?)?;
    m.add_function(wrap_pyfunction!(disc_dni, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(offer, m)?)?;
    m.add_function(wrap_pyfunction!(redispatch_check, m)?)?;
    Ok(())
}
