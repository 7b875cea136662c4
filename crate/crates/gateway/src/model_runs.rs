//! Forecast-model run files: one value per row, keyed by a series id that
//! the companion horizons file resolves to (model, horizon, resolution).

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDateTime;
use pvtwin_core::forecast::ForecastSeries;
use serde::Deserialize;

use crate::error::GatewayError;
use crate::measurements::TIMESTAMP_FORMAT;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HorizonInfo {
    pub series_id: String,
    pub horizon: usize,
    pub plant: String,
    pub sensor: String,
    pub model: String,
    /// Step length in minutes.
    pub resolution: i64,
}

#[derive(Debug, Deserialize)]
struct RunRow {
    timestamp: String,
    value: f64,
    series_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model: String,
    pub forecast: ForecastSeries,
}

fn read_rows<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> Result<Vec<T>, GatewayError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| GatewayError::Csv(format!("{what}: {e}")))?;
    if rows.is_empty() {
        return Err(GatewayError::EmptyFile);
    }
    Ok(rows)
}

pub fn parse_horizons(bytes: &[u8]) -> Result<Vec<HorizonInfo>, GatewayError> {
    read_rows(bytes, "horizons file")
}

/// Joins the runs file with the horizons file into complete forecasts,
/// ordered by model then issue time.
pub fn ingest_model_runs(runs_csv: &[u8], horizons_csv: &[u8]) -> Result<Vec<ModelRun>, GatewayError> {
    let horizons: HashMap<String, HorizonInfo> = parse_horizons(horizons_csv)?
        .into_iter()
        .map(|h| (h.series_id.clone(), h))
        .collect();
    let rows: Vec<RunRow> = read_rows(runs_csv, "runs file")?;
    let mut grouped: BTreeMap<(String, NaiveDateTime), (i64, BTreeMap<usize, f64>)> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let info = horizons
            .get(&row.series_id)
            .ok_or_else(|| GatewayError::UnresolvedSeriesId(row.series_id.clone()))?;
        let issue = NaiveDateTime::parse_from_str(&row.timestamp, TIMESTAMP_FORMAT).map_err(|_| {
            GatewayError::BadTimestamp {
                row: i + 2,
                value: row.timestamp.clone(),
            }
        })?;
        let entry = grouped
            .entry((info.model.clone(), issue))
            .or_insert_with(|| (info.resolution, BTreeMap::new()));
        if entry.1.insert(info.horizon, row.value).is_some() {
            return Err(GatewayError::DuplicateRun {
                model: info.model.clone(),
                issue_time: issue,
                horizon: info.horizon,
            });
        }
    }
    grouped
        .into_iter()
        .map(|((model, issue), (resolution, values))| {
            let contiguous = values.keys().enumerate().all(|(i, h)| *h == i + 1);
            if !contiguous {
                return Err(GatewayError::IncompleteRun {
                    model,
                    issue_time: issue,
                    found: values.keys().copied().collect(),
                });
            }
            let forecast = ForecastSeries::new(issue, resolution, values.into_values().collect())?;
            Ok(ModelRun { model, forecast })
        })
        .collect()
}

pub fn group_by_model(runs: Vec<ModelRun>) -> BTreeMap<String, Vec<ForecastSeries>> {
    let mut out: BTreeMap<String, Vec<ForecastSeries>> = BTreeMap::new();
    for run in runs {
        out.entry(run.model).or_default().push(run.forecast);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horizons(models: &[&str], steps: usize) -> String {
        let mut out = String::from("series_id,horizon,plant,sensor,model,resolution\n");
        for (m, model) in models.iter().enumerate() {
            for h in 1..=steps {
                out.push_str(&format!("{}-{h},{h},El Paso,GHI 1,{model},60\n", m + 1));
            }
        }
        out
    }

    fn runs(model_index: usize, issue: &str, steps: usize) -> String {
        (1..=steps)
            .map(|h| format!("{issue},{},{}-{h}\n", 100 * h, model_index))
            .collect()
    }

    #[test]
    fn joins_a_single_run() {
        let r = format!("timestamp,value,series_id\n{}", runs(1, "2024-05-09 09:00:00", 6));
        let out = ingest_model_runs(r.as_bytes(), horizons(&["LSTM"], 6).as_bytes()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].model, "LSTM");
        assert_eq!(out[0].forecast.values, vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0]);
        assert_eq!(out[0].forecast.step_minutes, 60);
    }

    #[test]
    fn two_models_same_issue_time() {
        let r = format!(
            "timestamp,value,series_id\n{}{}",
            runs(1, "2024-05-09 09:00:00", 6),
            runs(2, "2024-05-09 09:00:00", 6)
        );
        let out = ingest_model_runs(r.as_bytes(), horizons(&["LSTM", "Transformer"], 6).as_bytes()).unwrap();
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].model, out[1].model);
        assert_eq!(group_by_model(out).len(), 2);
    }

    #[test]
    fn unknown_series_id() {
        let r = "timestamp,value,series_id\n2024-05-09 09:00:00,1,9-9\n";
        assert!(matches!(
            ingest_model_runs(r.as_bytes(), horizons(&["LSTM"], 6).as_bytes()),
            Err(GatewayError::UnresolvedSeriesId(id)) if id == "9-9"
        ));
    }

    #[test]
    fn duplicates_and_gaps() {
        let r = format!(
            "timestamp,value,series_id\n{}2024-05-09 09:00:00,5,1-3\n",
            runs(1, "2024-05-09 09:00:00", 6)
        );
        assert!(matches!(
            ingest_model_runs(r.as_bytes(), horizons(&["LSTM"], 6).as_bytes()),
            Err(GatewayError::DuplicateRun { horizon: 3, .. })
        ));
        let r = "timestamp,value,series_id\n2024-05-09 09:00:00,1,1-1\n2024-05-09 09:00:00,1,1-3\n";
        assert!(matches!(
            ingest_model_runs(r.as_bytes(), horizons(&["LSTM"], 6).as_bytes()),
            Err(GatewayError::IncompleteRun { .. })
        ));
    }
}
