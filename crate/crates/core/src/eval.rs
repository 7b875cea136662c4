//! Forecast error metrics, per-horizon breakdowns with t-intervals, skill
//! scores and best-model heatmaps.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use chrono::{Duration, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::forecast::ForecastSeries;
use crate::weather::{Variable, WeatherSeries};

/// Observations at or below this value are excluded from MAPE.
pub const MAPE_EPSILON: f64 = 10.0;
pub const DAYLIGHT_START_HOUR: u32 = 6;
pub const DAYLIGHT_END_HOUR: u32 = 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{observed} observations for {predicted} predictions")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("no samples left after filtering")]
    EmptyAfterFilter,
    #[error("reference forecast has zero RMSE")]
    ZeroReference,
    #[error("horizon {horizon} has {found} paired samples, need at least 2")]
    InsufficientRuns { horizon: usize, found: usize },
    #[error("unknown metric option {0} (expected 1, 2 or 3)")]
    UnknownOption(String),
    #[error("need at least two models, got {0}")]
    NotEnoughModels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    /// Mean of prediction minus observation.
    pub mbe: f64,
    /// Percent of the mean observation; `None` when that mean is zero.
    pub nrmse: Option<f64>,
    /// Percent; `None` when no observation exceeds the MAPE threshold.
    pub mape: Option<f64>,
    pub n: usize,
}

pub fn is_daylight_stamp(t: NaiveDateTime) -> bool {
    (DAYLIGHT_START_HOUR..DAYLIGHT_END_HOUR).contains(&t.hour())
}

pub fn compute_metrics(
    timestamps: &[NaiveDateTime],
    observed: &[f64],
    predicted: &[f64],
    daylight_filter: bool,
) -> Result<MetricSet, EvalError> {
    if observed.len() != predicted.len() || timestamps.len() != observed.len() {
        return Err(EvalError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = timestamps
        .iter()
        .zip(observed.iter().zip(predicted))
        .filter(|(t, _)| !daylight_filter || is_daylight_stamp(**t))
        .map(|(_, (o, p))| (*o, *p))
        .collect();
    metrics_from_pairs(&pairs)
}

/// Metrics over (observed, predicted) pairs.
pub fn metrics_from_pairs(pairs: &[(f64, f64)]) -> Result<MetricSet, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyAfterFilter);
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(o, p)| (p - o).abs()).sum::<f64>() / n;
    let mse = pairs.iter().map(|(o, p)| (p - o).powi(2)).sum::<f64>() / n;
    let mbe = pairs.iter().map(|(o, p)| p - o).sum::<f64>() / n;
    let mean_obs = pairs.iter().map(|(o, _)| o).sum::<f64>() / n;
    let rmse = mse.sqrt();
    let ape: Vec<f64> = pairs
        .iter()
        .filter(|(o, _)| *o > MAPE_EPSILON)
        .map(|(o, p)| (p - o).abs() / o * 100.0)
        .collect();
    Ok(MetricSet {
        mae,
        rmse,
        mbe,
        nrmse: (mean_obs != 0.0).then(|| rmse / mean_obs * 100.0),
        mape: (!ape.is_empty()).then(|| ape.iter().sum::<f64>() / ape.len() as f64),
        n: pairs.len(),
    })
}

/// Percent improvement of `model` over `reference` in RMSE.
pub fn skill_score(model: &MetricSet, reference: &MetricSet) -> Result<f64, EvalError> {
    if reference.rmse <= 0.0 {
        return Err(EvalError::ZeroReference);
    }
    Ok((1.0 - model.rmse / reference.rmse) * 100.0)
}

/// 95% confidence half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfWidths {
    pub mae: f64,
    /// Delta-method interval on the mean squared error.
    pub rmse: f64,
    pub mbe: f64,
    pub mape: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub metrics: MetricSet,
    pub half_width: HalfWidths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonBreakdown {
    pub horizons: Vec<HorizonMetrics>,
}

/// t_{0.975, n-1} · s / √n for the sample mean of `values`.
pub fn t_half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * sd / nf.sqrt()
}

/// Observation lookup keyed by timestamp (GHI column).
pub struct Observations(HashMap<NaiveDateTime, f64>);

impl Observations {
    pub fn from_series(series: &WeatherSeries) -> Self {
        let map = series
            .column(Variable::Ghi)
            .map(|c| {
                series
                    .timestamps()
                    .iter()
                    .zip(c)
                    .filter_map(|(t, v)| v.map(|v| (*t, v)))
                    .collect()
            })
            .unwrap_or_default();
        Self(map)
    }

    pub fn get(&self, t: NaiveDateTime) -> Option<f64> {
        self.0.get(&t).copied()
    }
}

/// Hour means of 10-minute observations, each labelled by the end of its
/// hour, matching the targets of hourly-averaged forecasts.
pub fn hourly_observations(series: &WeatherSeries) -> WeatherSeries {
    let obs = Observations::from_series(series);
    let mut ends: Vec<NaiveDateTime> = series
        .timestamps()
        .iter()
        .map(|t| {
            let floor = t.date().and_hms_opt(t.hour(), 0, 0).unwrap();
            if *t == floor {
                floor
            } else {
                floor + Duration::hours(1)
            }
        })
        .collect();
    ends.dedup();
    let values = ends
        .iter()
        .map(|end| {
            let members: Vec<f64> = (0..6)
                .filter_map(|k| obs.get(*end - Duration::minutes(10 * k)))
                .collect();
            (members.len() == 6).then(|| members.iter().sum::<f64>() / 6.0)
        })
        .collect();
    WeatherSeries::new(ends)
        .and_then(|s| s.with_column(Variable::Ghi, values))
        .expect("hourly grid")
}

fn pairs_for_horizon(
    runs: &[ForecastSeries],
    obs: &Observations,
    h: usize,
    daylight_filter: bool,
) -> Vec<(f64, f64)> {
    runs.iter()
        .filter(|r| h <= r.horizons())
        .filter_map(|r| {
            let t = r.target_time(h);
            if daylight_filter && !is_daylight_stamp(t) {
                return None;
            }
            obs.get(t).map(|o| (o, r.values[h - 1]))
        })
        .collect()
}

pub fn horizon_breakdown(
    runs: &[ForecastSeries],
    observed: &WeatherSeries,
    daylight_filter: bool,
) -> Result<HorizonBreakdown, EvalError> {
    let obs = Observations::from_series(observed);
    let steps = runs.iter().map(|r| r.horizons()).max().unwrap_or(0);
    if steps == 0 {
        return Err(EvalError::InsufficientRuns { horizon: 1, found: 0 });
    }
    let horizons = (1..=steps)
        .map(|h| {
            let pairs = pairs_for_horizon(runs, &obs, h, daylight_filter);
            if pairs.len() < 2 {
                return Err(EvalError::InsufficientRuns {
                    horizon: h,
                    found: pairs.len(),
                });
            }
            let metrics = metrics_from_pairs(&pairs)?;
            let abs: Vec<f64> = pairs.iter().map(|(o, p)| (p - o).abs()).collect();
            let signed: Vec<f64> = pairs.iter().map(|(o, p)| p - o).collect();
            let sq: Vec<f64> = pairs.iter().map(|(o, p)| (p - o).powi(2)).collect();
            let ape: Vec<f64> = pairs
                .iter()
                .filter(|(o, _)| *o > MAPE_EPSILON)
                .map(|(o, p)| (p - o).abs() / o * 100.0)
                .collect();
            let rmse_hw = if metrics.rmse > 0.0 {
                t_half_width(&sq) / (2.0 * metrics.rmse)
            } else {
                0.0
            };
            Ok(HorizonMetrics {
                horizon: h,
                metrics,
                half_width: HalfWidths {
                    mae: t_half_width(&abs),
                    rmse: rmse_hw,
                    mbe: t_half_width(&signed),
                    mape: (ape.len() >= 2).then(|| t_half_width(&ape)),
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HorizonBreakdown { horizons })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricOption {
    Mae,
    Rmse,
    Mape,
}

impl MetricOption {
    /// Parses the numeric option code: 1 = MAE, 2 = RMSE, 3 = MAPE.
    pub fn from_code(code: &str) -> Result<Self, EvalError> {
        match code.trim() {
            "1" => Ok(Self::Mae),
            "2" => Ok(Self::Rmse),
            "3" => Ok(Self::Mape),
            other => Err(EvalError::UnknownOption(other.to_string())),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Mae => 1,
            Self::Rmse => 2,
            Self::Mape => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Mae => "MAE",
            Self::Rmse => "RMSE",
            Self::Mape => "MAPE",
        }
    }

    pub fn pick(self, m: &MetricSet) -> Option<f64> {
        match self {
            Self::Mae => Some(m.mae),
            Self::Rmse => Some(m.rmse),
            Self::Mape => m.mape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub model: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub metric: MetricOption,
    /// Hour of day of the target stamp.
    pub hours: Vec<u32>,
    pub horizons: Vec<usize>,
    /// `cells[row][col]`; `None` marks a cell without paired samples.
    pub cells: Vec<Vec<Option<HeatmapCell>>>,
}

impl HeatmapGrid {
    pub fn cell(&self, hour: u32, horizon: usize) -> Option<&HeatmapCell> {
        let r = self.hours.iter().position(|h| *h == hour)?;
        let c = self.horizons.iter().position(|h| *h == horizon)?;
        self.cells[r][c].as_ref()
    }

    /// Metric values; empty cells are blank.
    pub fn to_csv(&self) -> String {
        self.render(|c| format!("{:.6}", c.value))
    }

    /// Winning model per cell.
    pub fn legend_csv(&self) -> String {
        self.render(|c| c.model.clone())
    }

    fn render(&self, cell: impl Fn(&HeatmapCell) -> String) -> String {
        let mut out = String::from("hour");
        for h in &self.horizons {
            write!(out, ",{h}").unwrap();
        }
        out.push('\n');
        for (hour, row) in self.hours.iter().zip(&self.cells) {
            write!(out, "{hour}").unwrap();
            for c in row {
                out.push(',');
                if let Some(c) = c {
                    out.push_str(&cell(c));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per (hour, horizon) cell, the model with the smallest metric; ties go to
/// the lexicographically smaller model id.
pub fn best_model_heatmap(
    model_runs: &BTreeMap<String, Vec<ForecastSeries>>,
    observed: &WeatherSeries,
    option: MetricOption,
) -> Result<HeatmapGrid, EvalError> {
    if model_runs.len() < 2 {
        return Err(EvalError::NotEnoughModels(model_runs.len()));
    }
    let obs = Observations::from_series(observed);
    let steps = model_runs
        .values()
        .flat_map(|runs| runs.iter().map(|r| r.horizons()))
        .max()
        .unwrap_or(0);
    let hours: Vec<u32> = (DAYLIGHT_START_HOUR..=DAYLIGHT_END_HOUR).collect();
    let horizons: Vec<usize> = (1..=steps).collect();
    let cells = hours
        .par_iter()
        .map(|&hour| {
            horizons
                .iter()
                .map(|&h| {
                    let mut best: Option<HeatmapCell> = None;
                    for (model, runs) in model_runs {
                        let pairs: Vec<(f64, f64)> = runs
                            .iter()
                            .filter(|r| h <= r.horizons() && r.target_time(h).hour() == hour)
                            .filter_map(|r| obs.get(r.target_time(h)).map(|o| (o, r.values[h - 1])))
                            .collect();
                        let Ok(m) = metrics_from_pairs(&pairs) else {
                            continue;
                        };
                        let Some(value) = option.pick(&m) else {
                            continue;
                        };
                        if best.as_ref().is_none_or(|b| value < b.value) {
                            best = Some(HeatmapCell {
                                model: model.clone(),
                                value,
                            });
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    Ok(HeatmapGrid {
        metric: option,
        hours,
        horizons,
        cells,
    })
}
