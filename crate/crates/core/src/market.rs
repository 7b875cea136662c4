//! Intraday-market operations: hourly offers derated by availability, the
//! redispatch band check, penalty estimation and the CSV layouts exchanged
//! with the market desk.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::PlantSystem;
use crate::power::{simulate_plant, SimulationError, SimulationOptions};
use crate::weather::{Variable, WeatherSeries};

pub const PERIODS: usize = 24;
pub const DEFAULT_MARGIN: f64 = 0.05;
/// Half-width (MW) of the band around a zero commitment.
pub const ZERO_COMMITMENT_FLOOR: f64 = 0.5;
pub const DEFAULT_PENALTY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("expected 24 periods, got {0}")]
    WrongPeriodCount(usize),
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },
    #[error("forecast has no GHI values for {0}")]
    EmptyForecast(NaiveDate),
    #[error("historical data has no {0} values")]
    MissingHistorical(Variable),
    #[error("unknown operation {0:?} (expected offer, pre_offer or redispatch)")]
    UnknownOperation(String),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Offer,
    PreOffer,
    Redispatch,
}

impl Operation {
    pub fn parse(s: &str) -> Result<Self, MarketError> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "offer" => Ok(Self::Offer),
            "pre_offer" | "preoffer" => Ok(Self::PreOffer),
            "redispatch" => Ok(Self::Redispatch),
            _ => Err(MarketError::UnknownOperation(s.to_string())),
        }
    }
}

/// Requested date if given; otherwise tomorrow for an offer, the day after
/// tomorrow for a pre-offer and today for a redispatch.
pub fn resolve_operation_date(today: NaiveDate, operation: Operation, requested: Option<NaiveDate>) -> NaiveDate {
    requested.unwrap_or_else(|| match operation {
        Operation::Offer => today + Duration::days(1),
        Operation::PreOffer => today + Duration::days(2),
        Operation::Redispatch => today,
    })
}

/// Average MW per hourly period 1..=24 for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferRow {
    pub date: NaiveDate,
    pub values: Vec<f64>,
}

impl OfferRow {
    pub fn new(date: NaiveDate, values: Vec<f64>) -> Result<Self, MarketError> {
        check_periods(&values)?;
        Ok(Self { date, values })
    }

    /// Offered energy per period, MWh (one-hour periods).
    pub fn energy_mwh(&self) -> &[f64] {
        &self.values
    }
}

fn check_periods(values: &[f64]) -> Result<(), MarketError> {
    if values.len() == PERIODS {
        Ok(())
    } else {
        Err(MarketError::WrongPeriodCount(values.len()))
    }
}

/// Caps each period at the declared availability.
pub fn build_offer(date: NaiveDate, hourly_power_mw: &[f64], availability_mw: f64) -> Result<OfferRow, MarketError> {
    check_periods(hourly_power_mw)?;
    let cap = availability_mw.max(0.0);
    let values = hourly_power_mw.iter().map(|p| p.max(0.0).min(cap)).collect();
    Ok(OfferRow { date, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCheck {
    pub period: usize,
    pub committed_mw: f64,
    pub intraday_mw: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub outside_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedispatchDecision {
    pub date: NaiveDate,
    pub margin: f64,
    pub periods: Vec<PeriodCheck>,
    pub redispatch_required: bool,
}

impl RedispatchDecision {
    pub fn breached_periods(&self) -> Vec<usize> {
        self.periods.iter().filter(|p| p.outside_band).map(|p| p.period).collect()
    }
}

pub fn redispatch_band(committed: f64, margin: f64) -> (f64, f64) {
    if committed == 0.0 {
        (-ZERO_COMMITMENT_FLOOR, ZERO_COMMITMENT_FLOOR)
    } else {
        (committed * (1.0 - margin), committed * (1.0 + margin))
    }
}

pub fn redispatch_check(committed: &OfferRow, intraday_mw: &[f64], margin: f64) -> Result<RedispatchDecision, MarketError> {
    check_periods(&committed.values)?;
    check_periods(intraday_mw)?;
    let periods: Vec<PeriodCheck> = committed
        .values
        .iter()
        .zip(intraday_mw)
        .enumerate()
        .map(|(i, (&c, &x))| {
            let (lo, hi) = redispatch_band(c, margin);
            PeriodCheck {
                period: i + 1,
                committed_mw: c,
                intraday_mw: x,
                band_low: lo,
                band_high: hi,
                outside_band: x < lo || x > hi,
            }
        })
        .collect();
    Ok(RedispatchDecision {
        date: committed.date,
        margin,
        redispatch_required: periods.iter().any(|p| p.outside_band),
        periods,
    })
}

/// Mean over the runs covering each period; uncovered periods keep the
/// committed value.
pub fn aggregate_intraday(runs: &[Vec<Option<f64>>], committed: &OfferRow) -> Result<Vec<f64>, MarketError> {
    if let Some(r) = runs.iter().find(|r| r.len() != PERIODS) {
        return Err(MarketError::WrongPeriodCount(r.len()));
    }
    Ok((0..PERIODS)
        .map(|p| {
            let present: Vec<f64> = runs.iter().filter_map(|r| r[p]).collect();
            if present.is_empty() {
                committed.values[p]
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPeriod {
    pub period: usize,
    pub offered_mwh: f64,
    pub delivered_mwh: f64,
    pub excess_mwh: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyEstimate {
    pub periods: Vec<PenaltyPeriod>,
    pub total: f64,
}

pub fn penalty_charge(offered: f64, delivered: f64, tolerance: f64, price: f64) -> (f64, f64) {
    let excess = ((delivered - offered).abs() - tolerance * offered).max(0.0);
    (excess, price * excess)
}

/// Deadband-linear charge on deviations beyond `tolerance · offered`.
pub fn estimate_penalty(
    offered: &OfferRow,
    delivered_mwh: &[f64],
    tolerance: f64,
    unit_price: f64,
) -> Result<PenaltyEstimate, MarketError> {
    check_periods(delivered_mwh)?;
    let periods: Vec<PenaltyPeriod> = offered
        .energy_mwh()
        .iter()
        .zip(delivered_mwh)
        .enumerate()
        .map(|(i, (&o, &d))| {
            let (excess, charge) = penalty_charge(o, d, tolerance, unit_price);
            PenaltyPeriod {
                period: i + 1,
                offered_mwh: o,
                delivered_mwh: d,
                excess_mwh: excess,
                charge,
            }
        })
        .collect();
    Ok(PenaltyEstimate {
        total: periods.iter().map(|p| p.charge).sum(),
        periods,
    })
}

/// Three-decimal rendering without trailing zeros.
pub fn format_mw(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

fn period_header(label: &str) -> String {
    let mut out = label.to_string();
    for p in 1..=PERIODS {
        write!(out, ",{p}").unwrap();
    }
    out
}

fn data_row(label: &str, values: &[f64]) -> String {
    let mut out = label.to_string();
    for v in values {
        out.push(',');
        out.push_str(&format_mw(*v));
    }
    out
}

/// Offer layout: a `Period,1,…,24` header and one row per date.
pub fn emit_offer_csv(rows: &[OfferRow]) -> String {
    let mut out = period_header("Period");
    out.push('\n');
    for r in rows {
        out.push_str(&data_row(&r.date.format("%Y-%m-%d").to_string(), &r.values));
        out.push('\n');
    }
    out
}

fn parse_values(line: usize, cells: &[&str]) -> Result<Vec<f64>, MarketError> {
    if cells.len() != PERIODS {
        return Err(MarketError::MalformedCsv {
            line,
            message: format!("expected 24 values, got {}", cells.len()),
        });
    }
    cells
        .iter()
        .map(|c| {
            c.trim().parse::<f64>().map_err(|e| MarketError::MalformedCsv {
                line,
                message: format!("{c:?}: {e}"),
            })
        })
        .collect()
}

fn check_header(line: &str, label: Option<&str>) -> Result<String, MarketError> {
    let cells: Vec<&str> = line.split(',').collect();
    let expected: Vec<String> = (1..=PERIODS).map(|p| p.to_string()).collect();
    let ok = cells.len() == PERIODS + 1
        && cells[1..].iter().zip(&expected).all(|(a, b)| a.trim() == b)
        && label.is_none_or(|l| cells[0] == l);
    if !ok {
        return Err(MarketError::MalformedCsv {
            line: 1,
            message: format!("unexpected header {line:?}"),
        });
    }
    Ok(cells[0].to_string())
}

fn parse_date(line: usize, s: &str) -> Result<NaiveDate, MarketError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| MarketError::MalformedCsv {
        line,
        message: format!("bad date {s:?}: {e}"),
    })
}

pub fn parse_offer_csv(text: &str) -> Result<Vec<OfferRow>, MarketError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(MarketError::MalformedCsv {
        line: 1,
        message: "empty document".into(),
    })?;
    check_header(header, Some("Period"))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            Ok(OfferRow {
                date: parse_date(i + 2, cells[0])?,
                values: parse_values(i + 2, &cells[1..])?,
            })
        })
        .collect()
}

/// Redispatch layout: the date heads the period header; one row for the
/// day-ahead (GFS) plan and one for the intraday (Reuniwatt) estimate.
pub fn emit_redispatch_csv(date: NaiveDate, gfs: &[f64], reuniwatt: &[f64]) -> String {
    format!(
        "{}\n{}\n{}\n",
        period_header(&date.format("%Y-%m-%d").to_string()),
        data_row("GFS", gfs),
        data_row("Reuniwatt", reuniwatt)
    )
}

pub type RedispatchTable = (NaiveDate, Vec<f64>, Vec<f64>);

pub fn parse_redispatch_csv(text: &str) -> Result<RedispatchTable, MarketError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 3 {
        return Err(MarketError::MalformedCsv {
            line: 1,
            message: format!("expected 3 lines, got {}", lines.len()),
        });
    }
    let date = parse_date(1, &check_header(lines[0], None)?)?;
    let mut rows = Vec::new();
    for (i, label) in [(1, "GFS"), (2, "Reuniwatt")] {
        let cells: Vec<&str> = lines[i].split(',').collect();
        if cells[0] != label {
            return Err(MarketError::MalformedCsv {
                line: i + 1,
                message: format!("expected row {label}, got {:?}", cells[0]),
            });
        }
        rows.push(parse_values(i + 1, &cells[1..])?);
    }
    let reuniwatt = rows.pop().unwrap();
    let gfs = rows.pop().unwrap();
    Ok((date, gfs, reuniwatt))
}

/// Time-of-day means of the auxiliary variables in a historical series.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotClimatology {
    means: BTreeMap<Variable, BTreeMap<u32, f64>>,
}

impl SlotClimatology {
    pub fn from_history(history: &WeatherSeries) -> Self {
        let mut means = BTreeMap::new();
        for var in history.variables() {
            if matches!(var, Variable::Ghi | Variable::Ghi2) {
                continue;
            }
            let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
            for (t, v) in history.timestamps().iter().zip(history.column(var).unwrap()) {
                if let Some(v) = v {
                    let e = acc.entry(t.hour() * 60 + t.minute()).or_default();
                    e.0 += v;
                    e.1 += 1;
                }
            }
            if !acc.is_empty() {
                means.insert(var, acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect());
            }
        }
        Self { means }
    }

    /// Slot mean at `minute_of_day`, using the circularly nearest slot
    /// when that minute was never observed.
    pub fn value(&self, var: Variable, minute_of_day: u32) -> Option<f64> {
        let slots = self.means.get(&var)?;
        if let Some(v) = slots.get(&minute_of_day) {
            return Some(*v);
        }
        slots
            .iter()
            .min_by_key(|(k, _)| {
                let d = (**k as i64 - minute_of_day as i64).rem_euclid(1440);
                d.min(1440 - d)
            })
            .map(|(_, v)| *v)
    }

    pub fn has(&self, var: Variable) -> bool {
        self.means.contains_key(&var)
    }
}

/// Linear interpolation of an (hourly or coarser) GHI forecast onto the
/// 10-minute grid of `date`; stamps outside the forecast hold the nearest
/// end value.
pub fn interpolate_ghi(forecast: &WeatherSeries, date: NaiveDate, step_minutes: i64) -> Result<Vec<(NaiveDateTime, f64)>, MarketError> {
    let points: Vec<(NaiveDateTime, f64)> = forecast
        .column(Variable::Ghi)
        .map(|c| {
            forecast
                .timestamps()
                .iter()
                .zip(c)
                .filter_map(|(t, v)| v.map(|v| (*t, v.max(0.0))))
                .collect()
        })
        .unwrap_or_default();
    if points.is_empty() {
        return Err(MarketError::EmptyForecast(date));
    }
    let start = date.and_hms_opt(0, 0, 0).unwrap();
    let n = (1440 / step_minutes) as usize;
    Ok((0..n)
        .map(|i| {
            let t = start + Duration::minutes(step_minutes * i as i64);
            let k = points.partition_point(|(pt, _)| *pt <= t);
            let v = if k == 0 {
                points[0].1
            } else if k == points.len() {
                points[k - 1].1
            } else {
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                let w = (t - t0).num_seconds() as f64 / (t1 - t0).num_seconds() as f64;
                v0 + w * (v1 - v0)
            };
            (t, v)
        })
        .collect())
}

/// Hourly average plant AC power (MW) for `date` from a GHI forecast.
///
/// The forecast is interpolated to 10 minutes, ambient temperature and
/// wind speed are filled from the historical slot means, the plant is
/// simulated, and the point-of-interconnection power is averaged per clock
/// hour: period `p` covers `[p-1, p)` hours.
pub fn forecast_hourly_power(
    system: &PlantSystem,
    ghi_forecast: &WeatherSeries,
    climatology: &SlotClimatology,
    date: NaiveDate,
) -> Result<Vec<f64>, MarketError> {
    const STEP: i64 = 10;
    let grid = interpolate_ghi(ghi_forecast, date, STEP)?;
    let start = grid[0].0;
    let mut weather = WeatherSeries::regular(start, STEP, grid.len())
        .with_values(Variable::Ghi, grid.iter().map(|(_, v)| *v).collect())
        .expect("grid length");
    for var in [Variable::AmbientTemperature, Variable::WindSpeed, Variable::Pressure] {
        if !climatology.has(var) {
            if var == Variable::AmbientTemperature {
                return Err(MarketError::MissingHistorical(var));
            }
            continue;
        }
        let values = grid
            .iter()
            .map(|(t, _)| climatology.value(var, t.hour() * 60 + t.minute()))
            .collect();
        weather.set_column(var, values).expect("grid length");
    }
    let production = simulate_plant(system, &weather, &SimulationOptions::default())?;
    let per_hour = (60 / STEP) as usize;
    Ok(production
        .poi
        .chunks(per_hour)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64 / 1e6)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 5, 9).unwrap()
    }

    fn profile() -> Vec<f64> {
        let mut v = vec![0.0; 24];
        v[10] = 58.0;
        v[11] = 69.0;
        v[12] = 69.0;
        v
    }

    #[test]
    fn date_defaults() {
        let today = NaiveDate::from_ymd_opt(2024, 5, 8).unwrap();
        assert_eq!(resolve_operation_date(today, Operation::Offer, None), day());
        assert_eq!(
            resolve_operation_date(today, Operation::PreOffer, None),
            NaiveDate::from_ymd_opt(2024, 5, 10).unwrap()
        );
        let req = NaiveDate::from_ymd_opt(2024, 6, 1).unwrap();
        assert_eq!(resolve_operation_date(today, Operation::PreOffer, Some(req)), req);
    }

    #[test]
    fn offer_caps_at_availability() {
        let o = build_offer(day(), &profile(), 80.0).unwrap();
        assert_eq!(&o.values[10..13], &[58.0, 69.0, 69.0]);
        let capped = build_offer(day(), &profile(), 60.0).unwrap();
        assert_eq!(&capped.values[10..13], &[58.0, 60.0, 60.0]);
        assert!(build_offer(day(), &profile(), 0.0).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(matches!(build_offer(day(), &[1.0; 23], 1.0), Err(MarketError::WrongPeriodCount(23))));
    }

    #[test]
    fn redispatch_examples() {
        let mut committed = vec![0.0; 24];
        committed[10] = 68.0;
        let c = OfferRow::new(day(), committed).unwrap();
        let mut intraday = vec![0.0; 24];
        intraday[10] = 69.0;
        let d = redispatch_check(&c, &intraday, 0.05).unwrap();
        assert!(!d.redispatch_required);
        assert!((d.periods[10].band_low - 64.6).abs() < 1e-9);
        assert!((d.periods[10].band_high - 71.4).abs() < 1e-9);
        intraday[10] = 60.0;
        let d = redispatch_check(&c, &intraday, 0.05).unwrap();
        assert!(d.redispatch_required);
        assert_eq!(d.breached_periods(), vec![11]);
    }

    #[test]
    fn intraday_aggregation() {
        let c = OfferRow::new(day(), vec![7.0; 24]).unwrap();
        let mut a = vec![Some(66.0); 24];
        let mut b = vec![Some(72.0); 24];
        a[4] = None;
        b[4] = None;
        let agg = aggregate_intraday(&[a.clone(), b], &c).unwrap();
        assert_eq!(agg[0], 69.0);
        assert_eq!(agg[4], 7.0);
        assert_eq!(aggregate_intraday(&[a], &c).unwrap()[0], 66.0);
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_charge(100.0, 90.0, 0.05, 10.0), (5.0, 50.0));
        assert_eq!(penalty_charge(100.0, 100.0, 0.05, 10.0).1, 0.0);
        assert_eq!(penalty_charge(0.0, 0.0, 0.05, 10.0).1, 0.0);
    }

    #[test]
    fn offer_csv_layout() {
        let o = build_offer(day(), &profile(), 80.0).unwrap();
        let csv = emit_offer_csv(&[o.clone()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("Period,1,2,3"));
        assert!(lines[0].ends_with(",24"));
        assert_eq!(lines[1], "2024-05-09,0,0,0,0,0,0,0,0,0,0,58,69,69,0,0,0,0,0,0,0,0,0,0,0");
        assert_eq!(parse_offer_csv(&csv).unwrap(), vec![o]);
    }

    #[test]
    fn redispatch_csv_layout() {
        let csv = emit_redispatch_csv(day(), &profile(), &profile());
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("2024-05-09,1,2"));
        assert!(lines[1].starts_with("GFS,"));
        assert!(lines[2].starts_with("Reuniwatt,"));
        let (d, g, r) = parse_redispatch_csv(&csv).unwrap();
        assert_eq!((d, g, r), (day(), profile(), profile()));
    }

    #[test]
    fn number_format() {
        assert_eq!(format_mw(58.0), "58");
        assert_eq!(format_mw(12.34567), "12.346");
        assert_eq!(format_mw(-0.0001), "0");
    }

    #[test]
    fn interpolation_to_ten_minutes() {
        let hourly = WeatherSeries::regular(day().and_hms_opt(0, 0, 0).unwrap(), 60, 24)
            .with_values(Variable::Ghi, (0..24).map(|h| h as f64 * 60.0).collect())
            .unwrap();
        let g = interpolate_ghi(&hourly, day(), 10).unwrap();
        assert_eq!(g.len(), 144);
        assert_eq!(g[1].1, 10.0);
        assert_eq!(g[143].1, 23.0 * 60.0);
    }
}
