//! Client for the plant historian (PI web API).
//!
//! Ranges are requested one calendar day at a time; the fetched series is
//! written to the secondary database only after every chunk arrived, so a
//! transport failure leaves the database untouched.

use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use pvtwin_core::weather::{Variable, WeatherSeries};
use serde::Deserialize;
use serde_json::Value;

use crate::error::GatewayError;
use crate::measurements::{MEASUREMENT_HEADERS, MEASUREMENT_VARIABLES};
use crate::store::Store;
use crate::transport::{Request, Transport};

pub const PI_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Minute,
    Hourly,
    Daily,
}

impl Frequency {
    pub fn parse(s: &str) -> Result<Self, GatewayError> {
        match s {
            "minute" => Ok(Self::Minute),
            "hourly" => Ok(Self::Hourly),
            "daily" => Ok(Self::Daily),
            other => Err(GatewayError::UnknownFreq(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Minute => "minute",
            Self::Hourly => "hourly",
            Self::Daily => "daily",
        }
    }

    /// Interval code sent to the server.
    pub fn interval(self) -> &'static str {
        match self {
            Self::Minute => "1m",
            Self::Hourly => "1h",
            Self::Daily => "1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiConfig {
    pub base_url: String,
    pub user: String,
    pub password: String,
}

impl PiConfig {
    /// Reads `PI_BASE_URL`, `PI_USER` and `PI_PASS`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let var = |name: &'static str| std::env::var(name).map_err(|_| GatewayError::MissingConfig(name));
        Ok(Self {
            base_url: var("PI_BASE_URL")?,
            user: var("PI_USER")?,
            password: var("PI_PASS")?,
        })
    }
}

#[derive(Deserialize)]
struct PiPage {
    #[serde(rename = "Items")]
    items: Vec<serde_json::Map<String, Value>>,
}

pub struct PiClient<T: Transport> {
    config: PiConfig,
    transport: T,
}

fn parse_time(s: &str) -> Result<NaiveDateTime, GatewayError> {
    NaiveDateTime::parse_from_str(s, PI_TIME_FORMAT).map_err(|_| GatewayError::BadTimestamp {
        row: 0,
        value: s.to_string(),
    })
}

impl<T: Transport> PiClient<T> {
    pub fn new(config: PiConfig, transport: T) -> Self {
        Self { config, transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Fetches `[start, end]` at `freq`, persists it to table `pi_<freq>` of
    /// `secondary_database`, and returns it.
    pub fn fetch_pi(
        &self,
        start_date: &str,
        end_date: &str,
        freq: &str,
        secondary_database: &Path,
    ) -> Result<WeatherSeries, GatewayError> {
        let freq = Frequency::parse(freq)?;
        let (start, end) = (parse_time(start_date)?, parse_time(end_date)?);
        if start >= end {
            return Err(GatewayError::InvalidRange {
                start: start_date.to_string(),
                end: end_date.to_string(),
            });
        }
        let mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)> = Vec::new();
        let mut chunk_start = start;
        while chunk_start <= end {
            let next_day = chunk_start.date().and_hms_opt(0, 0, 0).unwrap() + Duration::days(1);
            let chunk_end = end.min(next_day - Duration::seconds(1));
            let request = Request::get(format!("{}/streams/values", self.config.base_url.trim_end_matches('/')))
                .query("start", chunk_start.format(PI_TIME_FORMAT).to_string())
                .query("end", chunk_end.format(PI_TIME_FORMAT).to_string())
                .query("interval", freq.interval())
                .basic_auth(&self.config.user, &self.config.password);
            let body = self.transport.get(&request)?;
            let page: PiPage =
                serde_json::from_slice(&body).map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
            for item in page.items {
                let t = item
                    .get("Timestamp")
                    .and_then(Value::as_str)
                    .ok_or_else(|| GatewayError::MalformedPayload("item without Timestamp".into()))
                    .and_then(parse_time)?;
                if t < chunk_start || t > chunk_end {
                    continue;
                }
                let values = MEASUREMENT_HEADERS[1..]
                    .iter()
                    .map(|name| item.get(*name).and_then(Value::as_f64))
                    .collect();
                rows.push((t, values));
            }
            chunk_start = next_day;
        }
        if rows.is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        let series = to_series(rows, freq)?;
        let mut store = Store::open(secondary_database)?;
        store.store_series(&format!("pi_{}", freq.name()), &series)?;
        Ok(series)
    }
}

fn to_series(mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)>, freq: Frequency) -> Result<WeatherSeries, GatewayError> {
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(GatewayError::DuplicateStamp(w[0].0));
    }
    let step = match freq {
        Frequency::Minute => 1,
        Frequency::Hourly => 60,
        Frequency::Daily => 1440,
    };
    let start = rows[0].0;
    let n = ((rows.last().unwrap().0 - start).num_minutes() / step) as usize + 1;
    let mut columns = vec![vec![None; n]; MEASUREMENT_VARIABLES.len()];
    for (t, values) in rows {
        let offset = (t - start).num_minutes();
        if offset % step != 0 || (t - start).num_seconds() % 60 != 0 {
            return Err(GatewayError::OffGrid(t));
        }
        for (c, v) in columns.iter_mut().zip(values) {
            c[(offset / step) as usize] = v;
        }
    }
    let mut series = WeatherSeries::regular(start, step, n);
    for (var, col) in MEASUREMENT_VARIABLES.iter().zip(columns) {
        series.set_column(*var, col)?;
    }
    Ok(series)
}

/// Names of the variables a PI item may carry, in item-key form.
pub fn item_keys() -> impl Iterator<Item = (&'static str, Variable)> {
    MEASUREMENT_HEADERS[1..].iter().copied().zip(MEASUREMENT_VARIABLES)
}
