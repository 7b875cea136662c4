//! Client for the Reuniwatt forecast service: daycast, hourcast and
//! instacast GHI forecasts plus sky images, stored under
//! `downloads/reuniwatt/<YYYYMMDD>/`.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use log::warn;
use pvtwin_core::weather::{Variable, WeatherSeries};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, GatewayError};
use crate::transport::{Request, Transport};

pub const DATE_FORMAT: &str = "%Y%m%d";
pub const DEFAULT_BASE_URL: &str = "https://api.reuniwatt.com";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cast {
    Daycast,
    Hourcast,
    Instacast,
}

impl Cast {
    pub const ALL: [Cast; 3] = [Cast::Daycast, Cast::Hourcast, Cast::Instacast];

    pub fn name(self) -> &'static str {
        match self {
            Cast::Daycast => "daycast",
            Cast::Hourcast => "hourcast",
            Cast::Instacast => "instacast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CastRecord {
    pub cast: Cast,
    pub timestamp: NaiveDateTime,
    pub ghi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReuniwattConfig {
    pub base_url: String,
    pub token: String,
}

impl ReuniwattConfig {
    /// Reads `REUNIWATT_TOKEN` and, optionally, `REUNIWATT_BASE_URL`.
    pub fn from_env() -> Result<Self, GatewayError> {
        Ok(Self {
            base_url: std::env::var("REUNIWATT_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            token: std::env::var("REUNIWATT_TOKEN").map_err(|_| GatewayError::MissingConfig("REUNIWATT_TOKEN"))?,
        })
    }
}

#[derive(Deserialize)]
struct Point {
    timestamp: String,
    ghi: f64,
}

#[derive(Deserialize)]
struct Image {
    name: String,
    url: String,
}

#[derive(Deserialize)]
struct Payload {
    daycast: Option<Vec<Point>>,
    hourcast: Option<Vec<Point>>,
    instacast: Option<Vec<Point>>,
    #[serde(default)]
    images: Vec<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub date: String,
    pub casts: Vec<Cast>,
    pub images: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReuniwattFetch {
    pub records: Vec<CastRecord>,
    pub manifests: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl ReuniwattFetch {
    /// GHI series of one cast, or `None` when no day carried it.
    pub fn cast_series(&self, cast: Cast) -> Option<WeatherSeries> {
        records_to_series(self.records.iter().filter(|r| r.cast == cast))
    }
}

/// Series of GHI points; gaps in the grid become missing cells.
pub fn records_to_series<'a>(records: impl Iterator<Item = &'a CastRecord>) -> Option<WeatherSeries> {
    let mut points: Vec<(NaiveDateTime, f64)> = records.map(|r| (r.timestamp, r.ghi)).collect();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);
    let start = points.first()?.0;
    let step = points.windows(2).map(|w| (w[1].0 - w[0].0).num_minutes()).min().unwrap_or(60).max(1);
    let n = ((points.last().unwrap().0 - start).num_minutes() / step) as usize + 1;
    let mut ghi = vec![None; n];
    for (t, v) in points {
        ghi[((t - start).num_minutes() / step) as usize] = Some(v);
    }
    WeatherSeries::regular(start, step, n).with_column(Variable::Ghi, ghi).ok()
}

pub struct ReuniwattClient<T: Transport> {
    config: ReuniwattConfig,
    transport: T,
}

struct DayDownload {
    date: NaiveDate,
    raw: Vec<u8>,
    casts: Vec<Cast>,
    images: Vec<(String, Vec<u8>)>,
}

fn parse_date(s: &str) -> Result<NaiveDate, GatewayError> {
    NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|_| GatewayError::BadTimestamp {
        row: 0,
        value: s.to_string(),
    })
}

impl<T: Transport> ReuniwattClient<T> {
    pub fn new(config: ReuniwattConfig, transport: T) -> Self {
        Self { config, transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn request(&self, path: &str) -> Request {
        Request::get(format!("{}{}", self.config.base_url.trim_end_matches('/'), path))
            .header("Authorization", format!("Bearer {}", self.config.token))
    }

    /// Downloads every day in `[date_start, date_stop]` (YYYYMMDD). Nothing is
    /// written under `downloads` unless all days were fetched.
    pub fn fetch_reuniwatt(&self, date_start: &str, date_stop: &str, downloads: &Path) -> Result<ReuniwattFetch, GatewayError> {
        let (start, stop) = (parse_date(date_start)?, parse_date(date_stop)?);
        if stop < start {
            return Err(GatewayError::InvalidRange {
                start: date_start.to_string(),
                end: date_stop.to_string(),
            });
        }
        let mut records = Vec::new();
        let mut warnings = Vec::new();
        let mut days = Vec::new();
        let mut date = start;
        while date <= stop {
            let stamp = date.format(DATE_FORMAT).to_string();
            let raw = self.transport.get(&self.request("/forecasts").query("date", stamp.clone()))?;
            let payload: Payload =
                serde_json::from_slice(&raw).map_err(|e| GatewayError::MalformedPayload(format!("{stamp}: {e}")))?;
            let mut casts = Vec::new();
            for (cast, points) in [
                (Cast::Daycast, &payload.daycast),
                (Cast::Hourcast, &payload.hourcast),
                (Cast::Instacast, &payload.instacast),
            ] {
                let Some(points) = points else {
                    let msg = format!("{stamp}: payload has no {}", cast.name());
                    warn!("{msg}");
                    warnings.push(msg);
                    continue;
                };
                casts.push(cast);
                for p in points {
                    let timestamp = NaiveDateTime::parse_from_str(&p.timestamp, "%Y-%m-%dT%H:%M:%S")
                        .map_err(|_| GatewayError::MalformedPayload(format!("{stamp}: timestamp {:?}", p.timestamp)))?;
                    records.push(CastRecord {
                        cast,
                        timestamp,
                        ghi: p.ghi,
                    });
                }
            }
            let images = payload
                .images
                .iter()
                .map(|img| Ok((img.name.clone(), self.transport.get(&self.request(&img.url))?)))
                .collect::<Result<Vec<_>, GatewayError>>()?;
            days.push(DayDownload { date, raw, casts, images });
            date += Duration::days(1);
        }
        let manifests = days
            .iter()
            .map(|d| write_day(downloads, d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ReuniwattFetch {
            records,
            manifests,
            warnings,
        })
    }
}

fn write_day(downloads: &Path, day: &DayDownload) -> Result<PathBuf, GatewayError> {
    let stamp = day.date.format(DATE_FORMAT).to_string();
    let dir = downloads.join("reuniwatt").join(&stamp);
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(io_error(&images_dir))?;
    let forecast = dir.join("forecast.json");
    std::fs::write(&forecast, &day.raw).map_err(io_error(&forecast))?;
    let mut entries = Vec::new();
    for (name, bytes) in &day.images {
        let file = Path::new(name)
            .file_name()
            .ok_or_else(|| GatewayError::MalformedPayload(format!("image name {name:?}")))?;
        let path = images_dir.join(file);
        std::fs::write(&path, bytes).map_err(io_error(&path))?;
        entries.push(ManifestEntry {
            name: name.clone(),
            path: format!("images/{}", file.to_string_lossy()),
            bytes: bytes.len(),
        });
    }
    let manifest = Manifest {
        date: stamp,
        casts: day.casts.clone(),
        images: entries,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap() + "\n").map_err(io_error(&path))?;
    Ok(path)
}
