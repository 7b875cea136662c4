//! Data-directory backed operations behind the HTTP API.
//!
//! Layout under the data directory:
//!
//! ```text
//! plants/<plant_config_id>.json          plant architecture documents
//! gfs/<gfs_source>.csv                   day-ahead GHI forecasts
//! historical/<source>.csv                historical measurements (climatology)
//! measurements/<source>.csv              weather inputs for simulations
//! reuniwatt/<YYYYMMDD>/<cast>.csv        intraday casts (daycast, hourcast, instacast)
//! models/runs.csv, models/horizons.csv   forecast-model runs
//! artifacts/                             files written by finished jobs
//! pvtwin.sqlite                          the store
//! ```
//!
//! Each operation runs as a job: it is recorded as queued, then running;
//! its data and the finished job record are committed in one transaction,
//! so a failed job leaves nothing but its own failed record behind.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{Duration, Local, NaiveDate, NaiveDateTime};
use pvtwin_core::eval::MetricOption;
use pvtwin_core::market::{resolve_operation_date, OfferRow, Operation, DEFAULT_MARGIN};
use pvtwin_gateway::reuniwatt::{Cast, DATE_FORMAT};
use pvtwin_gateway::store::StoreWriter;
use pvtwin_gateway::{ingest_model_runs, FileFormat, Store};
use serde::{Deserialize, Serialize};

use crate::error::{ErrorClass, ServiceError};
use crate::jobs::{JobKind, JobRecord, JobStatus};
use crate::ops::{self, BaselineArtifact, HeatmapArtifact, OfferArtifact, RedispatchArtifact, SimulationArtifact};

pub const STORE_FILE: &str = "pvtwin.sqlite";
/// Store table receiving uploaded, quality-controlled measurements.
pub const MEASUREMENT_TABLE: &str = "measurements";
pub const ARTIFACT_DOCUMENT: &str = "artifact";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobFailure {
    pub job_id: Option<u64>,
    pub error: ServiceError,
}

impl From<ServiceError> for JobFailure {
    fn from(error: ServiceError) -> Self {
        Self { job_id: None, error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobOutput<T> {
    pub job: JobRecord,
    pub result: T,
}

pub type JobResult<T> = Result<JobOutput<T>, JobFailure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferRequest {
    #[serde(default = "default_operation")]
    pub operation: String,
    pub date: Option<NaiveDate>,
    pub availability: f64,
    pub plant_config_id: String,
    pub gfs_source: String,
    /// Defaults to the plant id.
    pub historical_source: Option<String>,
    /// Reference day for date defaults; the server's local date if absent.
    pub today: Option<NaiveDate>,
}

fn default_operation() -> String {
    "offer".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedispatchRequest {
    pub date: Option<NaiveDate>,
    pub margin: Option<f64>,
    pub today: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRequest {
    pub issue_time: String,
    pub plant_config_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub plant_config_id: String,
    /// File under `measurements/`; the stored measurements if absent.
    pub weather_source: Option<String>,
}

/// An offer as committed to the market, stored under its delivery date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommittedOffer {
    pub job_id: u64,
    pub operation: Operation,
    pub plant_config_id: String,
    pub historical_source: String,
    pub availability_mw: f64,
    pub offer: OfferRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadSummary {
    pub series_id: String,
    pub rows: usize,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub columns: Vec<ops::ColumnQc>,
    pub csv: String,
}

pub struct Engine {
    data_dir: PathBuf,
    store: Mutex<Store>,
    qc_seed: u64,
}

/// Rejects ids that could escape their folder.
fn safe_id<'a>(what: &str, id: &'a str) -> Result<&'a str, ServiceError> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok && !id.starts_with('.') {
        Ok(id)
    } else {
        Err(ServiceError::bad_request("InvalidIdentifier", format!("invalid {what} {id:?}")))
    }
}

fn internal(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::new(ErrorClass::Internal, "Internal", e.to_string())
}

impl Engine {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir).map_err(internal)?;
        let store = Store::open(data_dir.join(STORE_FILE))?;
        Ok(Self {
            data_dir,
            store: Mutex::new(store),
            qc_seed: ops::DEFAULT_QC_SEED,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn plant_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        Ok(self.data_dir.join("plants").join(format!("{}.json", safe_id("plant_config_id", id)?)))
    }

    pub fn gfs_path(&self, source: &str) -> Result<PathBuf, ServiceError> {
        Ok(self.data_dir.join("gfs").join(format!("{}.csv", safe_id("gfs_source", source)?)))
    }

    pub fn historical_path(&self, source: &str) -> Result<PathBuf, ServiceError> {
        Ok(self.data_dir.join("historical").join(format!("{}.csv", safe_id("historical_source", source)?)))
    }

    pub fn cast_path(&self, date: NaiveDate, cast: Cast) -> PathBuf {
        self.data_dir
            .join("reuniwatt")
            .join(date.format(DATE_FORMAT).to_string())
            .join(format!("{}.csv", cast.name()))
    }

    /// Runs `work` as a job of `kind`; `persist` stages its data in the
    /// same transaction that records the job as done and returns the
    /// artifact locator.
    fn run_job<T>(
        &self,
        kind: JobKind,
        work: impl FnOnce() -> Result<T, ServiceError>,
        persist: impl FnOnce(&mut StoreWriter<'_>, &JobRecord, &T) -> Result<String, ServiceError>,
    ) -> JobResult<T> {
        let mut job = {
            let mut store = self.store();
            let mut job = JobRecord::submit(&mut store, kind)?;
            job.advance(JobStatus::Running).map_err(internal)?;
            job.save_now(&mut store)?;
            job
        };
        let outcome = work().and_then(|result| {
            let mut store = self.store();
            let mut writer = store.begin_write()?;
            let locator = persist(&mut writer, &job, &result)?;
            let mut done = job.clone();
            done.advance(JobStatus::Done).map_err(internal)?;
            done.artifact = Some(locator);
            done.save(&mut writer)?;
            writer.commit()?;
            Ok((done, result))
        });
        match outcome {
            Ok((job, result)) => Ok(JobOutput { job, result }),
            Err(error) => {
                let _ = job.advance(JobStatus::Failed);
                job.error = Some(error.clone());
                let _ = job.save_now(&mut self.store());
                Err(JobFailure {
                    job_id: Some(job.id),
                    error,
                })
            }
        }
    }

    /// Stores a CSV artifact as a document and as a file; returns its locator.
    fn put_artifact(&self, writer: &mut StoreWriter<'_>, job: &JobRecord, name: &str, csv: &str) -> Result<String, ServiceError> {
        let key = format!("{:010}_{name}", job.id);
        writer.put_document(ARTIFACT_DOCUMENT, &key, csv)?;
        let dir = self.data_dir.join("artifacts");
        std::fs::create_dir_all(&dir).map_err(internal)?;
        std::fs::write(dir.join(&key), csv).map_err(internal)?;
        Ok(format!("artifacts/{key}"))
    }

    pub fn artifact(&self, key: &str) -> Result<Option<String>, ServiceError> {
        Ok(self.store().get_document(ARTIFACT_DOCUMENT, key)?)
    }

    pub fn jobs(&self) -> Result<Vec<JobRecord>, ServiceError> {
        JobRecord::list(&self.store())
    }

    pub fn job(&self, id: u64) -> Result<JobRecord, ServiceError> {
        JobRecord::load(&self.store(), id)?.ok_or_else(|| ServiceError::not_found("UnknownJob", format!("no job {id}")))
    }

    pub fn committed_offer(&self, date: NaiveDate) -> Result<Option<CommittedOffer>, ServiceError> {
        self.store()
            .get_document("offer", &date.to_string())?
            .map(|body| serde_json::from_str(&body).map_err(internal))
            .transpose()
    }

    pub fn upload(&self, file_name: &str, bytes: &[u8]) -> JobResult<UploadSummary> {
        let seed = self.qc_seed;
        self.run_job(
            JobKind::Ingest,
            || {
                let format = FileFormat::from_path(file_name).unwrap_or(FileFormat::Csv);
                let artifact = ops::ingest(bytes, format, seed)?;
                let stamps = artifact.series.timestamps();
                Ok((
                    UploadSummary {
                        series_id: MEASUREMENT_TABLE.to_string(),
                        rows: stamps.len(),
                        start: stamps[0],
                        end: *stamps.last().unwrap(),
                        columns: artifact.columns,
                        csv: artifact.csv,
                    },
                    artifact.series,
                ))
            },
            |w, job, (summary, series)| {
                w.store_series(MEASUREMENT_TABLE, series)?;
                self.put_artifact(w, job, "measurements.csv", &summary.csv)
            },
        )
        .map(|out| JobOutput {
            job: out.job,
            result: out.result.0,
        })
    }

    pub fn offer(&self, req: &OfferRequest) -> JobResult<OfferArtifact> {
        let operation = Operation::parse(&req.operation).map_err(ServiceError::from)?;
        let kind = match operation {
            Operation::PreOffer => JobKind::PreOffer,
            _ => JobKind::Offer,
        };
        let historical = req.historical_source.clone().unwrap_or_else(|| req.plant_config_id.clone());
        self.run_job(
            kind,
            || {
                let system = ops::load_plant(&self.plant_path(&req.plant_config_id)?)?;
                let gfs = ops::load_ghi_forecast(&self.gfs_path(&req.gfs_source)?)?;
                let history = ops::load_measurements(&self.historical_path(&historical)?)?;
                let today = req.today.unwrap_or_else(|| Local::now().date_naive());
                let date = resolve_operation_date(today, operation, req.date);
                ops::offer(&system, &gfs, &history, operation, date, req.availability)
            },
            |w, job, artifact| {
                let committed = CommittedOffer {
                    job_id: job.id,
                    operation,
                    plant_config_id: req.plant_config_id.clone(),
                    historical_source: historical.clone(),
                    availability_mw: artifact.availability_mw,
                    offer: artifact.offer.clone(),
                };
                let kind = serde_json::to_value(operation).unwrap();
                let kind = kind.as_str().unwrap();
                w.put_document(kind, &artifact.date.to_string(), &serde_json::to_string(&committed).unwrap())?;
                self.put_artifact(w, job, &format!("{kind}_{}.csv", artifact.date), &artifact.csv)
            },
        )
    }

    pub fn redispatch(&self, req: &RedispatchRequest) -> JobResult<RedispatchArtifact> {
        self.run_job(
            JobKind::Redispatch,
            || {
                let today = req.today.unwrap_or_else(|| Local::now().date_naive());
                let date = resolve_operation_date(today, Operation::Redispatch, req.date);
                let committed = self
                    .committed_offer(date)?
                    .ok_or_else(|| ServiceError::not_found("NoCommittedOffer", format!("no offer committed for {date}")))?;
                let system = ops::load_plant(&self.plant_path(&committed.plant_config_id)?)?;
                let history = ops::load_measurements(&self.historical_path(&committed.historical_source)?)?;
                let mut casts = Vec::new();
                for cast in Cast::ALL {
                    let path = self.cast_path(date, cast);
                    if path.exists() {
                        casts.push((cast, ops::load_ghi_forecast(&path)?));
                    }
                }
                ops::redispatch(
                    &system,
                    &committed.offer,
                    committed.availability_mw,
                    &casts,
                    &history,
                    req.margin.unwrap_or(DEFAULT_MARGIN),
                )
            },
            |w, job, artifact| {
                w.put_document("redispatch", &artifact.date.to_string(), &serde_json::to_string(artifact).unwrap())?;
                self.put_artifact(w, job, &format!("redispatch_{}.csv", artifact.date), &artifact.csv)
            },
        )
    }

    pub fn heatmap(&self, option: &str) -> JobResult<HeatmapArtifact> {
        self.run_job(
            JobKind::Heatmap,
            || {
                MetricOption::from_code(option)?;
                let models = self.data_dir.join("models");
                let runs = ops::read_bytes(&models.join("runs.csv"))?;
                let horizons = ops::read_bytes(&models.join("horizons.csv"))?;
                let runs = ingest_model_runs(&runs, &horizons)?;
                let observed = self.store().read_series(MEASUREMENT_TABLE)?;
                ops::heatmap(runs, &observed, option)
            },
            |w, job, artifact| {
                let locator = self.put_artifact(w, job, &format!("heatmap_option{}.csv", artifact.option), &artifact.csv)?;
                self.put_artifact(w, job, &format!("heatmap_option{}_legend.csv", artifact.option), &artifact.legend_csv)?;
                Ok(locator)
            },
        )
    }

    pub fn baseline(&self, req: &BaselineRequest) -> JobResult<BaselineArtifact> {
        self.run_job(
            JobKind::Forecast,
            || {
                let issue = ops::parse_issue_time(&req.issue_time)?;
                let system = ops::load_plant(&self.plant_path(&req.plant_config_id)?)?;
                let location = ops::plant_location(&system)?;
                let history = self.store().query_series(
                    MEASUREMENT_TABLE,
                    issue - Duration::hours(6),
                    issue + Duration::minutes(1),
                )?;
                ops::baseline(&history, &location, issue)
            },
            |w, job, artifact| {
                let key = artifact.issue_time.format("%Y-%m-%dT%H:%M:%S").to_string();
                w.put_document("forecast", &key, &serde_json::to_string(artifact).unwrap())?;
                self.put_artifact(w, job, &format!("baseline_{key}.csv"), &artifact.csv)
            },
        )
    }

    pub fn simulate(&self, req: &SimulateRequest) -> JobResult<SimulationArtifact> {
        self.run_job(
            JobKind::Simulate,
            || {
                let system = ops::load_plant(&self.plant_path(&req.plant_config_id)?)?;
                let weather = match &req.weather_source {
                    Some(source) => {
                        let path = self
                            .data_dir
                            .join("measurements")
                            .join(format!("{}.csv", safe_id("weather_source", source)?));
                        ops::load_measurements(&path)?
                    }
                    None => self.store().read_series(MEASUREMENT_TABLE)?,
                };
                ops::simulate(&system, &weather)
            },
            |w, job, artifact| {
                let locator = self.put_artifact(w, job, "production.csv", &artifact.csv)?;
                self.put_artifact(w, job, "energy.csv", &artifact.summary_csv)?;
                Ok(locator)
            },
        )
    }
}
