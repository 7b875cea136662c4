//! Audit log of operations, persisted as `job` documents in the store.
//!
//! Ids are allocated sequentially when a job is submitted. A job's status
//! only moves forward: queued, running, then done or failed.

use chrono::Utc;
use pvtwin_gateway::store::StoreWriter;
use pvtwin_gateway::Store;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const JOB_DOCUMENT: &str = "job";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Ingest,
    Simulate,
    Forecast,
    Offer,
    PreOffer,
    Redispatch,
    Heatmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Failed)
    }

    /// Whether `next` is a legal successor of `self`.
    pub fn can_advance_to(self, next: JobStatus) -> bool {
        match self {
            Self::Queued => next == Self::Running,
            Self::Running => next.is_terminal(),
            Self::Done | Self::Failed => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("job {id}: cannot move from {from:?} to {to:?}")]
pub struct InvalidTransition {
    pub id: u64,
    pub from: JobStatus,
    pub to: JobStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: u64,
    pub kind: JobKind,
    pub status: JobStatus,
    pub submitted_at: String,
    pub finished_at: Option<String>,
    /// Where the artifact was stored, for finished jobs.
    pub artifact: Option<String>,
    pub error: Option<ServiceError>,
}

fn key(id: u64) -> String {
    format!("{id:010}")
}

fn now() -> String {
    Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

impl JobRecord {
    pub fn advance(&mut self, next: JobStatus) -> Result<(), InvalidTransition> {
        if !self.status.can_advance_to(next) {
            return Err(InvalidTransition {
                id: self.id,
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        if next.is_terminal() {
            self.finished_at = Some(now());
        }
        Ok(())
    }

    fn body(&self) -> String {
        serde_json::to_string(self).expect("job record serializes")
    }

    /// Allocates the next id and records the job as queued.
    pub fn submit(store: &mut Store, kind: JobKind) -> Result<Self, ServiceError> {
        let id = store.count_documents(JOB_DOCUMENT)? as u64 + 1;
        let record = Self {
            id,
            kind,
            status: JobStatus::Queued,
            submitted_at: now(),
            finished_at: None,
            artifact: None,
            error: None,
        };
        record.save_now(store)?;
        Ok(record)
    }

    /// Stages the record in an open write, committed with the job's data.
    pub fn save(&self, writer: &mut StoreWriter<'_>) -> Result<(), ServiceError> {
        Ok(writer.put_document(JOB_DOCUMENT, &key(self.id), &self.body())?)
    }

    pub fn save_now(&self, store: &mut Store) -> Result<(), ServiceError> {
        Ok(store.put_document(JOB_DOCUMENT, &key(self.id), &self.body())?)
    }

    pub fn load(store: &Store, id: u64) -> Result<Option<Self>, ServiceError> {
        store
            .get_document(JOB_DOCUMENT, &key(id))?
            .map(|body| {
                serde_json::from_str(&body)
                    .map_err(|e| ServiceError::new(crate::error::ErrorClass::Internal, "CorruptJob", e.to_string()))
            })
            .transpose()
    }

    pub fn list(store: &Store) -> Result<Vec<Self>, ServiceError> {
        store
            .list_documents(JOB_DOCUMENT)?
            .into_iter()
            .map(|(_, body)| {
                serde_json::from_str(&body)
                    .map_err(|e| ServiceError::new(crate::error::ErrorClass::Internal, "CorruptJob", e.to_string()))
            })
            .collect()
    }
}
