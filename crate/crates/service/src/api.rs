//! HTTP API. Every response body is JSON carrying `schema_version`;
//! failures carry the classified error and, when one was created, the id
//! of the failed job.

use std::sync::Arc;

use axum::extract::{Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{BaselineRequest, Engine, JobFailure, JobResult, OfferRequest, RedispatchRequest, SimulateRequest};
use crate::error::{ErrorClass, ServiceError};
use crate::SCHEMA_VERSION;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/data/upload", post(upload))
        .route("/operations/offer", post(offer))
        .route("/operations/redispatch", post(redispatch))
        .route("/metrics/heatmap", get(heatmap))
        .route("/forecast/baseline", post(baseline))
        .route("/plant/simulate", post(simulate))
        .route("/jobs", get(jobs))
        .route("/jobs/{id}", get(job))
        .route("/artifacts/{key}", get(artifact))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let expected = format!("Bearer {token}");
        let given = request.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return failure(JobFailure::from(ServiceError::new(
                ErrorClass::BadRequest,
                "Unauthorized",
                "missing or invalid bearer token",
            )))
            .into_response_with(StatusCode::UNAUTHORIZED);
        }
    }
    next.run(request).await
}

struct ApiResponse(StatusCode, Value);

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl ApiResponse {
    fn into_response_with(self, status: StatusCode) -> Response {
        ApiResponse(status, self.1).into_response()
    }
}

fn success(body: impl Serialize) -> ApiResponse {
    let mut value = serde_json::to_value(body).expect("response serializes");
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    ApiResponse(StatusCode::OK, value)
}

fn failure(f: JobFailure) -> ApiResponse {
    let status = StatusCode::from_u16(f.error.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    ApiResponse(
        status,
        json!({
            "schema_version": SCHEMA_VERSION,
            "job_id": f.job_id,
            "error": f.error,
        }),
    )
}

fn respond<T: Serialize>(result: JobResult<T>) -> ApiResponse {
    match result {
        Ok(out) => success(out),
        Err(f) => failure(f),
    }
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiResponse> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        failure(JobFailure::from(ServiceError::new(ErrorClass::Internal, "Panicked", e.to_string())))
    })
}

async fn health() -> ApiResponse {
    success(json!({ "status": "ok" }))
}

async fn upload(State(state): State<AppState>, mut multipart: Multipart) -> ApiResponse {
    let mut file = None;
    loop {
        match multipart.next_field().await {
            Ok(Some(field)) if field.name() == Some("file") => {
                let name = field.file_name().unwrap_or("upload.csv").to_string();
                match field.bytes().await {
                    Ok(bytes) => file = Some((name, bytes)),
                    Err(e) => return failure(ServiceError::bad_request("MalformedMultipart", e.to_string()).into()),
                }
            }
            Ok(Some(_)) => continue,
            Ok(None) => break,
            Err(e) => return failure(ServiceError::bad_request("MalformedMultipart", e.to_string()).into()),
        }
    }
    let Some((name, bytes)) = file else {
        return failure(ServiceError::bad_request("EmptyFile", "multipart body has no \"file\" field").into());
    };
    if bytes.is_empty() {
        return failure(ServiceError::bad_request("EmptyFile", "uploaded file is empty").into());
    }
    let engine = state.engine.clone();
    match blocking(move || engine.upload(&name, &bytes)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

async fn offer(State(state): State<AppState>, Json(req): Json<OfferRequest>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.offer(&req)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

async fn redispatch(State(state): State<AppState>, Json(req): Json<RedispatchRequest>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.redispatch(&req)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

#[derive(Deserialize)]
struct HeatmapQuery {
    option: String,
}

async fn heatmap(State(state): State<AppState>, Query(q): Query<HeatmapQuery>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.heatmap(&q.option)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

async fn baseline(State(state): State<AppState>, Json(req): Json<BaselineRequest>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.baseline(&req)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

async fn simulate(State(state): State<AppState>, Json(req): Json<SimulateRequest>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.simulate(&req)).await {
        Ok(r) => respond(r),
        Err(e) => e,
    }
}

async fn jobs(State(state): State<AppState>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.jobs()).await {
        Ok(Ok(jobs)) => success(json!({ "jobs": jobs })),
        Ok(Err(e)) => failure(e.into()),
        Err(e) => e,
    }
}

async fn job(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.job(id)).await {
        Ok(Ok(job)) => success(json!({ "job": job })),
        Ok(Err(e)) => failure(e.into()),
        Err(e) => e,
    }
}

async fn artifact(State(state): State<AppState>, Path(key): Path<String>) -> ApiResponse {
    let engine = state.engine.clone();
    match blocking(move || engine.artifact(&key).map(|a| (key, a))).await {
        Ok(Ok((_, Some(csv)))) => success(json!({ "csv": csv })),
        Ok(Ok((key, None))) => failure(ServiceError::not_found("UnknownArtifact", format!("no artifact {key}")).into()),
        Ok(Err(e)) => failure(e.into()),
        Err(e) => e,
    }
}

/// Serves `router` on `addr` until interrupted.
pub async fn serve(state: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
