#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pvtwin_gateway::reuniwatt::{ReuniwattClient, ReuniwattConfig};
use pvtwin_gateway::FixtureTransport;
use pvtwin_service::api::{router, AppState};
use pvtwin_service::{ops, Engine};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap()
}

fn copy(from: &str, dir: &Path, to: &str) {
    let dest = dir.join(to);
    std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
    std::fs::copy(fixture_path(from), dest).unwrap();
}

/// A data directory populated from the fixtures, with the intraday casts
/// of 2024-05-09 downloaded through an offline Reuniwatt client.
pub fn data_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    copy("architecture_elpaso.json", root, "plants/elpaso.json");
    copy("gfs/gfs_20240509.csv", root, "gfs/gfs_20240509.csv");
    copy("historical/elpaso_2020.csv", root, "historical/elpaso.csv");
    copy("measurements/table4_sample.csv", root, "measurements/table4_sample.csv");
    let history = String::from_utf8(fixture("historical/elpaso_2020.csv")).unwrap();
    let first_day: String = history.lines().take(145).map(|l| format!("{l}\n")).collect();
    std::fs::write(root.join("measurements/elpaso_day.csv"), first_day).unwrap();
    copy("models/runs.csv", root, "models/runs.csv");
    copy("models/horizons.csv", root, "models/horizons.csv");

    let transport = FixtureTransport::new()
        .route("/forecasts?date=20240509", fixture("reuniwatt/20240509.json"))
        .route("/images/", b"jpeg".to_vec());
    let client = ReuniwattClient::new(
        ReuniwattConfig {
            base_url: "http://reuniwatt.test".into(),
            token: "t".into(),
        },
        transport,
    );
    let downloads = root.join("downloads");
    let fetch = client.fetch_reuniwatt("20240509", "20240509", &downloads).unwrap();
    ops::export_casts(&fetch, &root.join("reuniwatt")).unwrap();
    dir
}

pub fn app(dir: &Path) -> (Router, Arc<Engine>) {
    let engine = Arc::new(Engine::open(dir).unwrap());
    let state = AppState {
        engine: engine.clone(),
        token: None,
    };
    (router(state), engine)
}

pub async fn call(app: &Router, request: Request<Body>) -> (StatusCode, Value) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, body)
}

pub fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn upload(file_name: &str, bytes: &[u8]) -> Request<Body> {
    let boundary = "pvtwin-boundary";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{file_name}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    Request::post("/data/upload")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

pub fn offer_request(today: &str) -> Value {
    serde_json::json!({
        "operation": "offer",
        "availability": 69.0,
        "plant_config_id": "elpaso",
        "gfs_source": "gfs_20240509",
        "today": today,
    })
}
