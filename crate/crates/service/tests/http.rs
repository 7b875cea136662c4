mod common;

use axum::http::StatusCode;
use common::{app, call, data_dir, fixture, get, offer_request, post_json, upload};
use pvtwin_core::market::{parse_offer_csv, parse_redispatch_csv};
use serde_json::json;

#[tokio::test]
async fn every_response_carries_the_schema_version() {
    let dir = data_dir();
    let (app, _) = app(dir.path());
    let (status, body) = call(&app, get("/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["schema_version"], "1.0");
    let (status, body) = call(&app, get("/metrics/heatmap?option=9")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["schema_version"], "1.0");
    assert_eq!(body["error"]["code"], "UnknownOption");
}

#[tokio::test]
async fn upload_reports_quality_control() {
    let dir = data_dir();
    let (app, engine) = app(dir.path());
    let (status, body) = call(&app, upload("holes.csv", &fixture("measurements/elpaso_holes.csv"))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let result = &body["result"];
    assert_eq!(result["series_id"], "measurements");
    assert_eq!(result["rows"], 14 * 144);
    for column in result["columns"].as_array().unwrap() {
        let pct = column["missing_percent"].as_f64().unwrap();
        assert!((pct - 8.0).abs() < 0.05, "{column}");
        assert!(column["clipped"].as_u64().is_some());
    }
    assert_eq!(body["job"]["status"], "done");
    assert_eq!(body["job"]["kind"], "ingest");
    let job = engine.job(body["job"]["id"].as_u64().unwrap()).unwrap();
    assert_eq!(job.artifact.as_deref(), Some("artifacts/0000000001_measurements.csv"));
}

#[tokio::test]
async fn upload_rejections() {
    let dir = data_dir();
    let (app, _) = app(dir.path());
    let (status, body) = call(&app, upload("empty.csv", b"")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "EmptyFile");

    let (status, body) = call(&app, upload("bad.csv", b"Date,GHI\n2024-05-09 00:00:00,1\n")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "HeaderMismatch");
    assert!(body["job_id"].as_u64().is_some());

    let mut dup = String::from_utf8(fixture("measurements/table4_sample.csv")).unwrap();
    let second = dup.lines().nth(1).unwrap().to_string();
    dup.push_str(&second);
    dup.push('\n');
    let (status, body) = call(&app, upload("dup.csv", dup.as_bytes())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "DuplicateStamp");

    // None of the failures stored anything.
    let (status, _) = call(&app, get("/metrics/heatmap?option=1")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn offer_then_redispatch() {
    let dir = data_dir();
    let (app, engine) = app(dir.path());

    let (status, body) = call(&app, post_json("/operations/redispatch", json!({"date": "2024-05-09"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "NoCommittedOffer");

    let (status, body) = call(&app, post_json("/operations/offer", offer_request("2024-05-08"))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let result = &body["result"];
    assert_eq!(result["date"], "2024-05-09");
    let csv = result["csv"].as_str().unwrap();
    let rows = parse_offer_csv(csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].values.iter().all(|v| (0.0..=69.0).contains(v)));
    assert!(rows[0].values[12] > 30.0);
    let committed = engine
        .committed_offer(chrono::NaiveDate::from_ymd_opt(2024, 5, 9).unwrap())
        .unwrap()
        .unwrap();
    assert_eq!(committed.offer, rows[0]);

    let (status, body) = call(&app, post_json("/operations/redispatch", json!({"date": "2024-05-09"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let csv = body["result"]["csv"].as_str().unwrap();
    let (date, gfs, intraday) = parse_redispatch_csv(csv).unwrap();
    assert_eq!(date.to_string(), "2024-05-09");
    assert_eq!(gfs, rows[0].values);
    assert_eq!(intraday.len(), 24);
    let casts: Vec<&str> = body["result"]["casts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["cast"].as_str().unwrap())
        .collect();
    assert_eq!(casts, vec!["daycast", "hourcast"]);
    assert!(body["result"]["decision"]["redispatch_required"].is_boolean());
}

#[tokio::test]
async fn pre_offer_defaults_to_two_days_ahead() {
    let dir = data_dir();
    let (app, engine) = app(dir.path());
    let mut req = offer_request("2024-05-07");
    req["operation"] = json!("pre_offer");
    let (status, body) = call(&app, post_json("/operations/offer", req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["result"]["date"], "2024-05-09");
    assert_eq!(body["job"]["kind"], "pre_offer");
    // A pre-offer is not a market commitment.
    assert!(engine
        .committed_offer(chrono::NaiveDate::from_ymd_opt(2024, 5, 9).unwrap())
        .unwrap()
        .is_none());
}

#[tokio::test]
async fn offer_inputs_must_exist() {
    let dir = data_dir();
    let (app, _) = app(dir.path());
    for (field, value) in [("plant_config_id", "nowhere"), ("gfs_source", "gfs_19990101")] {
        let mut req = offer_request("2024-05-08");
        req[field] = json!(value);
        let (status, body) = call(&app, post_json("/operations/offer", req)).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{field}");
        assert_eq!(body["error"]["code"], "FileNotFound");
        assert_eq!(body["job_id"].as_u64().is_some(), true);
    }
    let mut req = offer_request("2024-05-08");
    req["plant_config_id"] = json!("../plants/elpaso");
    let (status, _) = call(&app, post_json("/operations/offer", req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut req = offer_request("2024-05-08");
    req["operation"] = json!("auction");
    let (status, body) = call(&app, post_json("/operations/offer", req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "UnknownOperation");
}

#[tokio::test]
async fn heatmap_and_baseline_use_stored_measurements() {
    let dir = data_dir();
    let (app, _) = app(dir.path());
    let (status, _) = call(&app, upload("holes.csv", &fixture("measurements/elpaso_holes.csv"))).await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = call(&app, get("/metrics/heatmap?option=2")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["result"]["metric"], "RMSE");
    assert_eq!(body["result"]["models"], json!(["LSTM", "Transformer"]));
    let legend = body["result"]["legend_csv"].as_str().unwrap();
    assert!(legend.starts_with("hour,1,2,3"));

    let (status, body) = call(
        &app,
        post_json(
            "/forecast/baseline",
            json!({"issue_time": "2022-02-03T11:00:00", "plant_config_id": "elpaso"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["result"]["native"]["values"].as_array().unwrap().len(), 36);
    assert_eq!(body["result"]["hourly"]["values"].as_array().unwrap().len(), 6);
    assert_eq!(body["job"]["kind"], "forecast");

    let (status, body) = call(
        &app,
        post_json(
            "/forecast/baseline",
            json!({"issue_time": "2022-02-01T02:00:00", "plant_config_id": "elpaso"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "InsufficientHistory");
}

#[tokio::test]
async fn heatmap_needs_two_models() {
    let dir = data_dir();
    let horizons = String::from_utf8(fixture("models/horizons.csv")).unwrap();
    let runs = String::from_utf8(fixture("models/runs.csv")).unwrap();
    let lstm_ids: Vec<String> = horizons
        .lines()
        .skip(1)
        .filter(|l| l.contains("LSTM"))
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let only_lstm: String = runs
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || lstm_ids.contains(&l.rsplit(',').next().unwrap().to_string()))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    std::fs::write(dir.path().join("models/runs.csv"), only_lstm).unwrap();
    let (app, _) = app(dir.path());
    call(&app, upload("holes.csv", &fixture("measurements/elpaso_holes.csv"))).await;
    let (status, body) = call(&app, get("/metrics/heatmap?option=1")).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["error"]["code"], "NotEnoughModels");
}

#[tokio::test]
async fn simulation_and_job_log() {
    let dir = data_dir();
    let (app, _) = app(dir.path());
    let (status, body) = call(
        &app,
        post_json(
            "/plant/simulate",
            json!({"plant_config_id": "elpaso", "weather_source": "elpaso_day"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["result"]["rows"], 144);
    assert!(body["result"]["peak_poi_kw"].as_f64().unwrap() > 0.0);

    let (status, body) = call(&app, get("/jobs")).await;
    assert_eq!(status, StatusCode::OK);
    let jobs = body["jobs"].as_array().unwrap();
    assert_eq!(jobs.len(), 1);
    assert_eq!(jobs[0]["status"], "done");
    let locator = jobs[0]["artifact"].as_str().unwrap();
    let key = locator.strip_prefix("artifacts/").unwrap();
    let (status, body) = call(&app, get(&format!("/artifacts/{key}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["csv"].as_str().unwrap().starts_with("timestamp,dc:"));
    let (status, _) = call(&app, get("/jobs/99")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let dir = data_dir();
    let engine = std::sync::Arc::new(pvtwin_service::Engine::open(dir.path()).unwrap());
    let app = pvtwin_service::api::router(pvtwin_service::api::AppState {
        engine,
        token: Some("s3cret".into()),
    });
    let (status, body) = call(&app, get("/health")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["schema_version"], "1.0");
    let request = axum::http::Request::get("/health")
        .header("Authorization", "Bearer s3cret")
        .body(axum::body::Body::empty())
        .unwrap();
    let (status, _) = call(&app, request).await;
    assert_eq!(status, StatusCode::OK);
}
