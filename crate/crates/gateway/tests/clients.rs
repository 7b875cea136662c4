use pvtwin_core::weather::Variable;
use pvtwin_gateway::pi::{PiClient, PiConfig};
use pvtwin_gateway::reuniwatt::{Cast, Manifest, ReuniwattClient, ReuniwattConfig};
use pvtwin_gateway::{FixtureTransport, GatewayError, Store};

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

fn pi_config() -> PiConfig {
    PiConfig {
        base_url: "https://pi.example".into(),
        user: "operator".into(),
        password: "secret".into(),
    }
}

fn pi_transport() -> FixtureTransport {
    FixtureTransport::new().route("start=2024-05-09T00:00:00", fixture("pi/20240509_minute.json"))
}

#[test]
fn pi_minute_day_has_1440_rows_and_is_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("secondary.sqlite");
    let client = PiClient::new(pi_config(), pi_transport());
    let series = client
        .fetch_pi("2024-05-09T00:00:00", "2024-05-09T23:59:59", "minute", &db)
        .unwrap();
    assert_eq!(series.len(), 1440);
    assert_eq!(series.resolution_minutes(), Some(1));
    assert!(series.has(Variable::AmbientTemperature));
    let stored = Store::open(&db).unwrap().read_series("pi_minute").unwrap();
    assert_eq!(stored, series);
    let req = &client.transport().requests()[0];
    assert_eq!(req.basic_auth, Some(("operator".into(), "secret".into())));
    assert!(req.full_url().contains("interval=1m"));
}

#[test]
fn pi_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("secondary.sqlite");
    let client = PiClient::new(pi_config(), pi_transport());
    assert!(matches!(
        client.fetch_pi("2024-05-09T00:00:00", "2024-05-09T00:00:00", "minute", &db),
        Err(GatewayError::InvalidRange { .. })
    ));
    assert!(matches!(
        client.fetch_pi("2024-05-09T00:00:00", "2024-05-09T23:59:59", "weekly", &db),
        Err(GatewayError::UnknownFreq(f)) if f == "weekly"
    ));
    assert!(client.transport().requests().is_empty());
    let denied = PiClient::new(pi_config(), FixtureTransport::new().fail("/streams", 401));
    assert!(matches!(
        denied.fetch_pi("2024-05-09T00:00:00", "2024-05-09T23:59:59", "minute", &db),
        Err(GatewayError::AuthError)
    ));
    let empty = PiClient::new(pi_config(), FixtureTransport::new().route("/streams", r#"{"Items":[]}"#));
    assert!(matches!(
        empty.fetch_pi("2024-05-09T00:00:00", "2024-05-09T23:59:59", "minute", &db),
        Err(GatewayError::EmptyResponse)
    ));
}

#[test]
fn pi_failure_mid_range_leaves_database_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("secondary.sqlite");
    let transport = pi_transport().fail("start=2024-05-10", 503);
    let client = PiClient::new(pi_config(), transport);
    let err = client
        .fetch_pi("2024-05-09T00:00:00", "2024-05-10T23:59:59", "minute", &db)
        .unwrap_err();
    assert!(matches!(err, GatewayError::Transport(_)), "{err}");
    assert_eq!(client.transport().requests().len(), 2);
    assert!(!db.exists() || !Store::open(&db).unwrap().has_table("pi_minute").unwrap());
}

fn reuniwatt_transport() -> FixtureTransport {
    FixtureTransport::new()
        .route("date=20240508", fixture("reuniwatt/20240508.json"))
        .route("date=20240509", fixture("reuniwatt/20240509.json"))
        .route("/images/", b"\xFF\xD8jpeg".to_vec())
}

fn reuniwatt_config() -> ReuniwattConfig {
    ReuniwattConfig {
        base_url: "https://rw.example".into(),
        token: "t0k3n".into(),
    }
}

#[test]
fn reuniwatt_two_days_with_partial_casts() {
    let dir = tempfile::tempdir().unwrap();
    let client = ReuniwattClient::new(reuniwatt_config(), reuniwatt_transport());
    let out = client.fetch_reuniwatt("20240508", "20240509", dir.path()).unwrap();
    let days: std::collections::BTreeSet<_> = out.records.iter().map(|r| r.timestamp.date()).collect();
    assert_eq!(days.len(), 2);
    assert_eq!(out.warnings.len(), 1);
    assert!(out.warnings[0].contains("instacast"));
    assert_eq!(out.manifests.len(), 2);
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&out.manifests[1]).unwrap()).unwrap();
    assert_eq!(manifest.casts, vec![Cast::Daycast, Cast::Hourcast]);
    assert_eq!(manifest.images.len(), 2);
    for img in &manifest.images {
        let path = dir.path().join("reuniwatt/20240509").join(&img.path);
        assert_eq!(std::fs::read(path).unwrap().len(), img.bytes);
    }
    assert!(dir.path().join("reuniwatt/20240508/forecast.json").exists());
    let hourcast = out.cast_series(Cast::Hourcast).unwrap();
    assert_eq!(hourcast.resolution_minutes(), Some(15));
    assert_eq!(hourcast.len(), 2 * 96);
    let auth = &client.transport().requests()[0];
    assert!(auth.headers.contains(&("Authorization".into(), "Bearer t0k3n".into())));
}

#[test]
fn reuniwatt_preconditions_and_atomicity() {
    let dir = tempfile::tempdir().unwrap();
    let client = ReuniwattClient::new(reuniwatt_config(), reuniwatt_transport());
    assert!(matches!(
        client.fetch_reuniwatt("20240509", "20240508", dir.path()),
        Err(GatewayError::InvalidRange { .. })
    ));
    assert!(matches!(
        client.fetch_reuniwatt("240508", "20240509", dir.path()),
        Err(GatewayError::BadTimestamp { .. })
    ));
    let failing = ReuniwattClient::new(reuniwatt_config(), reuniwatt_transport().fail("date=20240509", 500));
    assert!(failing.fetch_reuniwatt("20240508", "20240509", dir.path()).is_err());
    assert!(!dir.path().join("reuniwatt").exists());
    let garbage = ReuniwattClient::new(reuniwatt_config(), FixtureTransport::new().route("/forecasts", "not json"));
    assert!(matches!(
        garbage.fetch_reuniwatt("20240508", "20240508", dir.path()),
        Err(GatewayError::MalformedPayload(_))
    ));
}
