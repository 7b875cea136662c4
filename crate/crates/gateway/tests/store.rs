use chrono::{Duration, NaiveDate};
use pvtwin_core::weather::{Variable, WeatherSeries};
use pvtwin_gateway::{GatewayError, Store};

fn series(n: usize) -> WeatherSeries {
    let t0 = NaiveDate::from_ymd_opt(2024, 5, 9).unwrap().and_hms_opt(6, 0, 0).unwrap();
    WeatherSeries::regular(t0, 10, n)
        .with_values(Variable::Ghi, (0..n).map(|i| 100.0 + i as f64).collect())
        .unwrap()
}

#[test]
fn second_writer_conflicts_and_readers_see_committed_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.sqlite");
    let mut first = Store::open(&path).unwrap();
    let mut second = Store::open(&path).unwrap();
    let reader = Store::open(&path).unwrap();
    first.store_series("cu01", &series(6)).unwrap();

    let mut w = first.begin_write().unwrap();
    w.store_series("cu01", &series(12)).unwrap();
    assert!(matches!(second.begin_write(), Err(GatewayError::WriteConflict)));
    assert_eq!(reader.read_series("cu01").unwrap().len(), 6);
    w.commit().unwrap();

    assert_eq!(reader.read_series("cu01").unwrap().len(), 12);
    second.store_series("cu02", &series(3)).unwrap();
}

#[test]
fn half_open_queries() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path().join("s.sqlite")).unwrap();
    let s = series(6);
    store.store_series("cu01", &s).unwrap();
    let t0 = s.timestamps()[0];
    assert_eq!(store.query_series("cu01", t0, t0 + Duration::hours(1)).unwrap(), s);
    assert_eq!(store.query_series("cu01", t0, t0 + Duration::minutes(50)).unwrap().len(), 5);
    assert!(store.query_series("cu01", t0 + Duration::hours(2), t0 + Duration::hours(3)).unwrap().is_empty());
}
