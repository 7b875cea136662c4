use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use pvtwin_core::qc::{clip_physical, impute_slotwise_normal, missing_report};
use pvtwin_core::weather::{Variable, WeatherSeries};
use pvtwin_gateway::measurements::{read_measurement_file, MEASUREMENT_HEADERS, MEASUREMENT_VARIABLES};
use pvtwin_gateway::{emit_measurements, group_by_model, ingest_measurements, ingest_model_runs, FileFormat, GatewayError};
use rust_xlsxwriter::{ExcelDateTime, Format, Workbook};

fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap()
}

#[test]
fn sample_file_round_trips() {
    let first = ingest_measurements(&fixture("measurements/table4_sample.csv"), FileFormat::Csv).unwrap();
    assert_eq!(first.len(), 36);
    let last = first.len() - 1;
    assert_eq!(first.timestamps()[last].to_string(), "2022-02-22 05:50:00");
    assert_eq!(first.get(Variable::Ghi, last), Some(0.40));
    assert_eq!(first.get(Variable::Pressure, last), Some(1003.25));
    let emitted = emit_measurements(&first);
    let second = ingest_measurements(emitted.as_bytes(), FileFormat::Csv).unwrap();
    assert_eq!(second, first);
    assert_eq!(emit_measurements(&second), emitted);
}

fn to_xlsx(series: &WeatherSeries, native_dates: bool) -> Vec<u8> {
    let mut wb = Workbook::new();
    let ws = wb.add_worksheet();
    for (c, h) in MEASUREMENT_HEADERS.iter().enumerate() {
        ws.write_string(0, c as u16, *h).unwrap();
    }
    let date_format = Format::new().set_num_format("yyyy-mm-dd hh:mm:ss");
    for (r, t) in series.timestamps().iter().enumerate() {
        let row = r as u32 + 1;
        let text = t.format("%Y-%m-%d %H:%M:%S").to_string();
        if native_dates {
            let dt = ExcelDateTime::parse_from_str(&text).unwrap();
            ws.write_datetime_with_format(row, 0, &dt, &date_format).unwrap();
        } else {
            ws.write_string(row, 0, &text).unwrap();
        }
        for (c, var) in MEASUREMENT_VARIABLES.iter().enumerate() {
            if let Some(v) = series.get(*var, r) {
                ws.write_number(row, c as u16 + 1, v).unwrap();
            }
        }
    }
    wb.save_to_buffer().unwrap()
}

#[test]
fn spreadsheet_upload_matches_csv() {
    let csv = read_measurement_file(&fixture_path("measurements/elpaso_holes.csv")).unwrap();
    for native in [false, true] {
        let xlsx = ingest_measurements(&to_xlsx(&csv, native), FileFormat::Xlsx).unwrap();
        assert_eq!(xlsx, csv);
    }
}

#[test]
fn spreadsheet_header_is_checked() {
    let mut wb = Workbook::new();
    let ws = wb.add_worksheet();
    ws.write_string(0, 0, "Fecha").unwrap();
    ws.write_string(0, 1, "Irradiance").unwrap();
    let bytes = wb.save_to_buffer().unwrap();
    assert!(matches!(
        ingest_measurements(&bytes, FileFormat::Xlsx),
        Err(GatewayError::HeaderMismatch { .. })
    ));
    assert!(matches!(ingest_measurements(b"", FileFormat::Xlsx), Err(GatewayError::EmptyFile)));
}

#[test]
fn quality_control_fills_the_holes_fixture() {
    let raw = read_measurement_file(&fixture_path("measurements/elpaso_holes.csv")).unwrap();
    let before = missing_report(&raw);
    for c in &before.columns {
        assert!((c.percent - 8.0).abs() < 0.05, "{c:?}");
    }
    let filled = clip_physical(&impute_slotwise_normal(&raw, 7).unwrap());
    assert!(missing_report(&filled).is_complete());
    let again = clip_physical(&impute_slotwise_normal(&raw, 7).unwrap());
    assert_eq!(filled, again);
    let unclipped = impute_slotwise_normal(&raw, 7).unwrap();
    for var in raw.variables() {
        let (a, b) = (raw.column(var).unwrap(), unclipped.column(var).unwrap());
        for (x, y) in a.iter().zip(b) {
            if let Some(x) = x {
                assert_eq!(x.to_bits(), y.unwrap().to_bits());
            }
        }
    }
}

#[test]
fn model_run_fixture_joins() {
    let runs = ingest_model_runs(&fixture("models/runs.csv"), &fixture("models/horizons.csv")).unwrap();
    let by_model = group_by_model(runs);
    assert_eq!(by_model.keys().collect::<Vec<_>>(), vec!["LSTM", "Transformer"]);
    for runs in by_model.values() {
        assert_eq!(runs.len(), 5 * 13);
        assert!(runs.iter().all(|r| r.values.len() == 36 && r.step_minutes == 10));
    }
}

fn arb_series() -> impl Strategy<Value = WeatherSeries> {
    (1usize..60, 0i64..10_000).prop_flat_map(|(n, offset)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, -1e4..1e4f64), 5), n).prop_map(
            move |rows| {
                let t0 = NaiveDate::from_ymd_opt(2022, 2, 22).unwrap().and_hms_opt(0, 0, 0).unwrap()
                    + Duration::minutes(10 * offset);
                let mut s = WeatherSeries::regular(t0, 10, rows.len());
                for (i, var) in MEASUREMENT_VARIABLES.iter().enumerate() {
                    s.set_column(*var, rows.iter().map(|r| r[i]).collect()).unwrap();
                }
                s
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emit_then_ingest_is_identity(series in arb_series()) {
        let text = emit_measurements(&series);
        let back = ingest_measurements(text.as_bytes(), FileFormat::Csv);
        // A first or last row with every cell missing still carries its stamp.
        prop_assert_eq!(back.unwrap(), series);
    }
}
