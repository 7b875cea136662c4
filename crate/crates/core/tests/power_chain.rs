use chrono::{Duration, NaiveDate, NaiveDateTime};
use pvtwin_core::geometry::{clearsky_ghi, solar_position};
use pvtwin_core::plant::{parse_plant_architecture, PlantSystem};
use pvtwin_core::power::{
    energy_from_power, simulate_plant, SimulationOptions, TemperatureModel,
};
use pvtwin_core::weather::{Variable, WeatherSeries};

fn elpaso() -> PlantSystem {
    let doc = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/architecture_elpaso.json"
    ))
    .unwrap();
    parse_plant_architecture(&doc).unwrap()
}

fn day_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 3, 14)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

fn clear_day(system: &PlantSystem, step: i64) -> WeatherSeries {
    let n = (24 * 60 / step) as usize;
    let series = WeatherSeries::regular(day_start(), step, n);
    let loc = system.conversion_units[0].location;
    let ghi: Vec<f64> = series
        .timestamps()
        .iter()
        .map(|t| clearsky_ghi(&solar_position(&loc, *t).unwrap()))
        .collect();
    series
        .with_values(Variable::Ghi, ghi)
        .unwrap()
        .with_values(Variable::AmbientTemperature, vec![29.0; n])
        .unwrap()
        .with_values(Variable::WindSpeed, vec![2.0; n])
        .unwrap()
        .with_values(Variable::Pressure, vec![1006.0; n])
        .unwrap()
}

#[test]
fn elpaso_structure_and_small_array_ratio() {
    let system = elpaso();
    let weather = clear_day(&system, 10);
    let prod = simulate_plant(&system, &weather, &SimulationOptions::default()).unwrap();
    assert_eq!(prod.conversion_units.len(), 12);
    assert_eq!(prod.inverters.len(), 48);
    assert_eq!(prod.arrays.len(), 384);
    for inv in &prod.inverters {
        let boxes: Vec<_> = prod
            .arrays
            .iter()
            .filter(|a| a.path.cu == inv.cu && a.path.inverter == inv.inverter)
            .collect();
        assert_eq!(boxes.len(), 8);
        let small = boxes
            .iter()
            .filter(|a| {
                system.string_box(a.path).array.strings_per_inverter == 6
            })
            .count();
        assert_eq!(small, 1);
        let small = &boxes[7].dc_power;
        for large in &boxes[..7] {
            for (s, l) in small.iter().zip(&large.dc_power) {
                assert_eq!(*s, l / 4.0);
            }
        }
    }
    let midday = prod
        .timestamps
        .iter()
        .position(|t| *t == day_start() + Duration::hours(12))
        .unwrap();
    assert!(prod.poi[midday] > 50e6, "{}", prod.poi[midday]);
}

#[test]
fn poi_is_derated_sum_of_units() {
    let system = elpaso();
    let weather = clear_day(&system, 60);
    let prod = simulate_plant(&system, &weather, &SimulationOptions::default()).unwrap();
    let derate = system.kpc * system.kt * system.kin;
    for row in 0..prod.timestamps.len() {
        let sum: f64 = prod.conversion_units.iter().map(|c| c.ac_power[row]).sum();
        assert_eq!(prod.poi[row], sum * derate);
    }
    for inv in &prod.inverters {
        let spec = &system.conversion_units[inv.cu].inverters[inv.inverter];
        for p in &inv.ac_power {
            assert!(*p <= spec.paco && *p >= -spec.p_night);
        }
    }
}

#[test]
fn dark_day_draws_night_power() {
    let system = elpaso();
    let n = 24;
    let weather = WeatherSeries::regular(day_start(), 60, n)
        .with_values(Variable::Ghi, vec![0.0; n])
        .unwrap()
        .with_values(Variable::AmbientTemperature, vec![25.0; n])
        .unwrap();
    let prod = simulate_plant(&system, &weather, &SimulationOptions::default()).unwrap();
    for inv in &prod.inverters {
        assert!(inv.ac_power.iter().all(|p| *p == -300.0));
    }
    assert!(prod.poi.iter().all(|p| *p <= 0.0));
    assert!(prod.arrays.iter().all(|a| a.dc_power.iter().all(|p| *p == 0.0)));
}

#[test]
fn energy_matches_power_series() {
    let system = elpaso();
    let weather = clear_day(&system, 10);
    let prod = simulate_plant(&system, &weather, &SimulationOptions::default()).unwrap();
    let inv = &prod.inverters[5];
    let kw: Vec<f64> = inv.ac_power.iter().map(|w| w / 1000.0).collect();
    let expected = energy_from_power(&prod.timestamps, &kw, 10, 60).unwrap();
    assert_eq!(inv.energy, expected);
    assert_eq!(inv.energy.len(), 24);
}

#[test]
fn temperature_models_give_similar_production() {
    let system = elpaso();
    let base = clear_day(&system, 60);
    let sapm = simulate_plant(&system, &base, &SimulationOptions::default()).unwrap();
    let noct = simulate_plant(
        &system,
        &base,
        &SimulationOptions::with_temperature_model(TemperatureModel::Noct),
    )
    .unwrap();
    let module_temps: Vec<f64> = vec![45.0; base.len()];
    let measured = base
        .clone()
        .with_values(Variable::ModuleTemperature, module_temps)
        .unwrap();
    let module = simulate_plant(
        &system,
        &measured,
        &SimulationOptions::with_temperature_model(TemperatureModel::MeasuredModule),
    )
    .unwrap();
    let total = |p: &pvtwin_core::power::PlantProduction| p.poi.iter().sum::<f64>();
    let (a, b, c) = (total(&sapm), total(&noct), total(&module));
    assert!((a - b).abs() / a < 0.05, "{a} {b}");
    assert!((a - c).abs() / a < 0.10, "{a} {c}");
}

#[test]
fn missing_temperature_column_is_reported() {
    let system = elpaso();
    let weather = WeatherSeries::regular(day_start(), 60, 2)
        .with_values(Variable::Ghi, vec![0.0; 2])
        .unwrap();
    assert!(simulate_plant(&system, &weather, &SimulationOptions::default()).is_err());
}

#[test]
fn csv_exports_have_one_column_per_series() {
    let system = elpaso();
    let weather = clear_day(&system, 60);
    let prod = simulate_plant(&system, &weather, &SimulationOptions::default()).unwrap();
    let csv = prod.to_csv();
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 384 + 48 + 12 + 1);
    assert_eq!(csv.lines().count(), 25);
    let summary = prod.summary_csv();
    assert_eq!(summary.lines().next().unwrap().split(',').count(), 1 + 48 + 1);
}
