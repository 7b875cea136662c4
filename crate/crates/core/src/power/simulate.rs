//! Full plant cascade: weather → irradiance → arrays → inverters →
//! conversion units → point of interconnection.

use std::fmt::Write as _;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::diode::{fit_reference, solve_mpp, DiodeError, OperatingPoint, ReferenceParams};
use super::{
    cell_temperature_from_module, cell_temperature_noct, cell_temperature_sapm, energy_from_power,
    sandia_inverter_ac, scale_to_array, wiring_loss, EnergyError,
};
use crate::geometry::{
    absolute_airmass, altitude_to_pressure, precipitable_water, relative_airmass, relative_humidity,
    solar_position_with, tracker_orientation, Atmosphere, GeometryError, SolarPosition,
};
use crate::irradiance::{
    bifacial_gain, decompose, effective_irradiance, iam, perez_poa, spectral_mismatch, DEFAULT_IAM_B0,
    DEFAULT_REAR_FRACTION,
};
use crate::plant::{ArrayConfig, ArrayPath, ConversionUnit, Panel, PlantSystem, ThermalParams, Tracker};
use crate::weather::{Variable, WeatherSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("weather has no {0} column")]
    MissingColumn(Variable),
    #[error("missing {variable} value at row {row}")]
    MissingValue { variable: Variable, row: usize },
    #[error("{path}: {source}")]
    Geometry {
        path: String,
        #[source]
        source: GeometryError,
    },
    #[error("{path}: {source}")]
    Diode {
        path: String,
        #[source]
        source: DiodeError,
    },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureModel {
    #[default]
    Sapm,
    MeasuredModule,
    Noct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub temperature_model: TemperatureModel,
    /// Years since commissioning, for the degradation derate.
    pub plant_age_years: f64,
    pub rear_fraction: f64,
    /// Used when a weather series carries neither humidity nor dew point.
    pub dew_point_depression: f64,
    /// Used when a weather series has no wind column.
    pub default_wind_speed: f64,
    /// Energy aggregation window.
    pub energy_window_minutes: i64,
    /// Grid spacing assumed for single-row weather.
    pub default_resolution_minutes: i64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            temperature_model: TemperatureModel::Sapm,
            plant_age_years: 0.0,
            rear_fraction: DEFAULT_REAR_FRACTION,
            dew_point_depression: 10.0,
            default_wind_speed: 1.0,
            energy_window_minutes: 60,
            default_resolution_minutes: 10,
        }
    }
}

impl SimulationOptions {
    pub fn with_temperature_model(model: TemperatureModel) -> Self {
        Self {
            temperature_model: model,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySeries {
    pub path: ArrayPath,
    pub name: String,
    /// W
    pub dc_power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterSeries {
    pub cu: usize,
    pub inverter: usize,
    pub name: String,
    /// W
    pub ac_power: Vec<f64>,
    /// kWh per aggregation window, keyed by window start.
    pub energy: Vec<(NaiveDateTime, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSeries {
    pub name: String,
    /// W
    pub ac_power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantProduction {
    pub timestamps: Vec<NaiveDateTime>,
    pub resolution_minutes: i64,
    pub arrays: Vec<ArraySeries>,
    pub inverters: Vec<InverterSeries>,
    pub conversion_units: Vec<UnitSeries>,
    /// W, after the kpc·kt·kin derates.
    pub poi: Vec<f64>,
}

impl PlantProduction {
    /// One column per (level, name), power in kW.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp");
        for a in &self.arrays {
            write!(out, ",dc:{}", a.name).unwrap();
        }
        for i in &self.inverters {
            write!(out, ",ac:{}", i.name).unwrap();
        }
        for c in &self.conversion_units {
            write!(out, ",cu:{}", c.name).unwrap();
        }
        out.push_str(",poi\n");
        for (row, t) in self.timestamps.iter().enumerate() {
            out.push_str(&t.format("%Y-%m-%dT%H:%M:%S").to_string());
            let cols = self
                .arrays
                .iter()
                .map(|a| a.dc_power[row])
                .chain(self.inverters.iter().map(|i| i.ac_power[row]))
                .chain(self.conversion_units.iter().map(|c| c.ac_power[row]))
                .chain(std::iter::once(self.poi[row]));
            for w in cols {
                write!(out, ",{:.6}", w / 1000.0).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Energy per window (kWh) for every inverter and the plant total.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("window_start");
        for i in &self.inverters {
            write!(out, ",{}", i.name).unwrap();
        }
        out.push_str(",total\n");
        let windows = self.inverters.first().map(|i| i.energy.len()).unwrap_or(0);
        for w in 0..windows {
            let start = self.inverters[0].energy[w].0;
            out.push_str(&start.format("%Y-%m-%dT%H:%M:%S").to_string());
            let mut total = 0.0;
            for i in &self.inverters {
                let e = i.energy[w].1;
                total += e;
                write!(out, ",{e:.6}").unwrap();
            }
            writeln!(out, ",{total:.6}").unwrap();
        }
        out
    }

    pub fn inverter(&self, cu: usize, inverter: usize) -> Option<&InverterSeries> {
        self.inverters.iter().find(|s| s.cu == cu && s.inverter == inverter)
    }

    pub fn array(&self, path: ArrayPath) -> Option<&ArraySeries> {
        self.arrays.iter().find(|s| s.path == path)
    }
}

/// Weather values resolved for one row.
#[derive(Debug, Clone, Copy)]
struct Conditions {
    ghi: f64,
    t_amb: Option<f64>,
    t_module: Option<f64>,
    wind_speed: f64,
    pressure: Option<f64>,
    rh: Option<f64>,
}

fn required(weather: &WeatherSeries, var: Variable, row: usize) -> Result<f64, SimulationError> {
    weather
        .get(var, row)
        .ok_or(SimulationError::MissingValue { variable: var, row })
}

fn optional(weather: &WeatherSeries, var: Variable, row: usize) -> Result<Option<f64>, SimulationError> {
    if weather.has(var) {
        required(weather, var, row).map(Some)
    } else {
        Ok(None)
    }
}

fn conditions(weather: &WeatherSeries, row: usize, options: &SimulationOptions) -> Result<Conditions, SimulationError> {
    let ghi = match (weather.get(Variable::Ghi, row), weather.get(Variable::Ghi2, row)) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(SimulationError::MissingValue {
                variable: Variable::Ghi,
                row,
            })
        }
    };
    let t_amb = optional(weather, Variable::AmbientTemperature, row)?;
    let t_module = optional(weather, Variable::ModuleTemperature, row)?;
    let wind_speed = optional(weather, Variable::WindSpeed, row)?
        .unwrap_or(options.default_wind_speed)
        .max(0.0);
    let pressure = optional(weather, Variable::Pressure, row)?;
    let rh = match (optional(weather, Variable::RelativeHumidity, row)?, t_amb) {
        (Some(rh), _) => Some(rh),
        (None, Some(t)) => {
            let dew = optional(weather, Variable::DewPoint, row)?
                .unwrap_or(t - options.dew_point_depression)
                .min(t);
            relative_humidity(t, dew).ok()
        }
        (None, None) => None,
    };
    Ok(Conditions {
        ghi,
        t_amb,
        t_module,
        wind_speed,
        pressure,
        rh,
    })
}

/// Precipitable water used when neither temperature nor humidity is known.
const DEFAULT_PRECIPITABLE_WATER: f64 = 1.42;

fn check_columns(weather: &WeatherSeries, model: TemperatureModel) -> Result<(), SimulationError> {
    if !weather.has(Variable::Ghi) && !weather.has(Variable::Ghi2) {
        return Err(SimulationError::MissingColumn(Variable::Ghi));
    }
    let temp = match model {
        TemperatureModel::MeasuredModule => Variable::ModuleTemperature,
        _ => Variable::AmbientTemperature,
    };
    if !weather.has(temp) {
        return Err(SimulationError::MissingColumn(temp));
    }
    Ok(())
}

struct PanelFit<'a> {
    panel: &'a Panel,
    reference: ReferenceParams,
}

/// Per-timestamp memo of module operating points shared by arrays with the
/// same panel and tracker.
struct PointCache<'a> {
    entries: Vec<(&'a Panel, Tracker, OperatingPoint)>,
}

impl<'a> PointCache<'a> {
    fn get(&self, panel: &Panel, tracker: &Tracker) -> Option<OperatingPoint> {
        self.entries
            .iter()
            .find(|(p, t, _)| *p == panel && t == tracker)
            .map(|e| e.2)
    }
}

struct UnitResult {
    arrays: Vec<ArraySeries>,
    inverters: Vec<(String, Vec<f64>)>,
    unit: UnitSeries,
}

#[allow(clippy::too_many_arguments)]
fn module_point(
    array: &ArrayConfig,
    reference: &ReferenceParams,
    cu: &ConversionUnit,
    pos: &SolarPosition,
    cond: &Conditions,
    thermal: &ThermalParams,
    options: &SimulationOptions,
    path: &str,
) -> Result<OperatingPoint, SimulationError> {
    let panel = &array.panel;
    let am = relative_airmass(pos.apparent_zenith);
    let e0 = pos.extraterrestrial_dni();
    let components = decompose(cond.ghi, pos, am);
    let orientation = tracker_orientation(&array.tracker, pos);
    let poa = perez_poa(
        &components,
        e0,
        &orientation.surface,
        pos,
        am,
        cu.location.surface_albedo,
    );
    let pressure = cond
        .pressure
        .unwrap_or_else(|| altitude_to_pressure(cu.location.altitude));
    let smm = match am {
        Some(rel) => {
            let pw = match (cond.t_amb, cond.rh) {
                (Some(t), Some(rh)) => precipitable_water(t, rh),
                _ => DEFAULT_PRECIPITABLE_WATER,
            };
            spectral_mismatch(absolute_airmass(rel, pressure), pw, panel.technology)
        }
        None => 1.0,
    };
    let modifier = iam(poa.aoi, panel.iam_b0.unwrap_or(DEFAULT_IAM_B0));
    let mut g = effective_irradiance(&poa, modifier, smm).g_effective;
    if panel.bifacial {
        g = bifacial_gain(g, panel.bifaciality, options.rear_fraction);
    }
    g *= (1.0 - panel.degradation).powf(options.plant_age_years);

    let t_cell = match options.temperature_model {
        TemperatureModel::Sapm => {
            let t_amb = cond.t_amb.expect("checked column");
            cell_temperature_sapm(poa.poa_global, t_amb, cond.wind_speed, thermal).1
        }
        TemperatureModel::MeasuredModule => {
            cell_temperature_from_module(poa.poa_global, cond.t_module.expect("checked column"), thermal.delta_t)
        }
        TemperatureModel::Noct => cell_temperature_noct(poa.poa_global, cond.t_amb.expect("checked column"), panel.noct),
    };
    solve_mpp(&reference.at(g, t_cell)).map_err(|source| SimulationError::Diode {
        path: path.to_string(),
        source,
    })
}

fn array_name(cu: &ConversionUnit, inverter: &crate::plant::Inverter, sb: usize) -> String {
    format!("{}/{}/sb{}", cu.name, inverter.name, sb + 1)
}

fn simulate_unit(
    cu_index: usize,
    cu: &ConversionUnit,
    fits: &[PanelFit<'_>],
    weather: &WeatherSeries,
    thermal: &ThermalParams,
    options: &SimulationOptions,
) -> Result<UnitResult, SimulationError> {
    let n = weather.len();
    let atmosphere = Atmosphere::default();
    let mut arrays: Vec<ArraySeries> = Vec::new();
    let mut inverters: Vec<(String, Vec<f64>)> = cu
        .inverters
        .iter()
        .map(|inv| (format!("{}/{}", cu.name, inv.name), vec![0.0; n]))
        .collect();
    for (j, inv) in cu.inverters.iter().enumerate() {
        for (k, _) in inv.string_boxes.iter().enumerate() {
            arrays.push(ArraySeries {
                path: ArrayPath {
                    cu: cu_index,
                    inverter: j,
                    string_box: k,
                },
                name: array_name(cu, inv, k),
                dc_power: vec![0.0; n],
            });
        }
    }
    let mut unit = vec![0.0; n];

    for row in 0..n {
        let local = weather.timestamps()[row];
        let cond = conditions(weather, row, options)?;
        let pos = solar_position_with(&cu.location, local, &atmosphere).map_err(|source| {
            SimulationError::Geometry {
                path: cu.name.clone(),
                source,
            }
        })?;
        let mut cache = PointCache { entries: Vec::new() };
        let mut array_index = 0;
        let mut cu_sum = 0.0;
        for (j, inv) in cu.inverters.iter().enumerate() {
            let mut dc_in = 0.0;
            let mut bus_voltage = 0.0;
            let mut largest = 0u64;
            for sb in &inv.string_boxes {
                let array = &sb.array;
                let op = match cache.get(&array.panel, &array.tracker) {
                    Some(op) => op,
                    None => {
                        let fit = fits
                            .iter()
                            .find(|f| *f.panel == array.panel)
                            .expect("every panel is fitted");
                        let op = module_point(
                            array,
                            &fit.reference,
                            cu,
                            &pos,
                            &cond,
                            thermal,
                            options,
                            &arrays[array_index].name,
                        )?;
                        cache.entries.push((&array.panel, array.tracker, op));
                        op
                    }
                };
                let p_dc = scale_to_array(&op, array);
                arrays[array_index].dc_power[row] = p_dc;
                array_index += 1;

                let current = op.i_mp * array.strings_per_inverter as f64;
                let loss = wiring_loss(
                    sb.electrical_resistivity,
                    sb.wire_length,
                    sb.cross_sectional_area,
                    current,
                    sb.number_of_wires,
                );
                dc_in += (p_dc - loss).max(0.0) * (1.0 - sb.losses);

                let size = array.modules_per_string as u64 * array.strings_per_inverter as u64;
                if size > largest {
                    largest = size;
                    bus_voltage = op.v_mp * array.modules_per_string as f64;
                }
            }
            let mut ac = sandia_inverter_ac(inv, bus_voltage, dc_in);
            if ac > 0.0 {
                ac *= 1.0 - inv.losses;
            }
            inverters[j].1[row] = ac;
            cu_sum += ac;
        }
        unit[row] = if cu_sum > 0.0 {
            let current = cu_sum / cu.wire_voltage;
            let loss = wiring_loss(
                cu.electrical_resistivity,
                cu.wire_length,
                cu.cross_sectional_area,
                current,
                1,
            );
            (cu_sum - loss).max(0.0) * (1.0 - cu.losses)
        } else {
            cu_sum
        };
    }
    Ok(UnitResult {
        arrays,
        inverters,
        unit: UnitSeries {
            name: cu.name.clone(),
            ac_power: unit,
        },
    })
}

/// Runs the full production chain for every array, inverter and conversion
/// unit of `system`. Conversion units are evaluated in parallel; the output
/// order follows the document order regardless of scheduling.
pub fn simulate_plant(
    system: &PlantSystem,
    weather: &WeatherSeries,
    options: &SimulationOptions,
) -> Result<PlantProduction, SimulationError> {
    check_columns(weather, options.temperature_model)?;
    let thermal = system.thermal();

    let mut panels: Vec<&Panel> = Vec::new();
    for path in system.arrays() {
        let panel = &system.string_box(path).array.panel;
        if !panels.contains(&panel) {
            panels.push(panel);
        }
    }
    let fits = panels
        .into_iter()
        .map(|panel| {
            fit_reference(panel)
                .map(|reference| PanelFit { panel, reference })
                .map_err(|source| SimulationError::Diode {
                    path: format!("panel {}", panel.name),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let units = system
        .conversion_units
        .par_iter()
        .enumerate()
        .map(|(i, cu)| simulate_unit(i, cu, &fits, weather, &thermal, options))
        .collect::<Result<Vec<_>, _>>()?;

    let resolution = weather
        .resolution_minutes()
        .unwrap_or(options.default_resolution_minutes);
    let derate = system.poi_derate();
    let n = weather.len();
    let mut poi = vec![0.0; n];
    let mut arrays = Vec::new();
    let mut inverters = Vec::new();
    let mut conversion_units = Vec::new();
    for (cu_index, unit) in units.into_iter().enumerate() {
        for (row, p) in unit.unit.ac_power.iter().enumerate() {
            poi[row] += p;
        }
        arrays.extend(unit.arrays);
        for (j, (name, ac_power)) in unit.inverters.into_iter().enumerate() {
            let kw: Vec<f64> = ac_power.iter().map(|w| w / 1000.0).collect();
            let energy = energy_from_power(weather.timestamps(), &kw, resolution, options.energy_window_minutes)?;
            inverters.push(InverterSeries {
                cu: cu_index,
                inverter: j,
                name,
                ac_power,
                energy,
            });
        }
        conversion_units.push(unit.unit);
    }
    for p in &mut poi {
        *p *= derate;
    }
    Ok(PlantProduction {
        timestamps: weather.timestamps().to_vec(),
        resolution_minutes: resolution,
        arrays,
        inverters,
        conversion_units,
        poi,
    })
}
