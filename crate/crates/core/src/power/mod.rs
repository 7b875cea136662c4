//! Cell temperature, DC production, array scaling, wiring losses, inverter
//! conversion and energy aggregation.

mod diode;
mod simulate;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{ArrayConfig, Inverter, ThermalParams};

pub use diode::{
    current_at_voltage, fit_reference, single_diode_params, solve_mpp, voc, DiodeError, DiodeParams,
    OperatingPoint, ReferenceParams,
};
pub use simulate::{
    simulate_plant, ArraySeries, InverterSeries, PlantProduction, SimulationError, SimulationOptions,
    TemperatureModel, UnitSeries,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("series is not on a uniform {expected}-minute grid (row {row})")]
    NonuniformSeries { expected: i64, row: usize },
    #[error("{0} timestamps for {1} values")]
    LengthMismatch(usize, usize),
}

/// Back-of-module and cell temperature (°C) from the Sandia thermal model.
pub fn cell_temperature_sapm(poa: f64, t_amb: f64, wind_speed: f64, params: &ThermalParams) -> (f64, f64) {
    let t_panel = poa * (params.a + params.b * wind_speed).exp() + t_amb;
    let t_cell = t_panel + poa / 1000.0 * params.delta_t;
    (t_panel, t_cell)
}

/// Cell temperature from a measured back-of-module temperature.
pub fn cell_temperature_from_module(poa: f64, t_module: f64, delta_t: f64) -> f64 {
    t_module + poa / 1000.0 * delta_t
}

/// NOCT cell temperature.
pub fn cell_temperature_noct(poa: f64, t_amb: f64, t_noct: f64) -> f64 {
    t_amb + (t_noct - 20.0) * (poa / 800.0)
}

/// P_DC = (V_DC · PS) · (I_DC · PP)
pub fn scale_to_array(op: &OperatingPoint, array: &ArrayConfig) -> f64 {
    (op.v_mp * array.modules_per_string as f64) * (op.i_mp * array.strings_per_inverter as f64)
}

pub fn wire_resistance(resistivity: f64, length: f64, area: f64) -> f64 {
    resistivity * length / area
}

/// Ohmic loss (W) of `number_of_wires` parallel conductors sharing `current`.
pub fn wiring_loss(resistivity: f64, length: f64, area: f64, current: f64, number_of_wires: u32) -> f64 {
    let n = number_of_wires.max(1) as f64;
    let per_wire = current / n;
    n * per_wire * per_wire * wire_resistance(resistivity, length, area)
}

/// Sandia grid-connected inverter model.
pub fn sandia_inverter_ac(inv: &Inverter, v_dc: f64, p_dc: f64) -> f64 {
    if p_dc <= inv.pso {
        return -inv.p_night.abs();
    }
    let dv = v_dc - inv.vdco;
    let a = inv.pdco * (1.0 + inv.c1 * dv);
    let b = inv.pso * (1.0 + inv.c2 * dv);
    let c = inv.c0 * (1.0 + inv.c3 * dv);
    let p_ac = (inv.paco / (a - b) - c * (a - b)) * (p_dc - b) + c * (p_dc - b).powi(2);
    p_ac.min(inv.paco)
}

/// Energy (kWh) per aggregation window: E = r/60 · Σ P_AC (kW).
///
/// Windows start at multiples of `window_minutes` since midnight.
pub fn energy_from_power(
    timestamps: &[NaiveDateTime],
    power_kw: &[f64],
    resolution_minutes: i64,
    window_minutes: i64,
) -> Result<Vec<(NaiveDateTime, f64)>, EnergyError> {
    if timestamps.len() != power_kw.len() {
        return Err(EnergyError::LengthMismatch(timestamps.len(), power_kw.len()));
    }
    let step = Duration::minutes(resolution_minutes);
    for (i, w) in timestamps.windows(2).enumerate() {
        if w[1] - w[0] != step {
            return Err(EnergyError::NonuniformSeries {
                expected: resolution_minutes,
                row: i + 1,
            });
        }
    }
    let mut out: Vec<(NaiveDateTime, f64)> = Vec::new();
    for (t, p) in timestamps.iter().zip(power_kw) {
        let start = window_start(*t, window_minutes);
        match out.last_mut() {
            Some((w, sum)) if *w == start => *sum += p,
            _ => out.push((start, *p)),
        }
    }
    for (_, e) in &mut out {
        *e = *e * resolution_minutes as f64 / 60.0;
    }
    Ok(out)
}

fn window_start(t: NaiveDateTime, window_minutes: i64) -> NaiveDateTime {
    let minute_of_day = (t.hour() * 60 + t.minute()) as i64;
    let offset = minute_of_day % window_minutes.max(1);
    t.date().and_hms_opt(0, 0, 0).unwrap()
        + Duration::minutes(minute_of_day - offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyWindow {
    #[default]
    Hourly,
    Daily,
}
