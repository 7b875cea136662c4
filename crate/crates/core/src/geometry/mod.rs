//! Per-timestamp astronomy and atmosphere: solar position, airmass,
//! extraterrestrial irradiance, clear-sky irradiance, humidity and tracker
//! orientation.
//!
//! Angles are degrees at every public boundary.

mod spa;
#[rustfmt::skip]
mod spa_tables;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{Location, Tracker};

pub use spa::{estimate_delta_t, SpaInput, SpaOutput};

/// Solar constant used with the Earth-Sun distance correction, W/m².
pub const SOLAR_CONSTANT: f64 = 1366.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("date {0} outside the supported range 1900-2100")]
    OutOfRangeDate(String),
    #[error("invalid time zone offset {0} h")]
    InvalidTimeZone(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    pub apparent_zenith: f64,
    pub zenith: f64,
    pub apparent_elevation: f64,
    /// Degrees east of north.
    pub azimuth: f64,
    /// AU.
    pub earth_sun_distance: f64,
}

impl SolarPosition {
    pub fn is_daylight(&self) -> bool {
        self.apparent_elevation > 0.0
    }

    /// Top-of-atmosphere normal irradiance for this instant.
    pub fn extraterrestrial_dni(&self) -> f64 {
        SOLAR_CONSTANT / (self.earth_sun_distance * self.earth_sun_distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOrientation {
    pub surface_tilt: f64,
    pub surface_azimuth: f64,
}

/// Atmospheric state fed to the refraction correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atmosphere {
    /// hPa; `None` derives it from the site altitude.
    pub pressure: Option<f64>,
    pub temperature: f64,
    /// Seconds; `None` uses the polynomial estimate for the date.
    pub delta_t: Option<f64>,
    pub atmos_refract: f64,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Self {
            pressure: None,
            temperature: 12.0,
            delta_t: None,
            atmos_refract: 0.5667,
        }
    }
}

/// Standard-atmosphere pressure at `altitude` meters, hPa.
pub fn altitude_to_pressure(altitude: f64) -> f64 {
    1013.25 * (1.0 - 2.25577e-5 * altitude).powf(5.25588)
}

/// Converts a plant-local wall-clock stamp to UTC using the location offset.
pub fn local_to_utc(location: &Location, local: NaiveDateTime) -> Result<DateTime<Utc>, GeometryError> {
    let secs = (location.time_zone * 3600.0).round() as i32;
    let offset =
        FixedOffset::east_opt(secs).ok_or(GeometryError::InvalidTimeZone(location.time_zone))?;
    offset
        .from_local_datetime(&local)
        .single()
        .map(|t| t.with_timezone(&Utc))
        .ok_or(GeometryError::InvalidTimeZone(location.time_zone))
}

fn check_year(utc: &DateTime<Utc>) -> Result<(), GeometryError> {
    if (1900..=2100).contains(&utc.year()) {
        Ok(())
    } else {
        Err(GeometryError::OutOfRangeDate(utc.to_rfc3339()))
    }
}

fn decimal_year(utc: &DateTime<Utc>) -> f64 {
    utc.year() as f64 + (utc.ordinal0() as f64 + 0.5) / 365.25
}

/// Solar position for a plant-local timestamp with the default atmosphere.
pub fn solar_position(location: &Location, local: NaiveDateTime) -> Result<SolarPosition, GeometryError> {
    solar_position_with(location, local, &Atmosphere::default())
}

pub fn solar_position_with(
    location: &Location,
    local: NaiveDateTime,
    atmosphere: &Atmosphere,
) -> Result<SolarPosition, GeometryError> {
    let utc = local_to_utc(location, local)?;
    solar_position_utc(location, utc, atmosphere)
}

pub fn solar_position_utc(
    location: &Location,
    utc: DateTime<Utc>,
    atmosphere: &Atmosphere,
) -> Result<SolarPosition, GeometryError> {
    check_year(&utc)?;
    let input = SpaInput {
        latitude: location.latitude,
        longitude: location.longitude,
        elevation: location.altitude,
        pressure: atmosphere
            .pressure
            .unwrap_or_else(|| altitude_to_pressure(location.altitude)),
        temperature: atmosphere.temperature,
        delta_t: atmosphere
            .delta_t
            .unwrap_or_else(|| estimate_delta_t(decimal_year(&utc))),
        atmos_refract: atmosphere.atmos_refract,
    };
    let out = spa::solar_position(utc, &input);
    Ok(SolarPosition {
        apparent_zenith: out.apparent_zenith,
        zenith: out.zenith,
        apparent_elevation: 90.0 - out.apparent_zenith,
        azimuth: out.azimuth,
        earth_sun_distance: out.earth_sun_distance,
    })
}

/// Kasten & Young relative optical airmass; `None` when the sun is at or
/// below the horizon.
pub fn relative_airmass(apparent_zenith: f64) -> Option<f64> {
    if !(0.0..90.0).contains(&apparent_zenith) {
        return None;
    }
    let z = apparent_zenith;
    Some(1.0 / (z.to_radians().cos() + 0.50572 * (96.07995 - z).powf(-1.6364)))
}

/// Pressure-corrected airmass; `pressure` in hPa.
pub fn absolute_airmass(relative: f64, pressure: f64) -> f64 {
    relative * pressure * 100.0 / 101325.0
}

/// Extraterrestrial normal irradiance from the Earth radius vector.
pub fn extraterrestrial_dni(utc: DateTime<Utc>) -> f64 {
    let delta_t = estimate_delta_t(decimal_year(&utc));
    let ts = spa::time_scales(utc, delta_t);
    let r = spa::earth_radius_vector(ts.jme);
    SOLAR_CONSTANT / (r * r)
}

/// Airmass-transmittance clear-sky GHI.
pub fn clearsky_ghi_from(e0: f64, apparent_zenith: f64) -> f64 {
    match relative_airmass(apparent_zenith) {
        Some(am) => (e0 * apparent_zenith.to_radians().cos() * 0.7f64.powf(am.powf(0.678))).max(0.0),
        None => 0.0,
    }
}

pub fn clearsky_ghi(pos: &SolarPosition) -> f64 {
    clearsky_ghi_from(pos.extraterrestrial_dni(), pos.apparent_zenith)
}

/// Clear-sky denominator below which the index is defined as zero.
pub const CLEARSKY_GUARD: f64 = 10.0;

pub fn clearsky_index(measured: f64, clearsky: f64) -> f64 {
    if clearsky < CLEARSKY_GUARD {
        0.0
    } else {
        measured / clearsky
    }
}

/// Magnus saturation vapour pressure over water, hPa.
pub fn saturation_vapor_pressure(t: f64) -> f64 {
    6.112 * (17.62 * t / (243.12 + t)).exp()
}

/// Relative humidity (percent) from air and dew-point temperatures.
pub fn relative_humidity(t_amb: f64, dew_point: f64) -> Result<f64, GeometryError> {
    if dew_point > t_amb {
        return Err(GeometryError::InvalidInput(format!(
            "dew point {dew_point} exceeds air temperature {t_amb}"
        )));
    }
    Ok(100.0 * saturation_vapor_pressure(dew_point) / saturation_vapor_pressure(t_amb))
}

/// Gueymard (1994) precipitable water, cm, clamped to [0.1, 8].
pub fn precipitable_water(t_amb: f64, rh: f64) -> f64 {
    let rh = rh.clamp(0.0, 100.0);
    let t = t_amb + 273.15;
    let theta = t / 273.15;
    let vapor_density = 216.7 * rh / (100.0 * t)
        * (22.330 - 49.140 * (100.0 / t) - 10.922 * (100.0 / t).powi(2) - 0.39015 * t / 100.0)
            .exp();
    let height = 0.4976 + 1.5265 * theta + (13.6897 * theta - 14.9188 * theta.powi(3)).exp();
    (0.1 * height * vapor_density).clamp(0.1, 8.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    /// Signed rotation from horizontal; negative faces east for a N-S axis
    /// pointing south.
    pub rotation: f64,
    pub surface: SurfaceOrientation,
}

/// Unclamped, non-backtracked single-axis rotation for a horizontal axis.
pub fn true_tracking_angle(axis_azimuth: f64, pos: &SolarPosition) -> f64 {
    let z = pos.apparent_zenith.to_radians();
    let rel_az = (pos.azimuth - axis_azimuth).to_radians();
    let x = z.sin() * rel_az.sin();
    let up = z.cos();
    x.atan2(up).to_degrees()
}

/// Orientation of an array for the current sun position.
pub fn tracker_orientation(tracker: &Tracker, pos: &SolarPosition) -> TrackerState {
    if !tracker.with_tracker {
        return TrackerState {
            rotation: 0.0,
            surface: SurfaceOrientation {
                surface_tilt: tracker.surface_tilt,
                surface_azimuth: tracker.surface_azimuth.rem_euclid(360.0),
            },
        };
    }
    let mut rotation = if pos.is_daylight() {
        true_tracking_angle(tracker.axis_azimuth, pos)
    } else {
        0.0
    };
    if tracker.backtracking() && rotation != 0.0 {
        let gcr = tracker.ground_coverage_ratio();
        let shade = rotation.to_radians().cos().abs() / gcr;
        if shade < 1.0 {
            rotation -= rotation.signum() * shade.acos().to_degrees();
        }
    }
    let rotation = rotation.clamp(-tracker.max_angle, tracker.max_angle);
    TrackerState {
        rotation,
        surface: rotation_to_surface(tracker.axis_azimuth, rotation),
    }
}

pub fn rotation_to_surface(axis_azimuth: f64, rotation: f64) -> SurfaceOrientation {
    let side = if rotation >= 0.0 { 90.0 } else { -90.0 };
    SurfaceOrientation {
        surface_tilt: rotation.abs(),
        surface_azimuth: (axis_azimuth + side).rem_euclid(360.0),
    }
}
