//! NREL Solar Position Algorithm (Reda & Andreas), topocentric variant.

use chrono::{DateTime, Datelike, Timelike, Utc};

use super::spa_tables::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaInput {
    pub latitude: f64,
    pub longitude: f64,
    /// Meters above sea level.
    pub elevation: f64,
    /// Annual average local pressure, hPa (= mbar).
    pub pressure: f64,
    /// Annual average local temperature, °C.
    pub temperature: f64,
    /// TT - UT1 in seconds.
    pub delta_t: f64,
    /// Atmospheric refraction at sunrise/sunset, degrees.
    pub atmos_refract: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaOutput {
    pub zenith: f64,
    pub apparent_zenith: f64,
    pub azimuth: f64,
    /// Earth radius vector in AU.
    pub earth_sun_distance: f64,
}

pub(crate) fn julian_day(utc: DateTime<Utc>) -> f64 {
    let mut year = utc.year() as f64;
    let mut month = utc.month() as f64;
    let day = utc.day() as f64
        + (utc.hour() as f64
            + (utc.minute() as f64 + (utc.second() as f64 + utc.nanosecond() as f64 * 1e-9) / 60.0)
                / 60.0)
            / 24.0;
    if month < 3.0 {
        month += 12.0;
        year -= 1.0;
    }
    let mut jd = (365.25 * (year + 4716.0)).trunc() + (30.6001 * (month + 1.0)).trunc() + day
        - 1524.5;
    if jd > 2299160.0 {
        let a = (year / 100.0).trunc();
        jd += 2.0 - a + (a / 4.0).trunc();
    }
    jd
}

fn limit_degrees(deg: f64) -> f64 {
    deg.rem_euclid(360.0)
}

fn series(terms: &[[f64; 3]], jme: f64) -> f64 {
    terms.iter().map(|t| t[0] * (t[1] + t[2] * jme).cos()).sum()
}

fn polynomial(parts: &[f64], jme: f64) -> f64 {
    parts
        .iter()
        .rev()
        .fold(0.0, |acc, &coef| acc * jme + coef)
}

fn heliocentric_longitude(jme: f64) -> f64 {
    let parts = [
        series(&L0, jme),
        series(&L1, jme),
        series(&L2, jme),
        series(&L3, jme),
        series(&L4, jme),
        series(&L5, jme),
    ];
    limit_degrees((polynomial(&parts, jme) / 1e8).to_degrees())
}

fn heliocentric_latitude(jme: f64) -> f64 {
    let parts = [series(&B0, jme), series(&B1, jme)];
    (polynomial(&parts, jme) / 1e8).to_degrees()
}

pub(crate) fn earth_radius_vector(jme: f64) -> f64 {
    let parts = [
        series(&R0, jme),
        series(&R1, jme),
        series(&R2, jme),
        series(&R3, jme),
        series(&R4, jme),
    ];
    polynomial(&parts, jme) / 1e8
}

fn nutation(jce: f64) -> (f64, f64) {
    let x = [
        297.85036 + 445267.111480 * jce - 0.0019142 * jce.powi(2) + jce.powi(3) / 189474.0,
        357.52772 + 35999.050340 * jce - 0.0001603 * jce.powi(2) - jce.powi(3) / 300000.0,
        134.96298 + 477198.867398 * jce + 0.0086972 * jce.powi(2) + jce.powi(3) / 56250.0,
        93.27191 + 483202.017538 * jce - 0.0036825 * jce.powi(2) + jce.powi(3) / 327270.0,
        125.04452 - 1934.136261 * jce + 0.0020708 * jce.powi(2) + jce.powi(3) / 450000.0,
    ];
    let mut dpsi = 0.0;
    let mut deps = 0.0;
    for (args, c) in NUTATION_ARGS.iter().zip(NUTATION_COEFFS.iter()) {
        let arg: f64 = args
            .iter()
            .zip(x.iter())
            .map(|(&y, &xv)| y as f64 * xv)
            .sum::<f64>()
            .to_radians();
        dpsi += (c[0] + c[1] * jce) * arg.sin();
        deps += (c[2] + c[3] * jce) * arg.cos();
    }
    (dpsi / 36_000_000.0, deps / 36_000_000.0)
}

fn mean_obliquity(jme: f64) -> f64 {
    let u = jme / 10.0;
    let coeffs = [
        84381.448, -4680.93, -1.55, 1999.25, -51.38, -249.67, -39.05, 7.12, 27.87, 5.79, 2.45,
    ];
    polynomial(&coeffs, u)
}

pub(crate) struct TimeScales {
    pub jd: f64,
    pub jc: f64,
    pub jce: f64,
    pub jme: f64,
}

pub(crate) fn time_scales(utc: DateTime<Utc>, delta_t: f64) -> TimeScales {
    let jd = julian_day(utc);
    let jde = jd + delta_t / 86400.0;
    let jc = (jd - 2451545.0) / 36525.0;
    let jce = (jde - 2451545.0) / 36525.0;
    TimeScales {
        jd,
        jc,
        jce,
        jme: jce / 10.0,
    }
}

pub fn solar_position(utc: DateTime<Utc>, input: &SpaInput) -> SpaOutput {
    let ts = time_scales(utc, input.delta_t);

    let l = heliocentric_longitude(ts.jme);
    let b = heliocentric_latitude(ts.jme);
    let r = earth_radius_vector(ts.jme);

    let theta = limit_degrees(l + 180.0);
    let beta = -b;

    let (dpsi, deps) = nutation(ts.jce);
    let epsilon = mean_obliquity(ts.jme) / 3600.0 + deps;

    let aberration = -20.4898 / (3600.0 * r);
    let lambda = theta + dpsi + aberration;

    let nu0 = limit_degrees(
        280.46061837 + 360.98564736629 * (ts.jd - 2451545.0) + 0.000387933 * ts.jc.powi(2)
            - ts.jc.powi(3) / 38710000.0,
    );
    let nu = nu0 + dpsi * epsilon.to_radians().cos();

    let (lam_r, eps_r, beta_r) = (lambda.to_radians(), epsilon.to_radians(), beta.to_radians());
    let alpha = limit_degrees(
        (lam_r.sin() * eps_r.cos() - beta_r.tan() * eps_r.sin())
            .atan2(lam_r.cos())
            .to_degrees(),
    );
    let delta =
        (beta_r.sin() * eps_r.cos() + beta_r.cos() * eps_r.sin() * lam_r.sin()).asin();

    let h = limit_degrees(nu + input.longitude - alpha).to_radians();

    // Topocentric parallax corrections.
    let xi = (8.794 / (3600.0 * r)).to_radians();
    let phi = input.latitude.to_radians();
    let u = (0.99664719 * phi.tan()).atan();
    let x = u.cos() + input.elevation / 6378140.0 * phi.cos();
    let y = 0.99664719 * u.sin() + input.elevation / 6378140.0 * phi.sin();
    let denom = delta.cos() - x * xi.sin() * h.cos();
    let delta_alpha = (-x * xi.sin() * h.sin()).atan2(denom);
    let delta_prime = ((delta.sin() - y * xi.sin()) * delta_alpha.cos()).atan2(denom);
    let h_prime = h - delta_alpha;

    let e0 = (phi.sin() * delta_prime.sin() + phi.cos() * delta_prime.cos() * h_prime.cos())
        .asin()
        .to_degrees();
    let refraction = if e0 >= -1.0 * (0.26667 + input.atmos_refract) {
        (input.pressure / 1010.0) * (283.0 / (273.0 + input.temperature)) * 1.02
            / (60.0 * (e0 + 10.3 / (e0 + 5.11)).to_radians().tan())
    } else {
        0.0
    };
    let e = e0 + refraction;

    let gamma = h_prime
        .sin()
        .atan2(h_prime.cos() * phi.sin() - delta_prime.tan() * phi.cos())
        .to_degrees();
    let azimuth = limit_degrees(gamma + 180.0);

    SpaOutput {
        zenith: 90.0 - e0,
        apparent_zenith: 90.0 - e,
        azimuth,
        earth_sun_distance: r,
    }
}

/// Espenak & Meeus polynomial estimate of TT - UT1 (seconds), 1900-2150.
pub fn estimate_delta_t(decimal_year: f64) -> f64 {
    let y = decimal_year;
    if y < 1920.0 {
        let t = y - 1900.0;
        -2.79 + 1.494119 * t - 0.0598939 * t.powi(2) + 0.0061966 * t.powi(3)
            - 0.000197 * t.powi(4)
    } else if y < 1941.0 {
        let t = y - 1920.0;
        21.20 + 0.84493 * t - 0.076100 * t.powi(2) + 0.0020936 * t.powi(3)
    } else if y < 1961.0 {
        let t = y - 1950.0;
        29.07 + 0.407 * t - t.powi(2) / 233.0 + t.powi(3) / 2547.0
    } else if y < 1986.0 {
        let t = y - 1975.0;
        45.45 + 1.067 * t - t.powi(2) / 260.0 - t.powi(3) / 718.0
    } else if y < 2005.0 {
        let t = y - 2000.0;
        63.86 + 0.3345 * t - 0.060374 * t.powi(2)
            + 0.0017275 * t.powi(3)
            + 0.000651814 * t.powi(4)
            + 0.00002373599 * t.powi(5)
    } else if y < 2050.0 {
        let t = y - 2000.0;
        62.92 + 0.32217 * t + 0.005589 * t.powi(2)
    } else {
        -20.0 + 32.0 * ((y - 1820.0) / 100.0).powi(2) - 0.5628 * (2150.0 - y)
    }
}
