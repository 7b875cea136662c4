//! GHI decomposition (DISC), plane-of-array transposition (Perez 1990) and
//! effective irradiance with incidence-angle and spectral modifiers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{SolarPosition, SurfaceOrientation};
use crate::plant::Technology;

/// Zenith at and beyond which DISC beam irradiance is forced to zero.
pub const DISC_MAX_ZENITH: f64 = 87.0;
/// Minimum cos(zenith) used when forming the clearness index.
const MIN_COS_ZENITH: f64 = 0.065;
const DISC_MAX_AIRMASS: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrradianceError {
    #[error("unknown module technology `{0}`")]
    UnknownTechnology(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrradianceComponents {
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
    /// Clearness index.
    pub kt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoaComponents {
    pub poa_direct: f64,
    pub poa_sky_diffuse: f64,
    pub poa_ground_diffuse: f64,
    pub poa_diffuse: f64,
    pub poa_global: f64,
    pub aoi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveIrradiance {
    pub g_effective: f64,
    pub iam: f64,
    pub smm: f64,
}

/// Maxwell's DISC model: returns `(dni, kt)`.
pub fn disc_dni(ghi: f64, apparent_zenith: f64, airmass: f64, e0: f64) -> (f64, f64) {
    if ghi <= 0.0 {
        return (0.0, 0.0);
    }
    let cos_z = apparent_zenith.to_radians().cos().max(MIN_COS_ZENITH);
    let kt = (ghi / (e0 * cos_z)).clamp(0.0, 1.0);
    if apparent_zenith >= DISC_MAX_ZENITH || !airmass.is_finite() {
        return (0.0, kt);
    }
    let kn = disc_kn(kt, airmass);
    ((kn * e0).clamp(0.0, e0), kt)
}

/// Direct-beam transmittance from the clearness index and airmass.
pub(crate) fn disc_kn(kt: f64, airmass: f64) -> f64 {
    let am = airmass.min(DISC_MAX_AIRMASS);
    let (a, b, c) = if kt <= 0.6 {
        (
            0.512 - 1.56 * kt + 2.286 * kt.powi(2) - 2.222 * kt.powi(3),
            0.37 + 0.962 * kt,
            -0.28 + 0.932 * kt - 2.048 * kt.powi(2),
        )
    } else {
        (
            -5.743 + 21.77 * kt - 27.49 * kt.powi(2) + 11.56 * kt.powi(3),
            41.4 - 118.5 * kt + 66.05 * kt.powi(2) + 31.9 * kt.powi(3),
            -47.01 + 184.2 * kt - 222.0 * kt.powi(2) + 73.81 * kt.powi(3),
        )
    };
    let delta_kn = a + b * (c * am).exp();
    let knc = 0.866 - 0.122 * am + 0.0121 * am.powi(2) - 0.000653 * am.powi(3)
        + 1.4e-5 * am.powi(4);
    knc - delta_kn
}

/// DHI = GHI - DNI·cos(Z), floored at zero.
pub fn dhi_closure(ghi: f64, dni: f64, apparent_zenith: f64) -> f64 {
    (ghi - dni * apparent_zenith.to_radians().cos()).max(0.0)
}

/// Runs DISC and the closure equation together.
pub fn decompose(ghi: f64, pos: &SolarPosition, airmass: Option<f64>) -> IrradianceComponents {
    let ghi = ghi.max(0.0);
    let e0 = pos.extraterrestrial_dni();
    let (dni, kt) = match airmass {
        Some(am) => disc_dni(ghi, pos.apparent_zenith, am, e0),
        None => (0.0, 0.0),
    };
    let dhi = if pos.apparent_zenith >= 90.0 {
        ghi
    } else {
        dhi_closure(ghi, dni, pos.apparent_zenith)
    };
    IrradianceComponents { ghi, dni, dhi, kt }
}

pub fn cos_incidence(surface: &SurfaceOrientation, pos: &SolarPosition) -> f64 {
    let z = pos.apparent_zenith.to_radians();
    let tilt = surface.surface_tilt.to_radians();
    let daz = (pos.azimuth - surface.surface_azimuth).to_radians();
    (z.cos() * tilt.cos() + z.sin() * tilt.sin() * daz.cos()).clamp(-1.0, 1.0)
}

/// Angle between module normal and sun beam, degrees in [0, 180].
pub fn incidence_angle(surface: &SurfaceOrientation, pos: &SolarPosition) -> f64 {
    cos_incidence(surface, pos).acos().to_degrees()
}

/// Brightness-coefficient table: per sky-clearness bin,
/// `[f11, f12, f13, f21, f22, f23]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerezCoefficients(pub [[f64; 6]; 8]);

impl PerezCoefficients {
    /// All-sites composite table (Perez et al. 1990).
    pub const COMPOSITE_1990: Self = Self([
        [-0.008, 0.588, -0.062, -0.060, 0.072, -0.022],
        [0.130, 0.683, -0.151, -0.019, 0.066, -0.029],
        [0.330, 0.487, -0.221, 0.055, -0.064, -0.026],
        [0.568, 0.187, -0.295, 0.109, -0.152, -0.014],
        [0.873, -0.392, -0.362, 0.226, -0.462, 0.001],
        [1.132, -1.237, -0.412, 0.288, -0.823, 0.056],
        [1.060, -1.600, -0.359, 0.264, -1.127, 0.131],
        [0.678, -0.327, -0.250, 0.156, -1.377, 0.251],
    ]);

    /// Every coefficient zero: reduces the model to the isotropic sky.
    pub const ISOTROPIC: Self = Self([[0.0; 6]; 8]);
}

impl Default for PerezCoefficients {
    fn default() -> Self {
        Self::COMPOSITE_1990
    }
}

/// Upper bounds of the sky-clearness bins 1..7; bin 8 is open-ended.
const EPSILON_BINS: [f64; 7] = [1.065, 1.23, 1.5, 1.95, 2.8, 4.5, 6.2];

pub(crate) fn clearness_bin(epsilon: f64) -> usize {
    EPSILON_BINS
        .iter()
        .position(|&edge| epsilon < edge)
        .unwrap_or(EPSILON_BINS.len())
}

/// Circumsolar (F1) and horizon (F2) brightening coefficients.
pub fn perez_brightening(
    dhi: f64,
    dni: f64,
    e0: f64,
    apparent_zenith: f64,
    airmass: f64,
    coeffs: &PerezCoefficients,
) -> (f64, f64) {
    if dhi <= 0.0 {
        return (0.0, 0.0);
    }
    const KAPPA: f64 = 1.041;
    let z = apparent_zenith.to_radians();
    let z3 = KAPPA * z.powi(3);
    let epsilon = ((dhi + dni) / dhi + z3) / (1.0 + z3);
    let delta = dhi * airmass / e0;
    let f = coeffs.0[clearness_bin(epsilon)];
    let f1 = (f[0] + f[1] * delta + f[2] * z).max(0.0);
    let f2 = f[3] + f[4] * delta + f[5] * z;
    (f1, f2)
}

/// Sky-diffuse irradiance on the tilted plane.
#[allow(clippy::too_many_arguments)]
pub fn perez_sky_diffuse(
    surface: &SurfaceOrientation,
    pos: &SolarPosition,
    dhi: f64,
    dni: f64,
    e0: f64,
    airmass: f64,
    coeffs: &PerezCoefficients,
) -> f64 {
    if dhi <= 0.0 {
        return 0.0;
    }
    let tilt = surface.surface_tilt.to_radians();
    let (f1, f2) = perez_brightening(dhi, dni, e0, pos.apparent_zenith, airmass, coeffs);
    let a = cos_incidence(surface, pos).max(0.0);
    let b = pos
        .apparent_zenith
        .to_radians()
        .cos()
        .max(85f64.to_radians().cos());
    let isotropic = 0.5 * (1.0 - f1) * (1.0 + tilt.cos());
    let circumsolar = f1 * a / b;
    let horizon = f2 * tilt.sin();
    (dhi * (isotropic + circumsolar + horizon)).max(0.0)
}

pub fn ground_diffuse(ghi: f64, surface_tilt: f64, albedo: f64) -> f64 {
    ghi * albedo * (1.0 - surface_tilt.to_radians().cos()) * 0.5
}

/// Plane-of-array irradiance with the composite Perez coefficients.
pub fn perez_poa(
    components: &IrradianceComponents,
    e0: f64,
    surface: &SurfaceOrientation,
    pos: &SolarPosition,
    airmass: Option<f64>,
    albedo: f64,
) -> PoaComponents {
    perez_poa_with(
        components,
        e0,
        surface,
        pos,
        airmass,
        albedo,
        &PerezCoefficients::COMPOSITE_1990,
    )
}

pub fn perez_poa_with(
    components: &IrradianceComponents,
    e0: f64,
    surface: &SurfaceOrientation,
    pos: &SolarPosition,
    airmass: Option<f64>,
    albedo: f64,
    coeffs: &PerezCoefficients,
) -> PoaComponents {
    let cos_aoi = cos_incidence(surface, pos);
    let aoi = cos_aoi.acos().to_degrees();
    let sky = match airmass {
        Some(am) if pos.apparent_zenith < 90.0 => perez_sky_diffuse(
            surface,
            pos,
            components.dhi,
            components.dni,
            e0,
            am,
            coeffs,
        ),
        // sun down: diffuse light only, treated as isotropic
        _ => components.dhi * 0.5 * (1.0 + surface.surface_tilt.to_radians().cos()),
    };
    let ground = ground_diffuse(components.ghi, surface.surface_tilt, albedo).max(0.0);
    let direct = if pos.apparent_zenith < 90.0 {
        (components.dni * cos_aoi).max(0.0)
    } else {
        0.0
    };
    let diffuse = sky + ground;
    PoaComponents {
        poa_direct: direct,
        poa_sky_diffuse: sky,
        poa_ground_diffuse: ground,
        poa_diffuse: diffuse,
        poa_global: direct + diffuse,
        aoi,
    }
}

pub const DEFAULT_IAM_B0: f64 = 0.05;

/// ASHRAE incidence-angle modifier.
pub fn iam(aoi: f64, b0: f64) -> f64 {
    if aoi >= 90.0 {
        return 0.0;
    }
    (1.0 - b0 * (1.0 / aoi.to_radians().cos() - 1.0)).clamp(0.0, 1.0)
}

/// Lee & Panchula spectral-correction coefficients per technology.
pub fn spectral_coefficients(technology: Technology) -> [f64; 6] {
    match technology {
        Technology::CdTe => [0.86273, -0.038948, -0.012506, 0.098871, 0.084658, -0.0042948],
        Technology::MonoSi => [0.85914, -0.020880, -0.0058853, 0.12029, 0.026814, -0.0017810],
        Technology::MultiSi => [0.84090, -0.027539, -0.0079224, 0.13570, 0.038024, -0.0021218],
        Technology::Cigs => [0.85252, -0.022314, -0.0047216, 0.13666, 0.013342, -0.0008945],
        Technology::AmorphousSi => [1.12094, -0.047620, -0.0083627, -0.10443, 0.098382, -0.0033818],
    }
}

pub const SMM_BOUNDS: (f64, f64) = (0.8, 1.2);

/// Spectral mismatch modifier from absolute airmass and precipitable water
/// (cm).
pub fn spectral_mismatch(absolute_airmass: f64, precipitable_water: f64, technology: Technology) -> f64 {
    let c = spectral_coefficients(technology);
    let pw = precipitable_water.clamp(0.1, 8.0);
    let ama = absolute_airmass.clamp(0.58, 10.0);
    let m = c[0] + c[1] * ama + c[2] * pw + c[3] * ama.sqrt() + c[4] * pw.sqrt()
        + c[5] * ama / pw.sqrt();
    m.clamp(SMM_BOUNDS.0, SMM_BOUNDS.1)
}

/// Same as [`spectral_mismatch`] with the technology given by name.
pub fn spectral_mismatch_named(
    absolute_airmass: f64,
    precipitable_water: f64,
    technology: &str,
) -> Result<f64, IrradianceError> {
    let tech = Technology::parse(technology)
        .ok_or_else(|| IrradianceError::UnknownTechnology(technology.to_string()))?;
    Ok(spectral_mismatch(absolute_airmass, precipitable_water, tech))
}

/// G_eff = SMM · |DNI_POA · IAM + DHI_POA|
pub fn effective_irradiance(poa: &PoaComponents, iam: f64, smm: f64) -> EffectiveIrradiance {
    EffectiveIrradiance {
        g_effective: smm * (poa.poa_direct * iam + poa.poa_diffuse).abs(),
        iam,
        smm,
    }
}

/// Rear-side irradiance as a fraction of the front, for bifacial panels.
pub const DEFAULT_REAR_FRACTION: f64 = 0.08;

pub fn bifacial_gain(g_effective: f64, bifaciality: f64, rear_fraction: f64) -> f64 {
    g_effective * (1.0 + bifaciality * rear_fraction)
}
