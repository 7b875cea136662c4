//! Five-parameter single-diode model: datasheet fit with temperature
//! coefficient adjustment, translation to operating conditions, and the
//! maximum-power-point solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::Panel;

const BOLTZMANN_EV: f64 = 8.617333262e-5;
const EG_REF: f64 = 1.121;
const DEG_DT: f64 = -0.0002677;
const T_REF: f64 = 298.15;
const G_REF: f64 = 1000.0;
const MAX_ITER: usize = 100;
/// Temperature offset for the finite-difference temperature coefficients.
const COEFF_DT: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiodeError {
    #[error("reference fit for panel {panel} did not converge (residuals {residuals:?})")]
    FitFailure { panel: String, residuals: [f64; 3] },
    #[error("{0} did not converge within the iteration budget")]
    NoConvergence(&'static str),
    #[error("invalid diode parameters: {0}")]
    InvalidParams(String),
}

/// Translated five parameters at an operating condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    pub photocurrent: f64,
    pub saturation_current: f64,
    pub series_resistance: f64,
    /// Infinite for a dark module.
    pub shunt_resistance: f64,
    /// Modified ideality factor n·Ns·kT/q, in volts.
    pub n_vth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_mp: f64,
    pub i_mp: f64,
    pub p_mp: f64,
}

/// Fitted parameters at reference conditions (1000 W/m², 25 °C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub a_ref: f64,
    pub il_ref: f64,
    pub io_ref: f64,
    pub rs_ref: f64,
    pub rsh_ref: f64,
    /// Temperature-coefficient adjustment, percent.
    pub adjust: f64,
    pub alpha_sc: f64,
}

impl ReferenceParams {
    pub fn as_diode_params(&self) -> DiodeParams {
        DiodeParams {
            photocurrent: self.il_ref,
            saturation_current: self.io_ref,
            series_resistance: self.rs_ref,
            shunt_resistance: self.rsh_ref,
            n_vth: self.a_ref,
        }
    }

    /// Translation to effective irradiance `g` (W/m²) and cell temperature `t_cell` (°C).
    pub fn at(&self, g: f64, t_cell: f64) -> DiodeParams {
        let tk = t_cell + 273.15;
        let dt = tk - T_REF;
        let alpha_adj = self.alpha_sc * (1.0 - self.adjust / 100.0);
        let eg = EG_REF * (1.0 + DEG_DT * dt);
        let photocurrent = (g / G_REF * (self.il_ref + alpha_adj * dt)).max(0.0);
        let saturation_current = self.io_ref
            * (tk / T_REF).powi(3)
            * (EG_REF / (BOLTZMANN_EV * T_REF) - eg / (BOLTZMANN_EV * tk)).exp();
        let shunt_resistance = if g > 0.0 {
            self.rsh_ref * G_REF / g
        } else {
            f64::INFINITY
        };
        DiodeParams {
            photocurrent,
            saturation_current,
            series_resistance: self.rs_ref,
            shunt_resistance,
            n_vth: self.a_ref * tk / T_REF,
        }
    }
}

/// Reference fit followed by translation to the operating condition.
pub fn single_diode_params(panel: &Panel, g_effective: f64, t_cell: f64) -> Result<DiodeParams, DiodeError> {
    Ok(fit_reference(panel)?.at(g_effective, t_cell))
}

/// Fits the reference parameters to the datasheet point values and
/// temperature coefficients.
///
/// For a trial `(a, Rs, adjust)` the short-circuit, open-circuit and
/// maximum-power points are linear in `(IL, I0, 1/Rsh)` and solved exactly;
/// Newton iteration then drives the remaining three conditions to zero: a
/// vanishing power derivative at the maximum-power point, the adjusted
/// open-circuit voltage coefficient, and the power coefficient.
pub fn fit_reference(panel: &Panel) -> Result<ReferenceParams, DiodeError> {
    let fail = |residuals: [f64; 3]| DiodeError::FitFailure {
        panel: panel.name.clone(),
        residuals,
    };
    if !(panel.isc_ref > panel.imp_ref && panel.voc_ref > panel.vmp_ref && panel.imp_ref > 0.0 && panel.vmp_ref > 0.0) {
        return Err(fail([f64::NAN; 3]));
    }
    let vth = BOLTZMANN_EV * T_REF;
    let mut x = [1.1 * panel.ns as f64 * vth, 0.3 * panel.vmp_ref / panel.imp_ref * 0.1, 0.0];
    let mut r = match fit_residuals(panel, x) {
        Some(r) => r,
        None => return Err(fail([f64::NAN; 3])),
    };
    for _ in 0..MAX_ITER {
        if norm(&r) < 1e-9 {
            let params = reference_from(panel, x).ok_or_else(|| fail(r))?;
            return Ok(params);
        }
        let jac = match jacobian(panel, x, r) {
            Some(j) => j,
            None => return Err(fail(r)),
        };
        let step = match solve3(jac, [-r[0], -r[1], -r[2]]) {
            Some(s) => s,
            None => return Err(fail(r)),
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial = [
                x[0] + lambda * step[0],
                (x[1] + lambda * step[1]).max(0.0),
                x[2] + lambda * step[2],
            ];
            if trial[0] > 0.0 {
                if let Some(rt) = fit_residuals(panel, trial) {
                    if norm(&rt) < norm(&r) {
                        x = trial;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm(&r) < 1e-7 {
        return reference_from(panel, x).ok_or_else(|| fail(r));
    }
    Err(fail(r))
}

fn norm(r: &[f64; 3]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn jacobian(panel: &Panel, x: [f64; 3], r0: [f64; 3]) -> Option<[[f64; 3]; 3]> {
    let steps = [1e-6 * x[0], 1e-6 * x[1].abs().max(1e-3), 1e-4];
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut xp = x;
        xp[j] += steps[j];
        let rp = fit_residuals(panel, xp)?;
        for i in 0..3 {
            jac[i][j] = (rp[i] - r0[i]) / steps[j];
        }
    }
    Some(jac)
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * out[k]).sum();
        out[row] = (b[row] - s) / m[row][row];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solves the three point conditions for `(IL, I0, Gsh)` given `(a, Rs)`.
///
/// The saturation-current column is scaled by `exp(Voc/a)` to keep the
/// system well conditioned.
fn point_solve(panel: &Panel, a: f64, rs: f64) -> Option<(f64, f64, f64)> {
    let voc = panel.voc_ref;
    let scaled = |v: f64| ((v - voc) / a).exp() - (-voc / a).exp();
    let pts = [
        (panel.isc_ref * rs, panel.isc_ref),
        (voc, 0.0),
        (panel.vmp_ref + panel.imp_ref * rs, panel.imp_ref),
    ];
    let m = [
        [1.0, -scaled(pts[0].0), -pts[0].0],
        [1.0, -scaled(pts[1].0), -pts[1].0],
        [1.0, -scaled(pts[2].0), -pts[2].0],
    ];
    let sol = solve3(m, [pts[0].1, pts[1].1, pts[2].1])?;
    let io = sol[1] * (-voc / a).exp();
    (sol[0] > 0.0 && io > 0.0 && sol[2] > 0.0).then_some((sol[0], io, sol[2]))
}

fn reference_from(panel: &Panel, x: [f64; 3]) -> Option<ReferenceParams> {
    let (il, io, gsh) = point_solve(panel, x[0], x[1])?;
    Some(ReferenceParams {
        a_ref: x[0],
        il_ref: il,
        io_ref: io,
        rs_ref: x[1],
        rsh_ref: 1.0 / gsh,
        adjust: x[2],
        alpha_sc: panel.alpha_sc,
    })
}

fn fit_residuals(panel: &Panel, x: [f64; 3]) -> Option<[f64; 3]> {
    let params = reference_from(panel, x)?;
    let reference = params.as_diode_params();

    // Power derivative at the datasheet maximum-power point.
    let d = slope_at(&reference, panel.vmp_ref, panel.imp_ref);
    let r_mpp = (panel.imp_ref + panel.vmp_ref * d) / panel.imp_ref;

    let hot = params.at(G_REF, 25.0 + COEFF_DT);
    let cold = params.at(G_REF, 25.0 - COEFF_DT);
    let beta_adj = panel.beta_oc * (1.0 + x[2] / 100.0);
    let dvoc = (voc(&hot).ok()? - voc(&cold).ok()?) / (2.0 * COEFF_DT);
    let r_voc = (dvoc - beta_adj) / panel.beta_oc.abs().max(1e-6);

    let p_hot = solve_mpp(&hot).ok()?.p_mp;
    let p_cold = solve_mpp(&cold).ok()?.p_mp;
    let p_ref = panel.vmp_ref * panel.imp_ref;
    let gamma = (p_hot - p_cold) / (2.0 * COEFF_DT) / p_ref * 100.0;
    let r_gamma = (gamma - panel.gamma_r) / panel.gamma_r.abs().max(1e-6);

    let r = [r_mpp, r_voc, r_gamma];
    r.iter().all(|v| v.is_finite()).then_some(r)
}

fn diode_term(p: &DiodeParams, v: f64, i: f64) -> f64 {
    p.saturation_current * (((v + i * p.series_resistance) / p.n_vth).exp() - 1.0)
}

fn shunt_conductance(p: &DiodeParams) -> f64 {
    1.0 / p.shunt_resistance
}

/// dI/dV at a point on the curve, by implicit differentiation.
fn slope_at(p: &DiodeParams, v: f64, i: f64) -> f64 {
    let g = p.saturation_current / p.n_vth * ((v + i * p.series_resistance) / p.n_vth).exp()
        + shunt_conductance(p);
    -g / (1.0 + p.series_resistance * g)
}

fn validate(p: &DiodeParams) -> Result<(), DiodeError> {
    let ok = p.photocurrent >= 0.0
        && p.saturation_current > 0.0
        && p.series_resistance >= 0.0
        && p.shunt_resistance > 0.0
        && p.n_vth > 0.0
        && p.photocurrent.is_finite()
        && p.saturation_current.is_finite()
        && p.series_resistance.is_finite()
        && p.n_vth.is_finite();
    if ok {
        Ok(())
    } else {
        Err(DiodeError::InvalidParams(format!("{p:?}")))
    }
}

/// Current at terminal voltage `v`.
///
/// Newton iteration on the implicit current equation, started from the
/// photocurrent; the residual is concave and decreasing in the current, so
/// iterates approach the root monotonically from above. A bisection step
/// guards against any iterate leaving the bracket.
pub fn current_at_voltage(p: &DiodeParams, v: f64) -> Result<f64, DiodeError> {
    let rs = p.series_resistance;
    let gsh = shunt_conductance(p);
    if rs == 0.0 {
        return Ok(p.photocurrent - diode_term(p, v, 0.0) - v * gsh);
    }
    let f = |i: f64| p.photocurrent - diode_term(p, v, i) - (v + i * rs) * gsh - i;
    let mut hi = p.photocurrent;
    let mut lo = -v.max(0.0) / rs - 1.0;
    let mut i = hi;
    for _ in 0..MAX_ITER {
        let fi = f(i);
        if fi.abs() <= 1e-13 * p.photocurrent.max(1.0) {
            return Ok(i);
        }
        if fi < 0.0 {
            hi = i;
        } else {
            lo = i;
        }
        let e = p.saturation_current / p.n_vth * ((v + i * rs) / p.n_vth).exp();
        let df = -e * rs - rs * gsh - 1.0;
        let mut next = i - fi / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - i).abs() <= 1e-14 * (1.0 + i.abs()) {
            return Ok(next);
        }
        i = next;
    }
    Err(DiodeError::NoConvergence("current equation"))
}

/// Open-circuit voltage.
pub fn voc(p: &DiodeParams) -> Result<f64, DiodeError> {
    validate(p)?;
    if p.photocurrent == 0.0 {
        return Ok(0.0);
    }
    let gsh = shunt_conductance(p);
    let h = |v: f64| p.photocurrent - diode_term(p, v, 0.0) - v * gsh;
    let mut v = p.n_vth * (p.photocurrent / p.saturation_current).ln_1p();
    for _ in 0..MAX_ITER {
        let hv = h(v);
        let dh = -p.saturation_current / p.n_vth * (v / p.n_vth).exp() - gsh;
        let next = v - hv / dh;
        if (next - v).abs() <= 1e-13 * v.abs().max(1.0) {
            return Ok(next.max(0.0));
        }
        v = next;
    }
    Err(DiodeError::NoConvergence("open-circuit voltage"))
}

/// Maximum of P(V) = V·I(V) on [0, Voc].
///
/// The power derivative I + V·dI/dV is positive at short circuit and
/// negative at open circuit; its root is bracketed and refined with
/// Illinois-modified regula falsi.
pub fn solve_mpp(p: &DiodeParams) -> Result<OperatingPoint, DiodeError> {
    validate(p)?;
    if p.photocurrent == 0.0 {
        return Ok(OperatingPoint::default());
    }
    let v_oc = voc(p)?;
    let dp = |v: f64| -> Result<(f64, f64), DiodeError> {
        let i = current_at_voltage(p, v)?;
        Ok((i + v * slope_at(p, v, i), i))
    };
    let (mut a, mut b) = (0.0, v_oc);
    let (mut fa, _) = dp(a)?;
    let (mut fb, _) = dp(b)?;
    if fa <= 0.0 {
        return Ok(OperatingPoint::default());
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITER {
        let c = if fa != fb { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let (fc, ic) = dp(c)?;
        if fc == 0.0 || (b - a) <= 1e-12 * v_oc {
            return Ok(point(c, ic));
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if (b - a) <= 1e-12 * v_oc {
            let v = 0.5 * (a + b);
            let i = current_at_voltage(p, v)?;
            return Ok(point(v, i));
        }
    }
    Err(DiodeError::NoConvergence("maximum power point"))
}

fn point(v: f64, i: f64) -> OperatingPoint {
    let (v, i) = if i < 0.0 { (v, 0.0) } else { (v, i) };
    OperatingPoint {
        v_mp: v,
        i_mp: i,
        p_mp: v * i,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{Mounting, Racking, Technology};

    pub(crate) fn panel() -> Panel {
        Panel {
            name: "JKM395M-72L".into(),
            noct: 45.6,
            technology: Technology::MonoSi,
            ns: 72,
            isc_ref: 10.23,
            voc_ref: 49.5,
            imp_ref: 9.55,
            vmp_ref: 41.4,
            alpha_sc: 0.006854,
            beta_oc: -0.153945,
            gamma_r: -0.406,
            p_stc: 395.37,
            bifacial: false,
            bifaciality: 0.0,
            mounting: Mounting::OpenRack,
            racking: Racking::SingleAxis,
            degradation: 0.0,
            iam_b0: None,
        }
    }

    #[test]
    fn fit_converges() {
        let r = fit_reference(&panel()).unwrap();
        assert!(r.a_ref > 1.0 && r.a_ref < 3.5, "{r:?}");
        assert!(r.rs_ref >= 0.0 && r.rsh_ref > 0.0);
    }

    #[test]
    fn dark_module() {
        let r = fit_reference(&panel()).unwrap();
        let p = r.at(0.0, 25.0);
        assert_eq!(p.photocurrent, 0.0);
        assert_eq!(solve_mpp(&p).unwrap().p_mp, 0.0);
    }

    #[test]
    fn reference_identity() {
        let r = fit_reference(&panel()).unwrap();
        let p = r.at(1000.0, 25.0);
        let q = r.as_diode_params();
        assert!((p.photocurrent - q.photocurrent).abs() < 1e-12);
        assert!((p.saturation_current / q.saturation_current - 1.0).abs() < 1e-12);
        assert!((p.n_vth - q.n_vth).abs() < 1e-12);
        assert!((p.shunt_resistance - q.shunt_resistance).abs() < 1e-9);
    }

    #[test]
    fn mpp_matches_datasheet() {
        let r = fit_reference(&panel()).unwrap();
        let op = solve_mpp(&r.as_diode_params()).unwrap();
        assert!((op.v_mp - 41.4).abs() < 1e-4, "{op:?}");
        assert!((op.p_mp - 41.4 * 9.55).abs() < 1e-4);
        assert!((op.p_mp - op.v_mp * op.i_mp).abs() < 1e-9);
    }

    #[test]
    fn current_at_zero_and_voc() {
        let p = fit_reference(&panel()).unwrap().as_diode_params();
        assert!((current_at_voltage(&p, 0.0).unwrap() - 10.23).abs() < 1e-8);
        let v = voc(&p).unwrap();
        assert!((v - 49.5).abs() < 1e-8);
        assert!(current_at_voltage(&p, v).unwrap().abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_params() {
        let p = DiodeParams {
            photocurrent: 5.0,
            saturation_current: -1.0,
            series_resistance: 0.1,
            shunt_resistance: 100.0,
            n_vth: 1.8,
        };
        assert!(matches!(solve_mpp(&p), Err(DiodeError::InvalidParams(_))));
    }
}
