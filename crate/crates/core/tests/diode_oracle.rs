//! The maximum power point is checked against a dense IV scan whose current
//! is solved here by plain bisection, independently of the library solver.

use proptest::prelude::*;
use pvtwin_core::plant::parse_plant_architecture;
use pvtwin_core::power::{fit_reference, solve_mpp, DiodeParams};

fn oracle_current(p: &DiodeParams, v: f64) -> f64 {
    let f = |i: f64| {
        let vd = v + i * p.series_resistance;
        p.photocurrent - p.saturation_current * ((vd / p.n_vth).exp() - 1.0) - vd / p.shunt_resistance - i
    };
    let (mut lo, mut hi) = (-p.photocurrent - 1.0, p.photocurrent + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn panel() -> pvtwin_core::plant::Panel {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/architecture_elpaso.json")).unwrap();
    let system = parse_plant_architecture(&doc).unwrap();
    system.conversion_units[0].inverters[0].string_boxes[0].array.panel.clone()
}

#[test]
fn stc_power_matches_datasheet() {
    let panel = panel();
    let reference = fit_reference(&panel).unwrap();
    let mpp = solve_mpp(&reference.at(1000.0, 25.0)).unwrap();
    assert!((mpp.p_mp - panel.p_stc).abs() / panel.p_stc < 0.01, "{}", mpp.p_mp);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mpp_dominates_iv_scan(g in 50.0..1200.0f64, t in -5.0..75.0f64) {
        let reference = fit_reference(&panel()).unwrap();
        let params = reference.at(g, t);
        let mpp = solve_mpp(&params).unwrap();
        let v_max = (0..).map(|k| k as f64 * 0.01).find(|v| oracle_current(&params, *v) <= 0.0).unwrap();
        let mut best = 0.0f64;
        for k in 0..1000 {
            let v = v_max * k as f64 / 999.0;
            best = best.max(v * oracle_current(&params, v));
        }
        prop_assert!(mpp.p_mp >= best * (1.0 - 1e-8), "{} < {}", mpp.p_mp, best);
        prop_assert!(mpp.p_mp <= best * (1.0 + 1e-3));
        prop_assert!((mpp.v_mp * oracle_current(&params, mpp.v_mp) - mpp.p_mp).abs() <= 1e-6 * mpp.p_mp);
    }
}
