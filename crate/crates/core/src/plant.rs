//! Cascading plant description: system → conversion unit → inverter →
//! string box → array (panel + tracker), with one location per conversion
//! unit.
//!
//! The on-disk form is a JSON document (`architecture_<plant>.json`) whose
//! nesting and field names follow the class hierarchy. Unknown keys are
//! rejected and every invariant is checked before a [`PlantSystem`] is handed
//! out.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("syntax error in plant document: {0}")]
    Syntax(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("invalid value at {path}: {message}")]
    InvalidValue { path: String, message: String },
    #[error("invariant violated: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvariantViolation(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    #[serde(rename = "mono-Si", alias = "monosi")]
    MonoSi,
    #[serde(rename = "multi-Si", alias = "multisi", alias = "polysi")]
    MultiSi,
    #[serde(rename = "CdTe", alias = "cdte")]
    CdTe,
    #[serde(rename = "CIGS", alias = "cigs")]
    Cigs,
    #[serde(rename = "a-Si", alias = "asi")]
    AmorphousSi,
}

impl Technology {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mono-si" | "monosi" | "mono_si" => Some(Self::MonoSi),
            "multi-si" | "multisi" | "polysi" | "poly-si" => Some(Self::MultiSi),
            "cdte" => Some(Self::CdTe),
            "cigs" => Some(Self::Cigs),
            "a-si" | "asi" => Some(Self::AmorphousSi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mounting {
    #[default]
    OpenRack,
    CloseMount,
    InsulatedBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Racking {
    #[default]
    SingleAxis,
    FixedTilt,
    RoofMount,
}

/// Coefficients of the back-surface temperature model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    pub a: f64,
    pub b: f64,
    pub delta_t: f64,
}

impl Default for ThermalParams {
    /// Open-rack glass/polymer module.
    fn default() -> Self {
        Self {
            a: -3.56,
            b: -0.075,
            delta_t: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSystem {
    pub name: String,
    pub kpc: f64,
    pub kt: f64,
    pub kin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_params: Option<ThermalParams>,
    pub conversion_units: Vec<ConversionUnit>,
}

/// Named table holding the meteorological series of a conversion unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqTable {
    pub database: String,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionUnit {
    pub name: String,
    pub wire_voltage: f64,
    pub electrical_resistivity: f64,
    pub wire_length: f64,
    pub cross_sectional_area: f64,
    pub losses: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sqtable: Option<SqTable>,
    pub location: Location,
    pub inverters: Vec<Inverter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub longitude: f64,
    pub latitude: f64,
    pub altitude: f64,
    /// UTC offset in hours of the plant's local standard time.
    pub time_zone: f64,
    pub surface_albedo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inverter {
    pub name: String,
    pub paco: f64,
    pub pdco: f64,
    pub vdco: f64,
    pub pso: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub p_night: f64,
    pub losses: f64,
    pub string_boxes: Vec<StringBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringBox {
    pub number_of_wires: u32,
    pub electrical_resistivity: f64,
    pub wire_length: f64,
    pub cross_sectional_area: f64,
    pub losses: f64,
    pub array: ArrayConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Modules in series per string.
    pub modules_per_string: u32,
    /// Strings in parallel.
    pub strings_per_inverter: u32,
    pub panel: Panel,
    pub tracker: Tracker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub name: String,
    pub noct: f64,
    pub technology: Technology,
    pub ns: u32,
    pub isc_ref: f64,
    pub voc_ref: f64,
    pub imp_ref: f64,
    pub vmp_ref: f64,
    /// A/°C
    pub alpha_sc: f64,
    /// V/°C
    pub beta_oc: f64,
    /// %/°C
    pub gamma_r: f64,
    pub p_stc: f64,
    pub bifacial: bool,
    pub bifaciality: f64,
    #[serde(default)]
    pub mounting: Mounting,
    #[serde(default)]
    pub racking: Racking,
    /// Fraction per year.
    pub degradation: f64,
    /// ASHRAE incidence-angle coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iam_b0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tracker {
    pub with_tracker: bool,
    pub surface_tilt: f64,
    pub surface_azimuth: f64,
    pub axis_azimuth: f64,
    pub max_angle: f64,
    pub row_height: f64,
    pub row_width: f64,
    /// Distance between rows; `2 * row_width` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_pitch: Option<f64>,
}

impl Tracker {
    pub fn backtracking(&self) -> bool {
        self.row_height > 0.0 && self.row_width > 0.0
    }

    pub fn ground_coverage_ratio(&self) -> f64 {
        let pitch = self.row_pitch.unwrap_or(2.0 * self.row_width);
        self.row_width / pitch
    }
}

/// Position of one array (string-box leaf) inside the plant tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArrayPath {
    pub cu: usize,
    pub inverter: usize,
    pub string_box: usize,
}

impl fmt::Display for ArrayPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "conversion_unit[{}]/inverter[{}]/string_box[{}]",
            self.cu, self.inverter, self.string_box
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: &str, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

impl PlantSystem {
    pub fn from_json(document: &str) -> Result<Self, PlantError> {
        parse_plant_architecture(document)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plant system serializes")
    }

    pub fn arrays(&self) -> Vec<ArrayPath> {
        enumerate_arrays(self)
    }

    pub fn inverter_count(&self) -> usize {
        self.conversion_units.iter().map(|cu| cu.inverters.len()).sum()
    }

    pub fn string_box(&self, path: ArrayPath) -> &StringBox {
        &self.conversion_units[path.cu].inverters[path.inverter].string_boxes[path.string_box]
    }

    /// Product of the point-of-interconnection derates.
    pub fn poi_derate(&self) -> f64 {
        self.kpc * self.kt * self.kin
    }

    pub fn thermal(&self) -> ThermalParams {
        self.thermal_params.unwrap_or_default()
    }
}

/// Parses and validates a plant architecture document.
pub fn parse_plant_architecture(document: &str) -> Result<PlantSystem, PlantError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let system: PlantSystem = serde_path_to_error::deserialize(de).map_err(classify_error)?;
    let report = validate_system(&system);
    if report.is_empty() {
        Ok(system)
    } else {
        Err(PlantError::InvariantViolation(report.violations))
    }
}

fn classify_error(err: serde_path_to_error::Error<serde_json::Error>) -> PlantError {
    let path = json_path(&err.path().to_string());
    let inner = err.into_inner();
    if !inner.is_data() {
        return PlantError::Syntax(inner.to_string());
    }
    let message = inner.to_string();
    if let Some(field) = backticked(&message, "missing field `") {
        PlantError::MissingField(join_path(&path, &field))
    } else if let Some(field) = backticked(&message, "unknown field `") {
        // the reported path already ends at the offending key
        if path.ends_with(&format!("/{field}")) {
            PlantError::UnknownField(path)
        } else {
            PlantError::UnknownField(join_path(&path, &field))
        }
    } else {
        PlantError::InvalidValue { path, message }
    }
}

fn backticked(message: &str, prefix: &str) -> Option<String> {
    let start = message.find(prefix)? + prefix.len();
    let rest = &message[start..];
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

// "conversion_units[0].inverters[1]" -> "system/conversion_units[0]/inverters[1]"
fn json_path(serde_path: &str) -> String {
    if serde_path == "." || serde_path.is_empty() {
        "system".to_string()
    } else {
        format!("system/{}", serde_path.replace('.', "/"))
    }
}

fn join_path(path: &str, field: &str) -> String {
    format!("{path}/{field}")
}

/// Lists every array of the plant in document order.
pub fn enumerate_arrays(system: &PlantSystem) -> Vec<ArrayPath> {
    let mut paths = Vec::new();
    for (cu, unit) in system.conversion_units.iter().enumerate() {
        for (inverter, inv) in unit.inverters.iter().enumerate() {
            for string_box in 0..inv.string_boxes.len() {
                paths.push(ArrayPath {
                    cu,
                    inverter,
                    string_box,
                });
            }
        }
    }
    paths
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every structural and numeric invariant; violations are returned as
/// data.
pub fn validate_system(system: &PlantSystem) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (key, value) in [("kpc", system.kpc), ("kt", system.kt), ("kin", system.kin)] {
        r.check(
            unit_interval(value),
            &format!("system/{key}"),
            format!("derate factor out of [0,1]: {value}"),
        );
    }
    if let Some(t) = system.thermal_params {
        r.check(t.b <= 0.0, "system/thermal_params/b", "wind coefficient must be <= 0");
        r.check(
            t.delta_t >= 0.0,
            "system/thermal_params/delta_t",
            "delta_t must be >= 0",
        );
    }
    r.check(
        !system.conversion_units.is_empty(),
        "system/conversion_units",
        "at least one conversion unit required",
    );

    for (i, cu) in system.conversion_units.iter().enumerate() {
        let base = format!("system/conversion_units[{i}]");
        validate_wire(
            &mut r,
            &base,
            cu.electrical_resistivity,
            cu.wire_length,
            cu.cross_sectional_area,
            cu.losses,
        );
        r.check(
            cu.wire_voltage > 0.0,
            &format!("{base}/wire_voltage"),
            "must be > 0",
        );
        let loc = &cu.location;
        let lbase = format!("{base}/location");
        r.check(
            (-90.0..=90.0).contains(&loc.latitude),
            &format!("{lbase}/latitude"),
            "must lie in [-90, 90]",
        );
        r.check(
            (-180.0..=180.0).contains(&loc.longitude),
            &format!("{lbase}/longitude"),
            "must lie in [-180, 180]",
        );
        r.check(
            unit_interval(loc.surface_albedo),
            &format!("{lbase}/surface_albedo"),
            "must lie in [0, 1]",
        );
        r.check(
            (-14.0..=14.0).contains(&loc.time_zone),
            &format!("{lbase}/time_zone"),
            "UTC offset must lie in [-14, 14]",
        );

        for (j, inv) in cu.inverters.iter().enumerate() {
            let ibase = format!("{base}/inverters[{j}]");
            r.check(inv.paco > 0.0, &format!("{ibase}/paco"), "must be > 0");
            r.check(
                inv.pdco >= inv.paco,
                &format!("{ibase}/pdco"),
                format!("must be >= paco ({} < {})", inv.pdco, inv.paco),
            );
            r.check(inv.pso >= 0.0, &format!("{ibase}/pso"), "must be >= 0");
            r.check(inv.vdco > 0.0, &format!("{ibase}/vdco"), "must be > 0");
            r.check(inv.p_night >= 0.0, &format!("{ibase}/p_night"), "must be >= 0");
            r.check(
                unit_interval(inv.losses),
                &format!("{ibase}/losses"),
                "loss fraction out of [0,1]",
            );

            for (k, sb) in inv.string_boxes.iter().enumerate() {
                let sbase = format!("{ibase}/string_boxes[{k}]");
                r.check(
                    sb.number_of_wires >= 1,
                    &format!("{sbase}/number_of_wires"),
                    "must be >= 1",
                );
                validate_wire(
                    &mut r,
                    &sbase,
                    sb.electrical_resistivity,
                    sb.wire_length,
                    sb.cross_sectional_area,
                    sb.losses,
                );
                validate_array(&mut r, &format!("{sbase}/array"), &sb.array);
            }
        }
    }
    r
}

fn validate_wire(
    r: &mut ValidationReport,
    base: &str,
    resistivity: f64,
    length: f64,
    area: f64,
    losses: f64,
) {
    r.check(
        resistivity > 0.0,
        &format!("{base}/electrical_resistivity"),
        "must be > 0",
    );
    r.check(length >= 0.0, &format!("{base}/wire_length"), "must be >= 0");
    r.check(area > 0.0, &format!("{base}/cross_sectional_area"), "must be > 0");
    r.check(
        unit_interval(losses),
        &format!("{base}/losses"),
        "loss fraction out of [0,1]",
    );
}

fn validate_array(r: &mut ValidationReport, base: &str, array: &ArrayConfig) {
    r.check(
        array.modules_per_string >= 1,
        &format!("{base}/modules_per_string"),
        "must be >= 1",
    );
    r.check(
        array.strings_per_inverter >= 1,
        &format!("{base}/strings_per_inverter"),
        "must be >= 1",
    );

    let p = &array.panel;
    let pbase = format!("{base}/panel");
    r.check(p.imp_ref > 0.0, &format!("{pbase}/imp_ref"), "must be > 0");
    r.check(
        p.isc_ref > p.imp_ref,
        &format!("{pbase}/isc_ref"),
        "must exceed imp_ref",
    );
    r.check(p.vmp_ref > 0.0, &format!("{pbase}/vmp_ref"), "must be > 0");
    r.check(
        p.voc_ref > p.vmp_ref,
        &format!("{pbase}/voc_ref"),
        "must exceed vmp_ref",
    );
    r.check(p.ns >= 1, &format!("{pbase}/ns"), "must be >= 1");
    r.check(p.gamma_r < 0.0, &format!("{pbase}/gamma_r"), "must be < 0");
    r.check(p.p_stc > 0.0, &format!("{pbase}/p_stc"), "must be > 0");
    if p.p_stc > 0.0 {
        let mismatch = (p.vmp_ref * p.imp_ref - p.p_stc).abs() / p.p_stc;
        r.check(
            mismatch <= 0.02,
            &format!("{pbase}/p_stc"),
            format!("vmp_ref * imp_ref differs from p_stc by {:.2}%", mismatch * 100.0),
        );
    }
    r.check(
        unit_interval(p.bifaciality),
        &format!("{pbase}/bifaciality"),
        "must lie in [0, 1]",
    );
    r.check(
        unit_interval(p.degradation),
        &format!("{pbase}/degradation"),
        "must lie in [0, 1]",
    );
    if let Some(b0) = p.iam_b0 {
        r.check(b0 >= 0.0, &format!("{pbase}/iam_b0"), "must be >= 0");
    }

    let t = &array.tracker;
    let tbase = format!("{base}/tracker");
    r.check(
        t.max_angle > 0.0 && t.max_angle <= 90.0,
        &format!("{tbase}/max_angle"),
        "must lie in (0, 90]",
    );
    r.check(
        (0.0..=90.0).contains(&t.surface_tilt),
        &format!("{tbase}/surface_tilt"),
        "must lie in [0, 90]",
    );
    if t.with_tracker {
        r.check(
            t.row_width > 0.0,
            &format!("{tbase}/row_width"),
            "must be > 0 for a tracker",
        );
    }
    if let Some(pitch) = t.row_pitch {
        r.check(
            pitch >= t.row_width && pitch > 0.0,
            &format!("{tbase}/row_pitch"),
            "must be positive and not smaller than row_width",
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
      "name": "mini", "kpc": 1.0, "kt": 1.0, "kin": 1.0,
      "conversion_units": [{
        "name": "CU1", "wire_voltage": 34500.0, "electrical_resistivity": 1.72e-8,
        "wire_length": 100.0, "cross_sectional_area": 0.00012, "losses": 0.0,
        "location": {"longitude": -73.6, "latitude": 9.7, "altitude": 50.0,
                     "time_zone": -5.0, "surface_albedo": 0.2},
        "inverters": [{
          "name": "INV1", "paco": 250000.0, "pdco": 259589.0, "vdco": 625.0, "pso": 1245.0,
          "c0": -1.1e-8, "c1": 4.4e-5, "c2": 2.6e-3, "c3": 2.0e-4, "p_night": 75.0,
          "losses": 0.0,
          "string_boxes": [{
            "number_of_wires": 2, "electrical_resistivity": 1.72e-8, "wire_length": 50.0,
            "cross_sectional_area": 0.00007, "losses": 0.0,
            "array": {
              "modules_per_string": 15, "strings_per_inverter": 60,
              "panel": {"name": "P", "noct": 45.0, "technology": "mono-Si", "ns": 72,
                        "isc_ref": 10.23, "voc_ref": 49.5, "imp_ref": 9.55, "vmp_ref": 41.4,
                        "alpha_sc": 0.006854, "beta_oc": -0.153945, "gamma_r": -0.406,
                        "p_stc": 395.37, "bifacial": false, "bifaciality": 0.0,
                        "mounting": "open_rack", "racking": "single_axis", "degradation": 0.005},
              "tracker": {"with_tracker": true, "surface_tilt": 0.0, "surface_azimuth": 180.0,
                          "axis_azimuth": 180.0, "max_angle": 60.0, "row_height": 2.0,
                          "row_width": 4.0}
            }
          }]
        }]
      }]
    }"#;

    #[test]
    fn parses_minimal_document() {
        let system = parse_plant_architecture(MINIMAL).unwrap();
        assert_eq!(system.conversion_units.len(), 1);
        assert_eq!(
            enumerate_arrays(&system),
            vec![ArrayPath {
                cu: 0,
                inverter: 0,
                string_box: 0
            }]
        );
        assert!(validate_system(&system).is_empty());
    }

    #[test]
    fn missing_paco_names_the_path() {
        let doc = MINIMAL.replace(r#""paco": 250000.0, "#, "");
        match parse_plant_architecture(&doc) {
            Err(PlantError::MissingField(path)) => {
                assert_eq!(path, "system/conversion_units[0]/inverters[0]/paco")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let doc = MINIMAL.replace(r#""kin": 1.0,"#, r#""kin": 1.0, "kfoo": 2.0,"#);
        assert!(matches!(
            parse_plant_architecture(&doc),
            Err(PlantError::UnknownField(p)) if p == "system/kfoo"
        ));
    }

    #[test]
    fn malformed_json_is_syntax_error() {
        assert!(matches!(
            parse_plant_architecture("{\"name\": "),
            Err(PlantError::Syntax(_))
        ));
    }

    #[test]
    fn negative_isc_is_one_violation() {
        let mut system = parse_plant_architecture(MINIMAL).unwrap();
        system.conversion_units[0].inverters[0].string_boxes[0]
            .array
            .panel
            .isc_ref = -1.0;
        let report = validate_system(&system);
        assert_eq!(report.violations.len(), 1, "{report:?}");
        assert!(report.violations[0].path.ends_with("/panel/isc_ref"));
    }

    #[test]
    fn derate_above_one_is_reported() {
        let mut system = parse_plant_architecture(MINIMAL).unwrap();
        system.kpc = 1.2;
        let report = validate_system(&system);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("derate factor out of [0,1]"));
    }

    #[test]
    fn parse_enforces_invariants() {
        let doc = MINIMAL.replace(r#""kpc": 1.0"#, r#""kpc": 1.2"#);
        assert!(matches!(
            parse_plant_architecture(&doc),
            Err(PlantError::InvariantViolation(v)) if v[0].path == "system/kpc"
        ));
    }

    #[test]
    fn empty_inverter_contributes_no_paths() {
        let mut system = parse_plant_architecture(MINIMAL).unwrap();
        let mut inv = system.conversion_units[0].inverters[0].clone();
        inv.string_boxes.clear();
        system.conversion_units[0].inverters.insert(0, inv);
        let paths = enumerate_arrays(&system);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].inverter, 1);
    }

    #[test]
    fn round_trips_through_json() {
        let system = parse_plant_architecture(MINIMAL).unwrap();
        let again = parse_plant_architecture(&system.to_json()).unwrap();
        assert_eq!(system, again);
    }

    #[test]
    fn gcr_defaults_to_half() {
        let system = parse_plant_architecture(MINIMAL).unwrap();
        let t = system.string_box(system.arrays()[0]).array.tracker;
        assert!(t.backtracking());
        assert_eq!(t.ground_coverage_ratio(), 0.5);
    }
}
