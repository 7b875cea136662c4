//! Digital twin of a utility-scale PV plant and the operations built on it:
//! plant architecture, solar geometry, irradiance and power chains, weather
//! quality control, forecast evaluation and intraday-market artifacts.

pub mod eval;
pub mod forecast;
pub mod geometry;
pub mod irradiance;
pub mod market;
pub mod plant;
pub mod power;
pub mod qc;
pub mod weather;
