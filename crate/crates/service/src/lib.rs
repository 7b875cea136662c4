//! Operations engine of the PV digital twin: day-ahead offers, intraday
//! redispatch checks, forecast evaluation and plant simulation, exposed
//! through an HTTP API and the `pvtwin` command-line tool.
//!
//! Both front ends call the same functions in [`ops`], so an artifact
//! produced from the command line is byte-identical to the one returned by
//! the matching endpoint.

pub mod api;
pub mod engine;
pub mod error;
pub mod jobs;
pub mod ops;

pub use engine::Engine;
pub use error::{ErrorClass, ServiceError};

/// Version of the JSON response layout.
pub const SCHEMA_VERSION: &str = "1.0";
