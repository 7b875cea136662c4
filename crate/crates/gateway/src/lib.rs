//! Data gateway of the PV digital twin: measurement and forecast file
//! ingestion, the embedded series store, and clients for the plant
//! historian (PI) and the Reuniwatt forecast service.
//!
//! Every network client talks through a [`transport::Transport`], so tests
//! run offline against byte-deterministic fixture transports.

pub mod error;
pub mod measurements;
pub mod model_runs;
pub mod pi;
pub mod reuniwatt;
pub mod store;
pub mod transport;

pub use error::GatewayError;
pub use measurements::{emit_measurements, ingest_ghi_forecast, ingest_measurements, FileFormat};
pub use model_runs::{group_by_model, ingest_model_runs, ModelRun};
pub use store::Store;
pub use transport::{FixtureTransport, HttpTransport, Request, Transport, TransportError};
