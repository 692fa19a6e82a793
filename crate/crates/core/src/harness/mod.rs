//! Experiment driver: configuration, the simulation loop, metrics, sweeps and output files.

pub mod config;
pub mod metrics;
pub mod output;
pub mod sim;
pub mod sweep;
pub mod validate;

pub use config::SimConfig;
pub use metrics::{FrameRecord, MetricsReport};
pub use sim::{run_simulation, SimOutput};
pub use sweep::{sweep, Axis, SweepRow};
