//! Scenario generation and batch experiments over a road-grid region.

mod config;
mod experiment;
mod geometry;
mod stream;

pub use config::ScenarioConfig;
pub use experiment::{
    mean_sd, run_comparison, run_experiment, summarize, write_metrics_csv, MechanismKind, MetricsRow, Scenario,
    SummaryRow, METRICS_SCHEMA, RANDOM_DRAWS, RANDOM_RANGE,
};
pub use geometry::{PoiGrid, RoiGeometry};
pub use stream::{derive_seed, generate_user_stream, zero_interval_variant};
