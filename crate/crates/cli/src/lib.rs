//! Config-driven front end: one JSON experiment description in, CSV, JSON
//! and SVG artifacts plus a manifest out.

pub mod config;
pub mod error;
pub mod ingest;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::CliError;
pub use ingest::ingest_csv;
pub use run::{run, summary_table, RunSummary};
