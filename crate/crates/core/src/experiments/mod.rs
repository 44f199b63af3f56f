//! Config-driven experiment pipeline: population construction, datasets, imitation,
//! imitate-then-commit evaluation, certification, ablations and bound tables.
//!
//! All randomness flows from the configured master seed, and all outputs are
//! assembled in index order, so reruns of a configuration are byte-identical.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
pub use runner::{Context, ResultRow, RESULT_COLUMNS};
