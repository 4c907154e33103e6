//! Experiment sweeps: configuration files, seeding, record persistence,
//! manifests and offline analysis.

pub mod config;
pub mod records;
pub mod sweep;

pub use config::{load_config, trial_seed, Mode, SweepSpec};
pub use records::{read_record, write_record};
pub use sweep::{analyze, run_sweep, Manifest};
