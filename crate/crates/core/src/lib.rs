//! Collective perception for robot swarms with imperfect binary floor
//! sensors.
//!
//! Each robot keeps a maximum-likelihood estimate of the black-tile fill
//! ratio from its own noisy readings, weighs it by its Fisher information,
//! and fuses it with the confidence-weighted estimates of its neighbours.
//! The crate provides the estimator, static graph and dynamic arena
//! simulators, the evaluation metrics, and a sweep runner.

pub mod error;
pub mod estimation;
pub mod metrics;
pub mod runner;
pub mod sim_dynamic;
pub mod sim_static;
pub mod topology;

pub use error::SimError;
pub use estimation::{EstimatePair, ObservationTally, SensorAccuracy};
pub use metrics::{TrialConfig, TrialRecord};
pub use sim_dynamic::{run_dynamic_trial, ArenaConfig};
pub use sim_static::{run_static_trial, AccuracyMode, StaticTrialConfig};
pub use topology::{Topology, TopologyGraph};
