//! Sweep specification files (TOML).
//!
//! ```toml
//! mode = "static"
//! trials_per_cell = 30
//! base_seed = 1
//!
//! [axes]
//! homogeneous = [0.525, 0.575]
//! heterogeneous = [[0.525, 0.975]]
//! fill_ratios = [0.55, 0.95]
//! n_robots = [100]
//! topologies = ["fully-connected", "ring", "line", "scale-free"]
//! schedules = [{ rounds = 1000, observations_per_round = 10 }]
//!
//! [params]
//! delta = 0.01
//! bins = 10
//! ```
//!
//! Dynamic sweeps replace `topologies`/`schedules` with `densities` and
//! `steps`. Every parameter not given falls back to the defaults below.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SimError;
use crate::estimation::DEFAULT_CONFIDENCE_CAP;
use crate::metrics::{MetricParams, TrialConfig, DEFAULT_BINS, DEFAULT_DELTA};
use crate::sim_dynamic::{ArenaConfig, DEFAULT_COMM_RANGE, DEFAULT_SPEED, DEFAULT_TICK, DEFAULT_TURN_PROBABILITY};
use crate::sim_static::{AccuracyMode, StaticTrialConfig};
use crate::topology::{Topology, DEFAULT_SCALE_FREE_M};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Dynamic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub rounds: usize,
    pub observations_per_round: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub homogeneous: Vec<f64>,
    /// `[lo, hi]` pairs.
    #[serde(default)]
    pub heterogeneous: Vec<[f64; 2]>,
    #[serde(default)]
    pub fill_ratios: Vec<f64>,
    #[serde(default)]
    pub n_robots: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topologies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedules: Vec<Schedule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub delta: f64,
    pub bins: usize,
    pub confidence_cap: f64,
    pub scale_free_m: usize,
    pub record_every_step: bool,
    pub comm_range: f64,
    pub speed: f64,
    pub tick: f64,
    pub turn_probability: f64,
    pub tile_side: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            bins: DEFAULT_BINS,
            confidence_cap: DEFAULT_CONFIDENCE_CAP,
            scale_free_m: DEFAULT_SCALE_FREE_M,
            record_every_step: false,
            comm_range: DEFAULT_COMM_RANGE,
            speed: DEFAULT_SPEED,
            tick: DEFAULT_TICK,
            turn_probability: DEFAULT_TURN_PROBABILITY,
            tile_side: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub trials_per_cell: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub axes: Axes,
    #[serde(default)]
    pub params: Params,
}

/// One simulation to run: a cell configuration with its trial seed filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub cell: usize,
    pub trial: usize,
    pub config: TrialConfig,
}

/// Parses and validates a sweep file.
pub fn load_config(path: &Path) -> Result<SweepSpec, ConfigError> {
    let spec = SweepSpec::read(path)?;
    spec.validate()?;
    Ok(spec)
}

impl SweepSpec {
    /// Parses without validating, so callers can apply overrides first.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn mode(&self) -> Result<Mode, ConfigError> {
        self.mode
            .ok_or_else(|| ConfigError::invalid("mode", "not set in the config and not given on the command line"))
    }

    fn accuracies(&self) -> Vec<AccuracyMode> {
        self.axes
            .homogeneous
            .iter()
            .map(|&value| AccuracyMode::Homogeneous { value })
            .chain(
                self.axes
                    .heterogeneous
                    .iter()
                    .map(|&[lo, hi]| AccuracyMode::Heterogeneous { lo, hi }),
            )
            .collect()
    }

    fn topologies(&self) -> Result<Vec<Topology>, ConfigError> {
        self.axes
            .topologies
            .iter()
            .map(|name| match name.as_str() {
                "scale-free" => Ok(Topology::ScaleFree {
                    m: self.params.scale_free_m,
                }),
                other => other
                    .parse()
                    .map_err(|e: crate::topology::TopologyError| ConfigError::invalid("axes.topologies", e.to_string())),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mode = self.mode()?;
        if self.trials_per_cell == 0 {
            return Err(ConfigError::invalid("trials_per_cell", "must be positive"));
        }
        let a = &self.axes;
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(ConfigError::invalid(format!("axes.{name}"), "axis is empty"))
            } else {
                Ok(())
            }
        };
        if a.homogeneous.is_empty() && a.heterogeneous.is_empty() {
            return Err(ConfigError::invalid(
                "axes.homogeneous",
                "no sensor accuracies given (homogeneous or heterogeneous)",
            ));
        }
        nonempty("fill_ratios", a.fill_ratios.len())?;
        nonempty("n_robots", a.n_robots.len())?;
        let forbid = |name: &str, len: usize| {
            if len > 0 {
                Err(ConfigError::invalid(format!("axes.{name}"), format!("not used in {mode} mode")))
            } else {
                Ok(())
            }
        };
        match mode {
            Mode::Static => {
                nonempty("topologies", a.topologies.len())?;
                nonempty("schedules", a.schedules.len())?;
                forbid("densities", a.densities.len())?;
                forbid("steps", a.steps.len())?;
            }
            Mode::Dynamic => {
                nonempty("densities", a.densities.len())?;
                nonempty("steps", a.steps.len())?;
                forbid("topologies", a.topologies.len())?;
                forbid("schedules", a.schedules.len())?;
            }
        }
        for (i, acc) in self.accuracies().iter().enumerate() {
            acc.validate().map_err(|e| field_error(&format!("accuracy #{i}"), e))?;
        }
        for cell in self.cells()? {
            let result = match &cell {
                TrialConfig::Static(c) => c.validate(),
                TrialConfig::Dynamic(c) => c.validate(),
            };
            result.map_err(|e| field_error(&format!("cell {:?}", cell.cell_key()), e))?;
        }
        Ok(())
    }

    /// Cell configurations in sweep order, with seed 0.
    pub fn cells(&self) -> Result<Vec<TrialConfig>, ConfigError> {
        let mode = self.mode()?;
        let p = &self.params;
        let metrics = MetricParams {
            delta: p.delta,
            bins: p.bins,
        };
        let accuracies = self.accuracies();
        let mut cells = Vec::new();
        for &n_robots in &self.axes.n_robots {
            match mode {
                Mode::Static => {
                    for topology in self.topologies()? {
                        for s in &self.axes.schedules {
                            for &accuracy in &accuracies {
                                for &fill_ratio in &self.axes.fill_ratios {
                                    cells.push(TrialConfig::Static(StaticTrialConfig {
                                        n_robots,
                                        fill_ratio,
                                        topology,
                                        accuracy,
                                        rounds: s.rounds,
                                        observations_per_round: s.observations_per_round,
                                        seed: 0,
                                        confidence_cap: p.confidence_cap,
                                        metrics,
                                        record_every_step: p.record_every_step,
                                    }));
                                }
                            }
                        }
                    }
                }
                Mode::Dynamic => {
                    for &density in &self.axes.densities {
                        for &total_steps in &self.axes.steps {
                            for &accuracy in &accuracies {
                                for &fill_ratio in &self.axes.fill_ratios {
                                    cells.push(TrialConfig::Dynamic(ArenaConfig {
                                        n_robots,
                                        density,
                                        comm_range: p.comm_range,
                                        speed: p.speed,
                                        tick: p.tick,
                                        tile_side: p.tile_side,
                                        turn_probability: p.turn_probability,
                                        fill_ratio,
                                        total_steps,
                                        seed: 0,
                                        accuracy,
                                        confidence_cap: p.confidence_cap,
                                        metrics,
                                    }));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    pub fn total_runs(&self) -> Result<usize, ConfigError> {
        Ok(self.cells()?.len() * self.trials_per_cell)
    }

    /// Every (cell, trial) pair in a fixed order, seeds resolved.
    pub fn jobs(&self) -> Result<Vec<Job>, ConfigError> {
        let mut jobs = Vec::new();
        for (cell, template) in self.cells()?.into_iter().enumerate() {
            for trial in 0..self.trials_per_cell {
                let seed = trial_seed(self.base_seed, cell, trial);
                let config = match &template {
                    TrialConfig::Static(c) => TrialConfig::Static(StaticTrialConfig { seed, ..c.clone() }),
                    TrialConfig::Dynamic(c) => TrialConfig::Dynamic(ArenaConfig { seed, ..c.clone() }),
                };
                jobs.push(Job { cell, trial, config });
            }
        }
        Ok(jobs)
    }
}

fn field_error(context: &str, e: SimError) -> ConfigError {
    match e {
        SimError::InvalidConfig { field, message } => ConfigError::invalid(field, format!("{context}: {message}")),
        other => ConfigError::invalid(context, other.to_string()),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, a pure function of its coordinates in the sweep.
pub fn trial_seed(base_seed: u64, cell: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(base_seed ^ splitmix64(cell as u64)) ^ trial as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL_STATIC: &str = r#"
mode = "static"
trials_per_cell = 30
base_seed = 7

[axes]
homogeneous = [0.525, 0.575, 0.625, 0.675, 0.725, 0.775, 0.825, 0.875, 0.925, 0.975, 0.75]
fill_ratios = [0.55, 0.95]
n_robots = [100]
topologies = ["fully-connected", "ring", "line", "scale-free"]
schedules = [{ rounds = 1000, observations_per_round = 10 }]
"#;

    #[test]
    fn full_static_run_count() {
        let spec = SweepSpec::parse(FULL_STATIC).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.total_runs().unwrap(), 11 * 2 * 4 * 30);
        let jobs = spec.jobs().unwrap();
        assert_eq!(jobs.len(), 2640);
        assert_eq!(jobs[31].cell, 1);
        assert_eq!(jobs[31].trial, 1);
        assert_eq!(jobs[31].config.seed(), trial_seed(7, 1, 1));
    }

    #[test]
    fn uninformative_accuracy_rejected() {
        let text = FULL_STATIC.replace("0.525, 0.575", "0.5, 0.575");
        let err = SweepSpec::parse(&text).unwrap().validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "accuracy"), "{err}");
    }

    #[test]
    fn empty_axes_rejected() {
        let text = FULL_STATIC.replace("fill_ratios = [0.55, 0.95]", "fill_ratios = []");
        let err = SweepSpec::parse(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("axes.fill_ratios"), "{err}");
        let text = FULL_STATIC.replace("topologies = [", "densities = [1.0]\ntopologies = [");
        assert!(SweepSpec::parse(&text).unwrap().validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SweepSpec::parse(&format!("{FULL_STATIC}\n[params]\ngamma = 3\n")).is_err());
        assert!(SweepSpec::parse(&FULL_STATIC.replace("base_seed", "seed")).is_err());
    }

    #[test]
    fn missing_mode_needs_override() {
        let text = FULL_STATIC.replace("mode = \"static\"", "");
        let mut spec = SweepSpec::parse(&text).unwrap();
        assert!(spec.validate().is_err());
        spec.mode = Some(Mode::Static);
        spec.validate().unwrap();
    }

    #[test]
    fn topology_size_checked_per_cell() {
        let text = FULL_STATIC.replace("n_robots = [100]", "n_robots = [2]");
        let err = SweepSpec::parse(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("ring"), "{err}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..50 {
            for trial in 0..30 {
                assert!(seen.insert(trial_seed(0, cell, trial)));
            }
        }
        assert_eq!(trial_seed(3, 4, 5), trial_seed(3, 4, 5));
    }
}
