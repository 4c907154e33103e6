//! Round-synchronous execution of the per-robot estimation loop over a fixed
//! communication graph. Motion is abstracted away: every observation is an
//! independent draw of a tile that is black with probability `f`.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::estimation::{
    fuse_social, informed_estimate, local_pair, sample_reading, EstimatePair, EstimationError, ObservationTally,
    SensorAccuracy, DEFAULT_CONFIDENCE_CAP,
};
use crate::metrics::{MetricParams, RobotSnapshot, TrialConfig, TrialRecord};
use crate::topology::{Topology, TopologyGraph, DEFAULT_SCALE_FREE_M};

/// How sensor accuracies are assigned to robots. Both variants use `b = w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AccuracyMode {
    Homogeneous { value: f64 },
    /// One uniform draw in `[lo, hi]` per robot.
    Heterogeneous { lo: f64, hi: f64 },
}

impl AccuracyMode {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            AccuracyMode::Homogeneous { value } => {
                if !(value > 0.5 && value <= 1.0) {
                    return Err(SimError::config(
                        "accuracy",
                        format!("b = w = {value} is not informative; need 0.5 < value <= 1"),
                    ));
                }
            }
            AccuracyMode::Heterogeneous { lo, hi } => {
                if !(lo > 0.5 && lo <= hi && hi <= 1.0) {
                    return Err(SimError::config(
                        "accuracy",
                        format!("heterogeneous bounds [{lo}, {hi}] must satisfy 0.5 < lo <= hi <= 1"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SensorAccuracy, EstimationError> {
        match *self {
            AccuracyMode::Homogeneous { value } => SensorAccuracy::symmetric(value),
            AccuracyMode::Heterogeneous { lo, hi } => SensorAccuracy::symmetric(rng.random_range(lo..=hi)),
        }
    }
}

impl fmt::Display for AccuracyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccuracyMode::Homogeneous { value } => write!(f, "{value}"),
            AccuracyMode::Heterogeneous { lo, hi } => write!(f, "U({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticTrialConfig {
    pub n_robots: usize,
    pub fill_ratio: f64,
    pub topology: Topology,
    pub accuracy: AccuracyMode,
    /// Communication rounds `C`.
    pub rounds: usize,
    /// Observations between two communication rounds, `R`.
    pub observations_per_round: usize,
    pub seed: u64,
    pub confidence_cap: f64,
    pub metrics: MetricParams,
    /// Record the informed estimate after every observation instead of only
    /// at round boundaries. Between rounds the social term is stale.
    #[serde(default)]
    pub record_every_step: bool,
}

impl Default for StaticTrialConfig {
    fn default() -> Self {
        Self {
            n_robots: 100,
            fill_ratio: 0.55,
            topology: Topology::ScaleFree {
                m: DEFAULT_SCALE_FREE_M,
            },
            accuracy: AccuracyMode::Homogeneous { value: 0.75 },
            rounds: 1000,
            observations_per_round: 10,
            seed: 0,
            confidence_cap: DEFAULT_CONFIDENCE_CAP,
            metrics: MetricParams::default(),
            record_every_step: false,
        }
    }
}

impl StaticTrialConfig {
    /// Total observations per robot, `T = C * R`.
    pub fn total_steps(&self) -> usize {
        self.rounds * self.observations_per_round
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_robots == 0 {
            return Err(SimError::config("n_robots", "must be positive"));
        }
        validate_fill_ratio(self.fill_ratio)?;
        self.topology.validate(self.n_robots)?;
        self.accuracy.validate()?;
        if self.rounds == 0 {
            return Err(SimError::config("rounds", "must be positive"));
        }
        if self.observations_per_round == 0 {
            return Err(SimError::config("observations_per_round", "must be positive"));
        }
        validate_cap(self.confidence_cap)?;
        self.metrics.validate()?;
        Ok(())
    }
}

pub(crate) fn validate_fill_ratio(f: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(SimError::config("fill_ratio", format!("{f} is outside [0, 1]")))
    }
}

pub(crate) fn validate_cap(cap: f64) -> Result<(), SimError> {
    if cap > 0.0 && cap.is_finite() {
        Ok(())
    } else {
        Err(SimError::config("confidence_cap", format!("{cap} must be positive and finite")))
    }
}

/// Random stream owned by robot `id`; independent of the swarm size.
pub fn robot_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// Stream for environment construction (graph, arena, initial poses).
pub fn environment_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// Everything a robot keeps between time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub accuracy: SensorAccuracy,
    pub tally: ObservationTally,
    pub local: EstimatePair,
    pub social: EstimatePair,
    pub informed: EstimatePair,
}

impl RobotState {
    pub fn new(accuracy: SensorAccuracy) -> Result<Self, EstimationError> {
        accuracy.ensure_informative()?;
        Ok(Self {
            accuracy,
            tally: ObservationTally::default(),
            local: EstimatePair::NEUTRAL,
            social: EstimatePair::NEUTRAL,
            informed: EstimatePair::NEUTRAL,
        })
    }

    /// Records one (already noisy) reading and re-derives the local pair.
    pub fn observe(&mut self, reading_is_black: bool, confidence_cap: f64) {
        self.tally.record(reading_is_black);
        self.local = local_pair(self.tally, self.accuracy, confidence_cap)
            .expect("accuracy checked at construction and tally is non-empty");
    }

    pub fn refresh_informed(&mut self) {
        // Before the first observation there is nothing to fuse.
        if let Ok(x) = informed_estimate(self.local, self.social) {
            self.informed = x;
        }
    }

    pub fn snapshot(&self) -> RobotSnapshot {
        RobotSnapshot {
            black: self.tally.black,
            total: self.tally.total,
            local: self.local.value,
            local_confidence: self.local.confidence,
            social: self.social.value,
            social_confidence: self.social.confidence,
            informed: self.informed.value,
        }
    }
}

/// One time step of a robot whose motion is abstracted into an `f`-weighted
/// coin flip for the tile beneath it.
pub fn step_observation<R: Rng + ?Sized>(state: &mut RobotState, fill_ratio: f64, confidence_cap: f64, rng: &mut R) {
    let tile_is_black = rng.random_bool(fill_ratio);
    let reading = sample_reading(tile_is_black, state.accuracy, rng);
    state.observe(reading, confidence_cap);
}

/// Synchronous exchange: every robot fuses the pre-round local pairs of its
/// neighbours. Robots without neighbours keep their previous social pair.
pub fn exchange(states: &mut [RobotState], neighbors: &[Vec<usize>]) {
    debug_assert_eq!(states.len(), neighbors.len());
    let socials: Vec<Option<EstimatePair>> = neighbors
        .iter()
        .map(|list| {
            if list.is_empty() {
                None
            } else {
                Some(fuse_social(list.iter().map(|&j| &states[j].local)))
            }
        })
        .collect();
    for (state, social) in states.iter_mut().zip(socials) {
        if let Some(social) = social {
            state.social = social;
        }
        state.refresh_informed();
    }
}

pub fn communication_round(states: &mut [RobotState], graph: &TopologyGraph) {
    exchange(states, graph.adjacency());
}

pub fn run_static_trial(cfg: &StaticTrialConfig) -> Result<TrialRecord, SimError> {
    cfg.validate()?;
    let n = cfg.n_robots;
    let graph = cfg.topology.build(n, &mut environment_rng(cfg.seed))?;
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|id| robot_rng(cfg.seed, id)).collect();
    let mut states = rngs
        .iter_mut()
        .map(|rng| RobotState::new(cfg.accuracy.sample(rng)?))
        .collect::<Result<Vec<_>, EstimationError>>()?;

    let series_len = if cfg.record_every_step {
        cfg.total_steps()
    } else {
        cfg.rounds
    };
    let mut snapshots = Vec::with_capacity(series_len);
    for _ in 0..cfg.rounds {
        for step in 0..cfg.observations_per_round {
            for (state, rng) in states.iter_mut().zip(rngs.iter_mut()) {
                step_observation(state, cfg.fill_ratio, cfg.confidence_cap, rng);
            }
            if cfg.record_every_step && step + 1 < cfg.observations_per_round {
                states.iter_mut().for_each(RobotState::refresh_informed);
                snapshots.push(states.iter().map(RobotState::snapshot).collect());
            }
        }
        communication_round(&mut states, &graph);
        snapshots.push(states.iter().map(RobotState::snapshot).collect());
    }
    TrialRecord::new(TrialConfig::Static(cfg.clone()), snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perfect_states(n: usize) -> Vec<RobotState> {
        (0..n).map(|_| RobotState::new(SensorAccuracy::PERFECT).unwrap()).collect()
    }

    #[test]
    fn all_black_perfect_sensor() {
        let mut rng = robot_rng(1, 0);
        let mut s = RobotState::new(SensorAccuracy::symmetric(1.0).unwrap()).unwrap();
        for _ in 0..10 {
            step_observation(&mut s, 1.0, DEFAULT_CONFIDENCE_CAP, &mut rng);
        }
        assert_eq!(s.tally, ObservationTally { black: 10, total: 10 });
        assert_eq!(s.local, EstimatePair::new(1.0, DEFAULT_CONFIDENCE_CAP));
    }

    #[test]
    fn all_white_perfect_white_sensor() {
        let mut rng = robot_rng(1, 0);
        let mut s = RobotState::new(SensorAccuracy::new(0.8, 1.0).unwrap()).unwrap();
        for _ in 0..10 {
            step_observation(&mut s, 0.0, DEFAULT_CONFIDENCE_CAP, &mut rng);
        }
        assert_eq!(s.tally, ObservationTally { black: 0, total: 10 });
        assert_eq!(s.local.value, 0.0);
    }

    #[test]
    fn long_run_local_mean_is_consistent() {
        let acc = SensorAccuracy::symmetric(0.75).unwrap();
        let mean = (0..100u64)
            .map(|seed| {
                let mut rng = robot_rng(seed, 0);
                let mut s = RobotState::new(acc).unwrap();
                for _ in 0..10_000 {
                    step_observation(&mut s, 0.55, DEFAULT_CONFIDENCE_CAP, &mut rng);
                }
                s.local.value
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean - 0.55).abs() < 0.02, "mean local estimate {mean}");
    }

    #[test]
    fn ring_of_three_averages_equal_weights() {
        let mut states = perfect_states(3);
        for (s, v) in states.iter_mut().zip([0.2, 0.5, 0.8]) {
            s.local = EstimatePair::new(v, 10.0);
        }
        communication_round(&mut states, &TopologyGraph::ring(3).unwrap());
        assert!((states[1].informed.value - 0.5).abs() < 1e-12);
        assert_eq!(states[1].informed.confidence, 30.0);
    }

    #[test]
    fn isolated_robot_keeps_local() {
        let mut states = perfect_states(2);
        states[0].local = EstimatePair::new(0.3, 4.0);
        states[1].local = EstimatePair::new(0.9, 4.0);
        exchange(&mut states, &[vec![], vec![]]);
        assert_eq!(states[0].informed, states[0].local);
        assert_eq!(states[0].social, EstimatePair::NEUTRAL);
    }

    #[test]
    fn social_persists_without_neighbors() {
        let mut states = perfect_states(2);
        states[0].local = EstimatePair::new(0.3, 4.0);
        states[1].local = EstimatePair::new(0.9, 4.0);
        exchange(&mut states, &[vec![1], vec![0]]);
        let remembered = states[0].social;
        states[1].local = EstimatePair::new(0.1, 100.0);
        exchange(&mut states, &[vec![], vec![]]);
        assert_eq!(states[0].social, remembered);
        assert!((states[0].informed.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn fully_connected_round_agrees() {
        let mut states = perfect_states(5);
        for (i, s) in states.iter_mut().enumerate() {
            s.local = EstimatePair::new(0.1 * i as f64, 1.0 + i as f64);
        }
        communication_round(&mut states, &TopologyGraph::fully_connected(5).unwrap());
        let first = states[0].informed.value;
        assert!(states.iter().all(|s| (s.informed.value - first).abs() < 1e-12));
    }

    #[test]
    fn minimal_trial() {
        let cfg = StaticTrialConfig {
            n_robots: 2,
            fill_ratio: 1.0,
            topology: Topology::FullyConnected,
            accuracy: AccuracyMode::Homogeneous { value: 1.0 },
            rounds: 1,
            observations_per_round: 1,
            ..Default::default()
        };
        let record = run_static_trial(&cfg).unwrap();
        assert_eq!(record.rounds(), 1);
        assert_eq!(record.informed_series(0), vec![1.0]);
        assert_eq!(record.informed_series(1), vec![1.0]);
    }

    #[test]
    fn per_step_recording_lengthens_series() {
        let cfg = StaticTrialConfig {
            n_robots: 4,
            topology: Topology::Ring,
            rounds: 3,
            observations_per_round: 5,
            record_every_step: true,
            ..Default::default()
        };
        let record = run_static_trial(&cfg).unwrap();
        assert_eq!(record.rounds(), 15);
        let rounds_only = run_static_trial(&StaticTrialConfig {
            record_every_step: false,
            ..cfg
        })
        .unwrap();
        // Round-boundary entries coincide.
        for r in 0..3 {
            assert_eq!(record.snapshots()[r * 5 + 4], rounds_only.snapshots()[r]);
        }
    }

    #[test]
    fn heterogeneous_draws_stay_in_bounds() {
        let mode = AccuracyMode::Heterogeneous { lo: 0.525, hi: 0.975 };
        let mut rng = robot_rng(4, 4);
        for _ in 0..1000 {
            let a = mode.sample(&mut rng).unwrap();
            assert_eq!(a.black, a.white);
            assert!((0.525..=0.975).contains(&a.black));
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            StaticTrialConfig {
                accuracy: AccuracyMode::Homogeneous { value: 0.5 },
                ..Default::default()
            },
            StaticTrialConfig {
                accuracy: AccuracyMode::Heterogeneous { lo: 0.9, hi: 0.8 },
                ..Default::default()
            },
            StaticTrialConfig {
                fill_ratio: 1.5,
                ..Default::default()
            },
            StaticTrialConfig {
                rounds: 0,
                ..Default::default()
            },
            StaticTrialConfig {
                n_robots: 2,
                topology: Topology::Ring,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(run_static_trial(&cfg).is_err(), "{cfg:?}");
        }
    }
}
