//! Robots diffusing over a square tiled arena. Each step every robot moves,
//! reads the tile beneath it and exchanges estimates with every robot inside
//! its communication range.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::estimation::{sample_reading, EstimationError, DEFAULT_CONFIDENCE_CAP};
use crate::metrics::{MetricParams, TrialConfig, TrialRecord};
use crate::sim_static::{
    environment_rng, exchange, robot_rng, validate_cap, validate_fill_ratio, AccuracyMode, RobotState,
};

pub const DEFAULT_TICK: f64 = 0.1;
pub const DEFAULT_TURN_PROBABILITY: f64 = 0.1;
pub const DEFAULT_COMM_RANGE: f64 = 0.7;
pub const DEFAULT_SPEED: f64 = 0.14;

/// Attempts at finding an inward heading before a robot stays in place.
const MAX_HEADING_DRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaConfig {
    pub n_robots: usize,
    /// `N * pi * r^2 / L^2`
    pub density: f64,
    /// Communication range in metres.
    pub comm_range: f64,
    /// Metres per second.
    pub speed: f64,
    /// Seconds per time step.
    pub tick: f64,
    /// Tile edge in metres; defaults to the distance covered along a tile
    /// diagonal in one tick.
    #[serde(default)]
    pub tile_side: Option<f64>,
    pub turn_probability: f64,
    pub fill_ratio: f64,
    pub total_steps: usize,
    pub seed: u64,
    pub accuracy: AccuracyMode,
    pub confidence_cap: f64,
    pub metrics: MetricParams,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            n_robots: 25,
            density: 1.0,
            comm_range: DEFAULT_COMM_RANGE,
            speed: DEFAULT_SPEED,
            tick: DEFAULT_TICK,
            tile_side: None,
            turn_probability: DEFAULT_TURN_PROBABILITY,
            fill_ratio: 0.55,
            total_steps: 10_000,
            seed: 0,
            accuracy: AccuracyMode::Homogeneous { value: 0.75 },
            confidence_cap: DEFAULT_CONFIDENCE_CAP,
            metrics: MetricParams::default(),
        }
    }
}

impl ArenaConfig {
    pub fn arena_side(&self) -> f64 {
        (self.n_robots as f64 * PI * self.comm_range * self.comm_range / self.density).sqrt()
    }

    pub fn tile_side(&self) -> f64 {
        self.tile_side.unwrap_or(self.speed * self.tick / SQRT_2)
    }

    pub fn step_length(&self) -> f64 {
        self.speed * self.tick
    }

    pub fn motion(&self) -> MotionModel {
        MotionModel {
            arena_side: self.arena_side(),
            step_length: self.step_length(),
            turn_probability: self.turn_probability,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_robots == 0 {
            return Err(SimError::config("n_robots", "must be positive"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(SimError::config("density", format!("{} must be positive", self.density)));
        }
        if !(self.comm_range > 0.0 && self.comm_range.is_finite()) {
            return Err(SimError::config("comm_range", format!("{} must be positive", self.comm_range)));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(SimError::config("speed", format!("{} must be non-negative", self.speed)));
        }
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(SimError::config("tick", format!("{} must be positive", self.tick)));
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return Err(SimError::config(
                "turn_probability",
                format!("{} is outside [0, 1]", self.turn_probability),
            ));
        }
        let tile = self.tile_side();
        if !(tile > 0.0 && tile.is_finite()) {
            return Err(SimError::config("tile_side", format!("{tile} must be positive")));
        }
        if self.arena_side() < tile {
            return Err(SimError::config(
                "tile_side",
                format!("arena side {} m is smaller than one tile ({tile} m)", self.arena_side()),
            ));
        }
        validate_fill_ratio(self.fill_ratio)?;
        if self.total_steps == 0 {
            return Err(SimError::config("total_steps", "must be positive"));
        }
        self.accuracy.validate()?;
        validate_cap(self.confidence_cap)?;
        self.metrics.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub arena_side: f64,
    pub step_length: f64,
    pub turn_probability: f64,
}

impl MotionModel {
    fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.arena_side).contains(&x) && (0.0..=self.arena_side).contains(&y)
    }
}

/// Square grid of black (`true`) and white tiles covering the arena.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    side_count: usize,
    tile_side: f64,
    colors: Vec<bool>,
}

impl TileGrid {
    /// Exactly `round(f * cells)` black tiles at uniformly random positions.
    pub fn random<R: Rng + ?Sized>(side_count: usize, tile_side: f64, fill_ratio: f64, rng: &mut R) -> Self {
        let cells = side_count * side_count;
        let black = ((fill_ratio * cells as f64).round() as usize).min(cells);
        let mut colors = vec![false; cells];
        for i in index::sample(rng, cells, black) {
            colors[i] = true;
        }
        Self {
            side_count,
            tile_side,
            colors,
        }
    }

    pub fn from_colors(side_count: usize, tile_side: f64, colors: Vec<bool>) -> Self {
        assert_eq!(colors.len(), side_count * side_count, "grid must be square");
        Self {
            side_count,
            tile_side,
            colors,
        }
    }

    pub fn side_count(&self) -> usize {
        self.side_count
    }

    pub fn tile_side(&self) -> f64 {
        self.tile_side
    }

    pub fn cell_count(&self) -> usize {
        self.colors.len()
    }

    pub fn black_count(&self) -> usize {
        self.colors.iter().filter(|&&c| c).count()
    }

    /// Column (or row) owning coordinate `v` under half-open tile intervals.
    pub fn cell_index(&self, v: f64) -> usize {
        ((v / self.tile_side).floor().max(0.0) as usize).min(self.side_count - 1)
    }

    pub fn is_black(&self, col: usize, row: usize) -> bool {
        self.colors[row * self.side_count + col]
    }
}

pub fn build_arena<R: Rng + ?Sized>(cfg: &ArenaConfig, rng: &mut R) -> Result<(TileGrid, Vec<Pose>), SimError> {
    cfg.validate()?;
    let side = cfg.arena_side();
    let tile = cfg.tile_side();
    let side_count = (side / tile).ceil() as usize;
    let grid = TileGrid::random(side_count, tile, cfg.fill_ratio, rng);
    let poses = (0..cfg.n_robots)
        .map(|_| Pose {
            x: rng.random_range(0.0..=side),
            y: rng.random_range(0.0..=side),
            heading: rng.random_range(0.0..TAU),
        })
        .collect();
    Ok((grid, poses))
}

/// Uncorrelated random walk: straight runs with a fresh uniform heading drawn
/// with probability `turn_probability`. A step that would leave the arena is
/// replaced by a step along a freshly drawn heading that stays inside.
pub fn step_motion<R: Rng + ?Sized>(pose: Pose, model: &MotionModel, rng: &mut R) -> Pose {
    let mut heading = pose.heading;
    if rng.random_bool(model.turn_probability) {
        heading = rng.random_range(0.0..TAU);
    }
    let advance = |h: f64| (pose.x + model.step_length * h.cos(), pose.y + model.step_length * h.sin());
    let (mut x, mut y) = advance(heading);
    if !model.contains(x, y) {
        (x, y) = (pose.x, pose.y);
        for _ in 0..MAX_HEADING_DRAWS {
            heading = rng.random_range(0.0..TAU);
            let (cx, cy) = advance(heading);
            if model.contains(cx, cy) {
                (x, y) = (cx, cy);
                break;
            }
        }
    }
    Pose {
        x: x.clamp(0.0, model.arena_side),
        y: y.clamp(0.0, model.arena_side),
        heading,
    }
}

/// True colour of the tile under `pose`.
pub fn sense_tile(pose: &Pose, grid: &TileGrid) -> bool {
    grid.is_black(grid.cell_index(pose.x), grid.cell_index(pose.y))
}

/// Robots within Euclidean distance `range` of each other, excluding self.
pub fn range_neighbors(poses: &[Pose], range: f64) -> Vec<Vec<usize>> {
    let r2 = range * range;
    let mut out = vec![Vec::new(); poses.len()];
    for i in 0..poses.len() {
        for j in (i + 1)..poses.len() {
            let dx = poses[i].x - poses[j].x;
            let dy = poses[i].y - poses[j].y;
            if dx * dx + dy * dy <= r2 {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    out
}

/// One line of the optional trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub informed: f64,
}

pub fn run_dynamic_trial(cfg: &ArenaConfig) -> Result<TrialRecord, SimError> {
    run_dynamic_trial_observed(cfg, |_, _, _| {})
}

/// Runs a trial and calls `observer(step, poses, states)` after every step.
pub fn run_dynamic_trial_observed<F>(cfg: &ArenaConfig, mut observer: F) -> Result<TrialRecord, SimError>
where
    F: FnMut(usize, &[Pose], &[RobotState]),
{
    let (grid, mut poses) = build_arena(cfg, &mut environment_rng(cfg.seed))?;
    let motion = cfg.motion();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n_robots).map(|id| robot_rng(cfg.seed, id)).collect();
    let mut states = rngs
        .iter_mut()
        .map(|rng| RobotState::new(cfg.accuracy.sample(rng)?))
        .collect::<Result<Vec<_>, EstimationError>>()?;

    let mut snapshots = Vec::with_capacity(cfg.total_steps);
    for step in 0..cfg.total_steps {
        for ((pose, state), rng) in poses.iter_mut().zip(states.iter_mut()).zip(rngs.iter_mut()) {
            *pose = step_motion(*pose, &motion, rng);
            let reading = sample_reading(sense_tile(pose, &grid), state.accuracy, rng);
            state.observe(reading, cfg.confidence_cap);
        }
        let neighbors = range_neighbors(&poses, cfg.comm_range);
        exchange(&mut states, &neighbors);
        snapshots.push(states.iter().map(RobotState::snapshot).collect());
        observer(step, &poses, &states);
    }
    TrialRecord::new(TrialConfig::Dynamic(cfg.clone()), snapshots)
}

/// Runs a trial while writing one JSON line per robot per step.
pub fn write_trajectory<W: Write>(cfg: &ArenaConfig, out: &mut W) -> Result<TrialRecord, TrajectoryError> {
    let mut io_error = None;
    let record = run_dynamic_trial_observed(cfg, |step, poses, states| {
        if io_error.is_some() {
            return;
        }
        for (robot, (pose, state)) in poses.iter().zip(states).enumerate() {
            let point = TrajectoryPoint {
                step,
                robot,
                x: pose.x,
                y: pose.y,
                informed: state.informed.value,
            };
            let line = serde_json::to_string(&point).expect("plain struct serializes");
            if let Err(e) = writeln!(out, "{line}") {
                io_error = Some(e);
                return;
            }
        }
    })?;
    match io_error {
        Some(e) => Err(TrajectoryError::Io(e)),
        None => Ok(record),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("writing trajectory: {0}")]
    Io(#[from] std::io::Error),
}
