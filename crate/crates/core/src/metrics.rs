//! Convergence, accuracy, best-of-B decisions and consensus, computed from
//! recorded informed-estimate series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SimError;
use crate::sim_dynamic::ArenaConfig;
use crate::sim_static::StaticTrialConfig;

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("index {index} out of range for a series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("estimate {0} outside [0, 1]")]
    EstimateOutOfRange(f64),
    #[error("bin count must be positive")]
    NoBins,
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("records do not share a shape: {0}")]
    MixedShapes(String),
}

/// Threshold `delta` for convergence and bin count `B` for decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    pub delta: f64,
    pub bins: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            bins: DEFAULT_BINS,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(MetricsError::InvalidDelta(self.delta));
        }
        if self.bins == 0 {
            return Err(MetricsError::NoBins);
        }
        Ok(())
    }
}

/// Smallest index `K` such that every later value lies strictly within
/// `delta` of `series[K]`. The last index always qualifies.
pub fn convergence_round(series: &[f64], delta: f64) -> Result<usize, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(MetricsError::InvalidDelta(delta));
    }
    // Scan backwards keeping the extremes of the strict suffix.
    let last = series.len() - 1;
    let (mut lo, mut hi) = (series[last], series[last]);
    let mut best = last;
    for k in (0..last).rev() {
        let x = series[k];
        if hi - x < delta && x - lo < delta {
            best = k;
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok(best)
}

/// Absolute error of the estimate at index `k`.
pub fn accuracy(series: &[f64], k: usize, fill_ratio: f64) -> Result<f64, MetricsError> {
    series
        .get(k)
        .map(|x| (x - fill_ratio).abs())
        .ok_or(MetricsError::IndexOutOfRange {
            index: k,
            len: series.len(),
        })
}

/// 1-based bin of `estimate` among `bins` equal half-open bins on `[0, 1]`,
/// with the last bin closed.
pub fn decide_bin(estimate: f64, bins: usize) -> Result<usize, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    if !(0.0..=1.0).contains(&estimate) {
        return Err(MetricsError::EstimateOutOfRange(estimate));
    }
    let b = bins as f64;
    let mut k = ((estimate * b).floor() as usize).min(bins - 1);
    // Align with boundaries computed as k / B so that every k / B opens bin k + 1.
    if k + 1 < bins && (k + 1) as f64 / b <= estimate {
        k += 1;
    } else if k > 0 && k as f64 / b > estimate {
        k -= 1;
    }
    Ok(k + 1)
}

/// Fraction of estimates that fall in the same bin as `fill_ratio`.
pub fn consensus_fraction(estimates: &[f64], fill_ratio: f64, bins: usize) -> Result<f64, MetricsError> {
    if estimates.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let target = decide_bin(fill_ratio, bins)?;
    let mut correct = 0usize;
    for &e in estimates {
        if decide_bin(e, bins)? == target {
            correct += 1;
        }
    }
    Ok(correct as f64 / estimates.len() as f64)
}

/// The quantities a robot stores at the end of a round: its tally, local
/// pair, social pair and informed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    #[serde(rename = "n")]
    pub black: u64,
    #[serde(rename = "t")]
    pub total: u64,
    pub local: f64,
    #[serde(rename = "alpha")]
    pub local_confidence: f64,
    pub social: f64,
    #[serde(rename = "beta")]
    pub social_confidence: f64,
    pub informed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotMetrics {
    /// Rounds elapsed until convergence; equals the series length when the
    /// estimate never settles.
    pub convergence_round: usize,
    pub converged: bool,
    /// `|x^K - f|`
    pub error: f64,
    /// Bin chosen from the final informed estimate.
    pub bin: usize,
}

/// Per-robot metrics of one informed series.
pub fn robot_metrics(series: &[f64], fill_ratio: f64, params: MetricParams) -> Result<RobotMetrics, MetricsError> {
    let k = convergence_round(series, params.delta)?;
    let last = series.len() - 1;
    Ok(RobotMetrics {
        convergence_round: k + 1,
        converged: k < last || series.len() == 1,
        error: accuracy(series, k, fill_ratio)?,
        bin: decide_bin(series[last], params.bins)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TrialConfig {
    Static(StaticTrialConfig),
    Dynamic(ArenaConfig),
}

impl TrialConfig {
    pub fn fill_ratio(&self) -> f64 {
        match self {
            TrialConfig::Static(c) => c.fill_ratio,
            TrialConfig::Dynamic(c) => c.fill_ratio,
        }
    }

    pub fn n_robots(&self) -> usize {
        match self {
            TrialConfig::Static(c) => c.n_robots,
            TrialConfig::Dynamic(c) => c.n_robots,
        }
    }

    pub fn metric_params(&self) -> MetricParams {
        match self {
            TrialConfig::Static(c) => c.metrics,
            TrialConfig::Dynamic(c) => c.metrics,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            TrialConfig::Static(c) => c.seed,
            TrialConfig::Dynamic(c) => c.seed,
        }
    }

    /// Expected length of every robot series.
    pub fn series_len(&self) -> usize {
        match self {
            TrialConfig::Static(c) if c.record_every_step => c.total_steps(),
            TrialConfig::Static(c) => c.rounds,
            TrialConfig::Dynamic(c) => c.total_steps,
        }
    }

    /// Grouping key for aggregation: everything except the seed.
    pub fn cell_key(&self) -> CellKey {
        match self {
            TrialConfig::Static(c) => CellKey {
                mode: "static".into(),
                accuracy: c.accuracy.to_string(),
                setting: format!("{} C={} R={}", c.topology, c.rounds, c.observations_per_round),
                n_robots: c.n_robots,
                fill_ratio: c.fill_ratio.to_string(),
            },
            TrialConfig::Dynamic(c) => CellKey {
                mode: "dynamic".into(),
                accuracy: c.accuracy.to_string(),
                setting: format!("D={} r={} V={} steps={}", c.density, c.comm_range, c.speed, c.total_steps),
                n_robots: c.n_robots,
                fill_ratio: c.fill_ratio.to_string(),
            },
        }
    }
}

/// Full time series of one trial: `snapshots[round][robot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    config: TrialConfig,
    snapshots: Vec<Vec<RobotSnapshot>>,
    metrics: Vec<RobotMetrics>,
}

impl TrialRecord {
    pub fn new(config: TrialConfig, snapshots: Vec<Vec<RobotSnapshot>>) -> Result<Self, SimError> {
        let n = config.n_robots();
        if snapshots.len() != config.series_len() {
            return Err(MetricsError::MixedShapes(format!(
                "expected {} rounds, got {}",
                config.series_len(),
                snapshots.len()
            ))
            .into());
        }
        if let Some(row) = snapshots.iter().find(|row| row.len() != n) {
            return Err(MetricsError::MixedShapes(format!("expected {n} robots per round, got {}", row.len())).into());
        }
        let params = config.metric_params();
        let f = config.fill_ratio();
        let mut record = Self {
            config,
            snapshots,
            metrics: Vec::with_capacity(n),
        };
        for robot in 0..n {
            let m = robot_metrics(&record.informed_series(robot), f, params)?;
            record.metrics.push(m);
        }
        Ok(record)
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn snapshots(&self) -> &[Vec<RobotSnapshot>] {
        &self.snapshots
    }

    pub fn metrics(&self) -> &[RobotMetrics] {
        &self.metrics
    }

    pub fn rounds(&self) -> usize {
        self.snapshots.len()
    }

    pub fn n_robots(&self) -> usize {
        self.config.n_robots()
    }

    pub fn informed_series(&self, robot: usize) -> Vec<f64> {
        self.snapshots.iter().map(|row| row[robot].informed).collect()
    }

    pub fn local_series(&self, robot: usize) -> Vec<f64> {
        self.snapshots.iter().map(|row| row[robot].local).collect()
    }

    /// Informed estimates of all robots after a round.
    pub fn informed_at(&self, round: usize) -> Vec<f64> {
        self.snapshots[round].iter().map(|s| s.informed).collect()
    }

    pub fn consensus_series(&self) -> Vec<f64> {
        let digest = self.digest();
        let n = self.n_robots() as f64;
        digest.correct_per_round.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn digest(&self) -> TrialDigest {
        let params = self.config.metric_params();
        let target = decide_bin(self.config.fill_ratio(), params.bins).expect("fill ratio validated");
        let correct_per_round = self
            .snapshots
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|s| decide_bin(s.informed, params.bins) == Ok(target))
                    .count() as u32
            })
            .collect();
        TrialDigest {
            key: self.config.cell_key(),
            rounds: self.rounds(),
            n_robots: self.n_robots(),
            robots: self.metrics.clone(),
            correct_per_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub mode: String,
    pub accuracy: String,
    pub setting: String,
    pub n_robots: usize,
    pub fill_ratio: String,
}

/// What aggregation needs from a trial, without the full series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDigest {
    pub key: CellKey,
    pub rounds: usize,
    pub n_robots: usize,
    pub robots: Vec<RobotMetrics>,
    pub correct_per_round: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linearly interpolated quartiles. `values` must be non-empty.
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
        }
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    Quartiles::of(values).median
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    pub trials: usize,
    pub samples: usize,
    pub convergence: Quartiles,
    pub error: Quartiles,
    pub non_converged: usize,
    /// First 1-based round at which every robot of every trial picks the
    /// correct bin.
    pub consensus_round: Option<usize>,
    /// Pooled fraction of correct robots after each round.
    pub consensus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
}

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "mode",
    "accuracy",
    "setting",
    "n_robots",
    "fill_ratio",
    "trials",
    "samples",
    "k_q1",
    "k_median",
    "k_q3",
    "err_q1",
    "err_median",
    "err_q3",
    "non_converged",
    "consensus_round",
];

pub const CONSENSUS_COLUMNS: [&str; 7] = [
    "mode",
    "accuracy",
    "setting",
    "n_robots",
    "fill_ratio",
    "round",
    "fraction_correct",
];

impl Summary {
    /// Tab-separated summary, one row per cell, columns as [`SUMMARY_COLUMNS`].
    pub fn to_tsv(&self) -> String {
        let mut out = SUMMARY_COLUMNS.join("\t");
        out.push('\n');
        for c in &self.cells {
            let consensus = c.consensus_round.map_or_else(|| "never".to_string(), |r| r.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.key.mode,
                c.key.accuracy,
                c.key.setting,
                c.key.n_robots,
                c.key.fill_ratio,
                c.trials,
                c.samples,
                c.convergence.q1,
                c.convergence.median,
                c.convergence.q3,
                c.error.q1,
                c.error.median,
                c.error.q3,
                c.non_converged,
                consensus
            );
        }
        out
    }

    /// Fraction of correct robots per round per cell, columns as
    /// [`CONSENSUS_COLUMNS`].
    pub fn consensus_tsv(&self) -> String {
        let mut out = CONSENSUS_COLUMNS.join("\t");
        out.push('\n');
        for c in &self.cells {
            for (round, fraction) in c.consensus.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.key.mode,
                    c.key.accuracy,
                    c.key.setting,
                    c.key.n_robots,
                    c.key.fill_ratio,
                    round + 1,
                    fraction
                );
            }
        }
        out
    }
}

/// Groups trials by cell and summarises each cell. Rows are ordered by key.
pub fn aggregate(digests: &[TrialDigest]) -> Result<Summary, MetricsError> {
    if let Some(first) = digests.first() {
        if let Some(other) = digests.iter().find(|d| d.key.mode != first.key.mode) {
            return Err(MetricsError::MixedShapes(format!(
                "modes `{}` and `{}` in one aggregation",
                first.key.mode, other.key.mode
            )));
        }
    }
    let mut cells: BTreeMap<&CellKey, Vec<&TrialDigest>> = BTreeMap::new();
    for d in digests {
        cells.entry(&d.key).or_default().push(d);
    }
    let mut out = Vec::with_capacity(cells.len());
    for (key, trials) in cells {
        let (rounds, n) = (trials[0].rounds, trials[0].n_robots);
        if trials.iter().any(|t| t.rounds != rounds || t.n_robots != n || t.robots.len() != n) {
            return Err(MetricsError::MixedShapes(format!(
                "cell {key:?} mixes round or robot counts"
            )));
        }
        let ks: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.robots.iter().map(|r| r.convergence_round as f64))
            .collect();
        let errors: Vec<f64> = trials.iter().flat_map(|t| t.robots.iter().map(|r| r.error)).collect();
        if ks.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        let non_converged = trials
            .iter()
            .flat_map(|t| t.robots.iter())
            .filter(|r| !r.converged)
            .count();
        let population = (trials.len() * n) as u64;
        let correct: Vec<u64> = (0..rounds)
            .map(|r| trials.iter().map(|t| u64::from(t.correct_per_round[r])).sum())
            .collect();
        let consensus_round = correct.iter().position(|&c| c == population).map(|r| r + 1);
        out.push(CellSummary {
            key: key.clone(),
            trials: trials.len(),
            samples: ks.len(),
            convergence: Quartiles::of(&ks),
            error: Quartiles::of(&errors),
            non_converged,
            consensus_round,
            consensus: correct.iter().map(|&c| c as f64 / population as f64).collect(),
        });
    }
    Ok(Summary { cells: out })
}

/// Convenience wrapper over [`aggregate`] for in-memory records.
pub fn aggregate_records(records: &[TrialRecord]) -> Result<Summary, MetricsError> {
    let digests: Vec<TrialDigest> = records.iter().map(TrialRecord::digest).collect();
    aggregate(&digests)
}
