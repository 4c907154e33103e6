//! Local maximum-likelihood estimation of the fill ratio from noisy binary
//! readings, its Fisher-information confidence, and confidence-weighted fusion.
//!
//! Everything here is a pure function of its arguments. The only stateful
//! input is the random stream passed to [`sample_reading`].

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound applied to every local confidence.
///
/// The Fisher information is unbounded for perfect sensors on the boundary
/// branches and grows linearly in the number of observations.
pub const DEFAULT_CONFIDENCE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EstimationError {
    #[error("no observations recorded (t = 0)")]
    NoObservations,
    #[error("sensor is not informative: b + w = {sum} must exceed 1")]
    UninformativeSensor { sum: f64 },
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("tally has more black readings ({black}) than readings ({total})")]
    InvalidTally { black: u64, total: u64 },
    #[error("cannot fuse estimates whose total confidence is zero")]
    NoInformation,
}

/// Probability of a correct reading on a black tile (`black`) and on a white
/// tile (`white`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorAccuracy {
    pub black: f64,
    pub white: f64,
}

impl SensorAccuracy {
    pub fn new(black: f64, white: f64) -> Result<Self, EstimationError> {
        check_probability("b", black)?;
        check_probability("w", white)?;
        Ok(Self { black, white })
    }

    /// Same accuracy on both tile colours.
    pub fn symmetric(p: f64) -> Result<Self, EstimationError> {
        Self::new(p, p)
    }

    pub const PERFECT: Self = Self {
        black: 1.0,
        white: 1.0,
    };

    /// `b + w - 1`; positive iff the sensor carries information about `f`.
    pub fn contrast(&self) -> f64 {
        self.black + self.white - 1.0
    }

    /// Squared contrast, the common factor of every Fisher-information branch.
    pub fn q(&self) -> f64 {
        let c = self.contrast();
        c * c
    }

    pub fn is_informative(&self) -> bool {
        self.contrast() > 0.0
    }

    pub fn ensure_informative(&self) -> Result<(), EstimationError> {
        if self.is_informative() {
            Ok(())
        } else {
            Err(EstimationError::UninformativeSensor {
                sum: self.black + self.white,
            })
        }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), EstimationError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EstimationError::InvalidProbability { name, value })
    }
}

/// Running count of black readings out of all readings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationTally {
    pub black: u64,
    pub total: u64,
}

impl ObservationTally {
    pub fn new(black: u64, total: u64) -> Result<Self, EstimationError> {
        if black > total {
            return Err(EstimationError::InvalidTally { black, total });
        }
        Ok(Self { black, total })
    }

    pub fn record(&mut self, reading_is_black: bool) {
        self.total += 1;
        if reading_is_black {
            self.black += 1;
        }
    }
}

/// An estimate of the fill ratio together with its information weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatePair {
    pub value: f64,
    pub confidence: f64,
}

impl EstimatePair {
    /// Identity element of fusion: carries no information.
    pub const NEUTRAL: Self = Self {
        value: 0.0,
        confidence: 0.0,
    };

    pub fn new(value: f64, confidence: f64) -> Self {
        Self { value, confidence }
    }
}

impl Default for EstimatePair {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

/// `p(z = 1)` for a tile process with black fraction `fill_ratio`.
pub fn reading_probability(fill_ratio: f64, acc: SensorAccuracy) -> f64 {
    acc.black * fill_ratio + (1.0 - acc.white) * (1.0 - fill_ratio)
}

/// Passes a true tile colour through the sensor noise model.
pub fn sample_reading<R: Rng + ?Sized>(tile_is_black: bool, acc: SensorAccuracy, rng: &mut R) -> bool {
    if tile_is_black {
        rng.random_bool(acc.black)
    } else {
        !rng.random_bool(acc.white)
    }
}

/// Which interval of the piecewise estimator a tally falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `n <= (1 - w) t`: the reading rate is explained by false positives alone.
    Low,
    Interior,
    /// `n >= b t`
    High,
}

impl Branch {
    pub fn of(black: f64, total: f64, acc: SensorAccuracy) -> Self {
        if black <= (1.0 - acc.white) * total {
            Branch::Low
        } else if black >= acc.black * total {
            Branch::High
        } else {
            Branch::Interior
        }
    }
}

fn validated(tally: ObservationTally, acc: SensorAccuracy) -> Result<(f64, f64), EstimationError> {
    if tally.total == 0 {
        return Err(EstimationError::NoObservations);
    }
    if tally.black > tally.total {
        return Err(EstimationError::InvalidTally {
            black: tally.black,
            total: tally.total,
        });
    }
    acc.ensure_informative()?;
    Ok((tally.black as f64, tally.total as f64))
}

/// Maximum-likelihood estimate of the fill ratio given `tally`.
pub fn local_estimate(tally: ObservationTally, acc: SensorAccuracy) -> Result<f64, EstimationError> {
    let (n, t) = validated(tally, acc)?;
    let value = match Branch::of(n, t, acc) {
        Branch::Low => 0.0,
        Branch::High => 1.0,
        Branch::Interior => (n / t + acc.white - 1.0) / acc.contrast(),
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Fisher information of the local estimate, evaluated on a given branch at a
/// (possibly non-integer) black count. Returns `+inf` or NaN where the branch
/// is singular; callers decide how to cap.
pub fn fisher_branch_value(branch: Branch, black: f64, total: f64, acc: SensorAccuracy) -> f64 {
    let q = acc.q();
    let (b, w) = (acc.black, acc.white);
    match branch {
        Branch::Low => {
            let white_seen = total - black;
            q * (total * w * w - 2.0 * white_seen * w + white_seen) / (w * w * (w - 1.0) * (w - 1.0))
        }
        Branch::Interior => q * total * total * total / (black * (total - black)),
        Branch::High => q * (total * b * b - 2.0 * black * b + black) / (b * b * (b - 1.0) * (b - 1.0)),
    }
}

/// Local confidence with the default cap.
pub fn local_confidence(tally: ObservationTally, acc: SensorAccuracy) -> Result<f64, EstimationError> {
    local_confidence_capped(tally, acc, DEFAULT_CONFIDENCE_CAP)
}

/// Fisher information of the local estimate, limited to `cap`. A singular
/// branch (perfect sensor on the matching boundary) maps to `cap`.
pub fn local_confidence_capped(
    tally: ObservationTally,
    acc: SensorAccuracy,
    cap: f64,
) -> Result<f64, EstimationError> {
    let (n, t) = validated(tally, acc)?;
    let alpha = fisher_branch_value(Branch::of(n, t, acc), n, t, acc);
    if alpha.is_finite() {
        Ok(alpha.clamp(0.0, cap))
    } else {
        Ok(cap)
    }
}

/// Estimate and confidence in one call.
pub fn local_pair(tally: ObservationTally, acc: SensorAccuracy, cap: f64) -> Result<EstimatePair, EstimationError> {
    Ok(EstimatePair {
        value: local_estimate(tally, acc)?,
        confidence: local_confidence_capped(tally, acc, cap)?,
    })
}

/// Confidence-weighted mean of neighbour estimates, with the summed
/// confidence as its weight. Empty or zero-weight input gives
/// [`EstimatePair::NEUTRAL`].
pub fn fuse_social<'a, I>(neighbor_estimates: I) -> EstimatePair
where
    I: IntoIterator<Item = &'a EstimatePair>,
{
    let (weighted, total) = neighbor_estimates
        .into_iter()
        .fold((0.0, 0.0), |(wsum, csum), e| (wsum + e.confidence * e.value, csum + e.confidence));
    if total > 0.0 {
        EstimatePair {
            value: (weighted / total).clamp(0.0, 1.0),
            confidence: total,
        }
    } else {
        EstimatePair::NEUTRAL
    }
}

/// Fuses a robot's own estimate with its social estimate.
pub fn informed_estimate(local: EstimatePair, social: EstimatePair) -> Result<EstimatePair, EstimationError> {
    let total = local.confidence + social.confidence;
    if total.is_nan() || total <= 0.0 {
        return Err(EstimationError::NoInformation);
    }
    if social.confidence == 0.0 {
        return Ok(local);
    }
    let value = (local.confidence * local.value + social.confidence * social.value) / total;
    Ok(EstimatePair {
        value: value.clamp(0.0, 1.0),
        confidence: total,
    })
}
