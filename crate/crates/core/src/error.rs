use thiserror::Error;

use crate::estimation::EstimationError;
use crate::metrics::MetricsError;
use crate::topology::TopologyError;

/// Failure while validating or running a single trial.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl SimError {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            field,
            message: message.into(),
        }
    }
}
