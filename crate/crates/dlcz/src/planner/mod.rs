//! Planning: how likely two chips hold a frequency-matched pair, and how much fiber
//! the link tolerates before the correlations drown in background.

mod link;
mod yields;

pub use link::{degraded_g2, integration_time, max_separation, DegradeFlags, IntegrationPlan, LinkBudget, ReferenceRun, Separation};
pub use yields::{multi_chip_yield, pair_yield, YieldModel, YieldReport};

use crate::noise_model::NoiseError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

pub type Result<T> = std::result::Result<T, PlanError>;

#[cfg(test)]
mod tests;
