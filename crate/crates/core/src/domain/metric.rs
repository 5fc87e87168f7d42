use serde::{Deserialize, Serialize};

use super::{Dataset, Parameter, Problem};
use crate::error::{Result, SolaError};

/// Added to the denominator of inverse metrics so that a perfect fit does not
/// divide by zero.
pub const DIVISION_GUARD: f64 = 1e-12;

/// Performance `P(x, D) ≥ 0`; larger is better.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceMetric {
    /// `1 / (F(x, D) + ε)`
    #[default]
    InverseLoss,
    /// `1 / (‖prediction error‖₂ + ε)`
    InverseErrorNorm,
}

impl PerformanceMetric {
    pub fn evaluate(self, problem: &dyn Problem, x: &Parameter, d: &Dataset) -> Result<f64> {
        if d.is_empty() {
            return Err(SolaError::EmptyDataset);
        }
        let raw = match self {
            PerformanceMetric::InverseLoss => problem.loss(x, d),
            PerformanceMetric::InverseErrorNorm => problem.error_norm(x, d),
        };
        Ok(Self::score(raw, DIVISION_GUARD))
    }

    /// Metric value from an already computed loss or error norm.
    pub fn score(raw: f64, guard: f64) -> f64 {
        1.0 / (raw.max(0.0) + guard)
    }

    /// When the metric is a function of the loss alone, derive it without
    /// another pass over the data.
    pub fn from_loss(self, loss: f64) -> Option<f64> {
        match self {
            PerformanceMetric::InverseLoss => Some(Self::score(loss, DIVISION_GUARD)),
            PerformanceMetric::InverseErrorNorm => None,
        }
    }
}
