use ndarray::{Array1, Zip};

use crate::error::{Result, SolaError};

/// The shared decision vector `x ∈ R^n`.
///
/// Structured models (the MLP) keep their own layout and flatten into this
/// vector; the fusion loop only ever sees the flat form.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    values: Array1<f64>,
}

impl Parameter {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: Array1::zeros(dim),
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self {
            values: Array1::from(values),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("parameters are always contiguous")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.dot(&self.values).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &Parameter) -> f64 {
        Zip::from(&self.values)
            .and(&other.values)
            .fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
            .sqrt()
    }

    /// Convex blend `alpha * target + (1 - alpha) * self`.
    pub fn blend(&self, target: &Parameter, alpha: f64) -> Result<Parameter> {
        self.check_dim(target.dim())?;
        let values = Zip::from(&target.values)
            .and(&self.values)
            .map_collect(|t, s| alpha * t + (1.0 - alpha) * s);
        Ok(Parameter { values })
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(SolaError::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            })
        }
    }
}

impl From<Array1<f64>> for Parameter {
    fn from(values: Array1<f64>) -> Self {
        Self { values }
    }
}
