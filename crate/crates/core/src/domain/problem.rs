use ndarray::{Array1, Array2};

use super::{Dataset, Parameter};
use crate::error::Result;

/// A loss `F(x, D)` over a dataset, averaged over samples so that values are
/// comparable between agents holding different amounts of data.
///
/// Implementations may assume `d` is nonempty; callers check.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, x: &Parameter, d: &Dataset) -> f64;

    fn gradient(&self, x: &Parameter, d: &Dataset) -> Array1<f64>;

    fn loss_and_gradient(&self, x: &Parameter, d: &Dataset) -> (f64, Array1<f64>) {
        (self.loss(x, d), self.gradient(x, d))
    }

    /// Exact Hessian when it is cheap to form.
    fn hessian(&self, _x: &Parameter, _d: &Dataset) -> Option<Array2<f64>> {
        None
    }

    /// Norm of the prediction error on `d`.
    fn error_norm(&self, x: &Parameter, d: &Dataset) -> f64;

    /// Declared strong-convexity modulus `ℓ`, if the problem has one.
    fn convexity(&self) -> Option<f64> {
        None
    }

    /// Closed-form minimiser over `d`, with a flag set when regularisation
    /// had to be added. `None` if the problem has no closed form.
    fn exact_minimizer(&self, _d: &Dataset) -> Option<Result<(Parameter, bool)>> {
        None
    }

    /// Starting point for runs. Zero unless the problem needs symmetry breaking.
    fn initial_parameter(&self, _seed: u64) -> Parameter {
        Parameter::zeros(self.dim())
    }
}
