use crate::domain::{Dataset, Parameter, Problem};
use crate::error::{Result, SolaError};

/// Offline full-batch gradient descent used as the reference when a problem
/// has no closed-form minimiser.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdBudget {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for GdBudget {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
        }
    }
}

/// `x*` over the pooled data.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub x: Parameter,
    /// A ridge term was needed to solve the normal equations.
    pub regularized: bool,
    /// Budgeted reference rather than an exact minimiser.
    pub approximate: bool,
}

/// Exact minimiser when the problem has one, otherwise `budget` epochs of
/// gradient descent from `start`.
pub fn batch_optimum(all_data: &Dataset, problem: &dyn Problem, budget: GdBudget, start: Option<Parameter>) -> Result<Optimum> {
    if all_data.is_empty() {
        return Err(SolaError::EmptyDataset);
    }
    if let Some(exact) = problem.exact_minimizer(all_data) {
        let (x, regularized) = exact?;
        return Ok(Optimum {
            x,
            regularized,
            approximate: false,
        });
    }
    let mut x = start.unwrap_or_else(|| problem.initial_parameter(0));
    for _ in 0..budget.epochs {
        let g = problem.gradient(&x, all_data);
        x.values_mut().scaled_add(-budget.learning_rate, &g);
        if !x.is_finite() {
            return Err(SolaError::NonFinite("reference optimisation"));
        }
    }
    Ok(Optimum {
        x,
        regularized: false,
        approximate: true,
    })
}
