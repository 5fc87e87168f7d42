use ndarray::Array1;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{Dataset, Parameter, Problem};
use crate::error::{Result, SolaError};

/// Gradient descent with a gradient-proportional perturbation:
/// `x ← x − η (∇F(x, D) + ξ)`, `ξ ~ N(0, s² ‖∇F‖² I)`.
///
/// The noise covariance vanishes with the gradient, so it dies out as the
/// iterate converges. `noise_scale = 0` gives plain gradient descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbedGd {
    pub learning_rate: f64,
    pub noise_scale: f64,
}

impl PerturbedGd {
    pub fn new(learning_rate: f64) -> Self {
        assert!(learning_rate >= 0.0, "learning rate must be nonnegative");
        Self {
            learning_rate,
            noise_scale: 0.0,
        }
    }

    pub fn with_noise(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    /// One step from a precomputed gradient.
    pub(crate) fn step_with(&self, x: &Parameter, grad: Array1<f64>, rng: &mut impl Rng) -> Result<Parameter> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(SolaError::NonFinite("non-finite gradient"));
        }
        let mut direction = grad;
        if self.noise_scale > 0.0 {
            let sd = self.noise_scale * direction.dot(&direction).sqrt();
            direction.mapv_inplace(|g| g + sd * rng.sample::<f64, _>(StandardNormal));
        }
        let next = x.values() - &(direction * self.learning_rate);
        Ok(Parameter::from(next))
    }
}

/// Full-batch perturbed gradient step on `d`.
pub fn gd_step(
    model: &PerturbedGd,
    x: &Parameter,
    d: &Dataset,
    problem: &dyn Problem,
    rng: &mut impl Rng,
) -> Result<Parameter> {
    if d.is_empty() {
        return Err(SolaError::EmptyDataset);
    }
    model.step_with(x, problem.gradient(x, d), rng)
}

/// Perturbed gradient step on a uniformly drawn mini-batch of `batch_size`
/// distinct samples. A full batch draws nothing and matches [`gd_step`].
pub fn sgd_step(
    model: &PerturbedGd,
    x: &Parameter,
    d: &Dataset,
    problem: &dyn Problem,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Parameter> {
    if batch_size == 0 || batch_size > d.len() {
        return Err(SolaError::BatchSize {
            batch: batch_size,
            available: d.len(),
        });
    }
    if batch_size == d.len() {
        return gd_step(model, x, d, problem, rng);
    }
    let batch = minibatch(d, batch_size, rng);
    model.step_with(x, problem.gradient(x, &batch), rng)
}

pub(crate) fn minibatch(d: &Dataset, size: usize, rng: &mut impl Rng) -> Dataset {
    let mut picks = index::sample(rng, d.len(), size).into_vec();
    picks.sort_unstable();
    d.subset(&picks)
}
