use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::domain::{Dataset, Parameter, Problem};
use crate::error::Result;

/// `F(x) = ½ (x − c)ᵀ Q (x − c)`, independent of the data.
///
/// Handy for contraction checks: every local algorithm built on it has a
/// constant, analytically known Jacobian.
#[derive(Clone, Debug)]
pub struct Quadratic {
    q: Array2<f64>,
    center: Array1<f64>,
}

impl Quadratic {
    pub fn new(q: Array2<f64>, center: Array1<f64>) -> Self {
        assert_eq!(q.nrows(), q.ncols(), "Q must be square");
        assert_eq!(q.nrows(), center.len(), "center has the wrong dimension");
        Self { q, center }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::new(Array2::from_diag(&Array1::from(diag.to_vec())), Array1::zeros(diag.len()))
    }

    /// `Q = scale · I`, centred at the origin.
    pub fn isotropic(dim: usize, scale: f64) -> Self {
        Self::new(Array2::eye(dim) * scale, Array1::zeros(dim))
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), self.center.len());
        self.center = Array1::from(center);
        self
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    /// Smallest and largest eigenvalue of `Q`.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let n = self.q.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self.q[[i, j]] + self.q[[j, i]]));
        let ev = m.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }
}

impl Problem for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn loss(&self, x: &Parameter, _d: &Dataset) -> f64 {
        let e = x.values() - &self.center;
        0.5 * e.dot(&self.q.dot(&e))
    }

    fn gradient(&self, x: &Parameter, _d: &Dataset) -> Array1<f64> {
        self.q.dot(&(x.values() - &self.center))
    }

    fn hessian(&self, _x: &Parameter, _d: &Dataset) -> Option<Array2<f64>> {
        Some(self.q.clone())
    }

    fn error_norm(&self, x: &Parameter, _d: &Dataset) -> f64 {
        x.distance(&Parameter::from(self.center.clone()))
    }

    fn convexity(&self) -> Option<f64> {
        Some(self.spectrum_bounds().0)
    }

    fn exact_minimizer(&self, _d: &Dataset) -> Option<Result<(Parameter, bool)>> {
        Some(Ok((Parameter::from(self.center.clone()), false)))
    }
}
