use ndarray::ArrayView2;

use crate::error::{Result, SolaError};

/// Regression value or class label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Value(f64),
    Class(u8),
}

impl Target {
    pub fn value(self) -> Option<f64> {
        match self {
            Target::Value(v) => Some(v),
            Target::Class(_) => None,
        }
    }

    pub fn class(self) -> Option<u8> {
        match self {
            Target::Class(c) => Some(c),
            Target::Value(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: Target,
}

impl Sample {
    pub fn new(features: Vec<f64>, target: Target) -> Self {
        Self { features, target }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Append-only collection of samples held by one agent (or one sub-unit).
///
/// Features are stored row-major so that losses can work on the whole
/// `m × p` matrix without copying.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    dim: Option<usize>,
    features: Vec<f64>,
    targets: Vec<Target>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let mut d = Self::new();
        if !samples.is_empty() {
            d.extend(samples)?;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Feature dimension `p`, fixed by the first appended sample.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Appends `batch`. Either all samples are appended or none are.
    pub fn extend(&mut self, batch: &[Sample]) -> Result<()> {
        if batch.is_empty() {
            return Err(SolaError::EmptyBatch);
        }
        let p = self.dim.unwrap_or(batch[0].dim());
        if let Some(bad) = batch.iter().find(|s| s.dim() != p) {
            return Err(SolaError::DimensionMismatch {
                expected: p,
                found: bad.dim(),
            });
        }
        self.dim = Some(p);
        self.features.reserve(batch.len() * p);
        for s in batch {
            self.features.extend_from_slice(&s.features);
            self.targets.push(s.target);
        }
        Ok(())
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        self.extend(std::slice::from_ref(&sample))
    }

    /// The `m × p` feature matrix.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        let p = self.dim.unwrap_or(0);
        ArrayView2::from_shape((self.len(), p), &self.features)
            .expect("feature buffer matches m × p")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.dim.unwrap_or(0);
        &self.features[i * p..(i + 1) * p]
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample::new(self.row(i).to_vec(), self.targets[i])
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Regression targets; class targets read as their label value.
    pub fn values(&self) -> Vec<f64> {
        self.targets
            .iter()
            .map(|t| match *t {
                Target::Value(v) => v,
                Target::Class(c) => f64::from(c),
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.targets
            .iter()
            .map(|t| match *t {
                Target::Class(c) => c,
                Target::Value(v) => v as u8,
            })
            .collect()
    }

    /// New dataset with the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let p = self.dim.unwrap_or(0);
        let mut features = Vec::with_capacity(indices.len() * p);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            dim: self.dim,
            features,
            targets,
        }
    }

    /// Concatenation of several datasets (e.g. pooling every agent's data).
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut out = Dataset::new();
        for part in parts {
            if part.is_empty() {
                continue;
            }
            if let (Some(a), Some(b)) = (out.dim, part.dim) {
                if a != b {
                    return Err(SolaError::DimensionMismatch {
                        expected: a,
                        found: b,
                    });
                }
            }
            out.dim = part.dim;
            out.features.extend_from_slice(&part.features);
            out.targets.extend_from_slice(&part.targets);
        }
        Ok(out)
    }
}

/// Returns `dataset` with `batch` appended; earlier samples are untouched.
pub fn accumulate(mut dataset: Dataset, batch: &[Sample]) -> Result<Dataset> {
    dataset.extend(batch)?;
    Ok(dataset)
}
