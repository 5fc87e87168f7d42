use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rayon::prelude::*;

use crate::domain::{Dataset, Parameter, Problem};
use crate::rng::{stream, Component};

/// Rows per block when sweeping large datasets.
const CHUNK: usize = 256;

/// Layer widths of a one-hidden-layer classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpShape {
    pub const MNIST: MlpShape = MlpShape {
        input: 784,
        hidden: 128,
        output: 10,
    };

    /// Length of the flat parameter vector: `W1, b1, W2, b2` in that order.
    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
    }
}

/// Weights of `input → hidden (ReLU) → output (softmax)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpModel {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            w1: Array2::zeros((shape.hidden, shape.input)),
            b1: Array1::zeros(shape.hidden),
            w2: Array2::zeros((shape.output, shape.hidden)),
            b2: Array1::zeros(shape.output),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(shape: MlpShape, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(shape);
        let l1 = (6.0 / (shape.input + shape.hidden) as f64).sqrt();
        let l2 = (6.0 / (shape.hidden + shape.output) as f64).sqrt();
        m.w1.mapv_inplace(|_| rng.random_range(-l1..l1));
        m.w2.mapv_inplace(|_| rng.random_range(-l2..l2));
        m
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            input: self.w1.ncols(),
            hidden: self.w1.nrows(),
            output: self.w2.nrows(),
        }
    }

    pub fn flatten(&self) -> Parameter {
        let mut v = Vec::with_capacity(self.shape().param_count());
        v.extend(self.w1.iter());
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.extend(self.b2.iter());
        Parameter::from_vec(v)
    }

    pub fn unflatten(shape: MlpShape, x: &Parameter) -> Self {
        assert_eq!(x.dim(), shape.param_count(), "parameter length does not match the MLP shape");
        let v = x.as_slice();
        let (w1, rest) = v.split_at(shape.hidden * shape.input);
        let (b1, rest) = rest.split_at(shape.hidden);
        let (w2, b2) = rest.split_at(shape.output * shape.hidden);
        Self {
            w1: Array2::from_shape_vec((shape.hidden, shape.input), w1.to_vec()).unwrap(),
            b1: Array1::from(b1.to_vec()),
            w2: Array2::from_shape_vec((shape.output, shape.hidden), w2.to_vec()).unwrap(),
            b2: Array1::from(b2.to_vec()),
        }
    }

    fn hidden_pre(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.w1.t()) + &self.b1
    }

    fn logits(&self, hidden: &Array2<f64>) -> Array2<f64> {
        hidden.dot(&self.w2.t()) + &self.b2
    }

    /// Class probabilities for a single image.
    pub fn forward(&self, image: &[f64]) -> Array1<f64> {
        let x = ArrayView2::from_shape((1, image.len()), image).expect("one row");
        let h = self.hidden_pre(x).mapv(relu);
        let mut z = self.logits(&h);
        softmax_rows(&mut z);
        z.row(0).to_owned()
    }

    /// Class probabilities, one row per sample.
    pub fn predict(&self, d: &Dataset) -> Array2<f64> {
        let h = self.hidden_pre(d.features()).mapv(relu);
        let mut z = self.logits(&h);
        softmax_rows(&mut z);
        z
    }

    /// Fraction of samples whose most probable class (lowest index on ties)
    /// equals the label.
    pub fn accuracy(&self, d: &Dataset) -> f64 {
        if d.is_empty() {
            return 0.0;
        }
        let (_, correct) = self.sweep(d);
        correct as f64 / d.len() as f64
    }

    /// Mean cross-entropy.
    pub fn loss(&self, d: &Dataset) -> f64 {
        self.sweep(d).0 / d.len() as f64
    }

    /// Mean cross-entropy and its gradient by backpropagation, flattened.
    pub fn loss_and_gradient(&self, d: &Dataset) -> (f64, MlpModel) {
        let labels = d.labels();
        let feats = d.features();
        let parts: Vec<(f64, MlpModel)> = (0..d.len())
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(d.len());
                self.backprop(feats.slice(s![start..end, ..]), &labels[start..end])
            })
            .collect();
        let mut total = 0.0;
        let mut grad = MlpModel::zeros(self.shape());
        for (l, g) in parts {
            total += l;
            grad.add_assign(&g);
        }
        let m = d.len() as f64;
        grad.scale(1.0 / m);
        (total / m, grad)
    }

    /// Summed loss and correct-prediction count over all rows.
    fn sweep(&self, d: &Dataset) -> (f64, usize) {
        let labels = d.labels();
        let feats = d.features();
        let parts: Vec<(f64, usize)> = (0..d.len())
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(d.len());
                let x = feats.slice(s![start..end, ..]);
                let h = self.hidden_pre(x).mapv(relu);
                let z = self.logits(&h);
                let mut loss = 0.0;
                let mut correct = 0;
                for (row, &y) in z.axis_iter(Axis(0)).zip(&labels[start..end]) {
                    loss += log_sum_exp(row) - row[y as usize];
                    if argmax(row) == y as usize {
                        correct += 1;
                    }
                }
                (loss, correct)
            })
            .collect();
        parts
            .into_iter()
            .fold((0.0, 0), |(l, c), (pl, pc)| (l + pl, c + pc))
    }

    fn backprop(&self, x: ArrayView2<'_, f64>, labels: &[u8]) -> (f64, MlpModel) {
        let pre = self.hidden_pre(x);
        let h = pre.mapv(relu);
        let mut p = self.logits(&h);
        let mut loss = 0.0;
        for (row, &y) in p.axis_iter(Axis(0)).zip(labels) {
            loss += log_sum_exp(row) - row[y as usize];
        }
        softmax_rows(&mut p);
        // dL/dz = p − onehot(y)
        for (mut row, &y) in p.axis_iter_mut(Axis(0)).zip(labels) {
            row[y as usize] -= 1.0;
        }
        let dz = p;
        let w2 = dz.t().dot(&h);
        let b2 = dz.sum_axis(Axis(0));
        let mut dh = dz.dot(&self.w2);
        // ReLU subgradient is 0 at 0
        Zip::from(&mut dh).and(&pre).for_each(|g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = dh.t().dot(&x);
        let b1 = dh.sum_axis(Axis(0));
        (loss, MlpModel { w1, b1, w2, b2 })
    }

    fn add_assign(&mut self, other: &MlpModel) {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.b2 += &other.b2;
    }

    fn scale(&mut self, c: f64) {
        self.w1 *= c;
        self.b1 *= c;
        self.w2 *= c;
        self.b2 *= c;
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.fold(0.0, |s, &v| s + (v - max).exp()).ln()
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy classification with an [`MlpModel`] behind a flat parameter.
#[derive(Clone, Debug)]
pub struct MlpProblem {
    shape: MlpShape,
}

impl MlpProblem {
    pub fn new(shape: MlpShape) -> Self {
        Self { shape }
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn model(&self, x: &Parameter) -> MlpModel {
        MlpModel::unflatten(self.shape, x)
    }
}

impl Problem for MlpProblem {
    fn dim(&self) -> usize {
        self.shape.param_count()
    }

    fn loss(&self, x: &Parameter, d: &Dataset) -> f64 {
        self.model(x).loss(d)
    }

    fn gradient(&self, x: &Parameter, d: &Dataset) -> Array1<f64> {
        self.loss_and_gradient(x, d).1
    }

    fn loss_and_gradient(&self, x: &Parameter, d: &Dataset) -> (f64, Array1<f64>) {
        let (l, g) = self.model(x).loss_and_gradient(d);
        (l, g.flatten().into_inner())
    }

    /// Frobenius norm of `P − onehot(y)` over the dataset.
    fn error_norm(&self, x: &Parameter, d: &Dataset) -> f64 {
        let mut p = self.model(x).predict(d);
        for (mut row, y) in p.axis_iter_mut(Axis(0)).zip(d.labels()) {
            row[y as usize] -= 1.0;
        }
        p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn initial_parameter(&self, seed: u64) -> Parameter {
        let mut rng = stream(seed, Component::Init, 0);
        MlpModel::glorot(self.shape, &mut rng).flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Sample, Target};
    use crate::rng::seeded;

    const SMALL: MlpShape = MlpShape {
        input: 6,
        hidden: 4,
        output: 10,
    };

    fn random_data(n: usize, rng: &mut impl Rng) -> Dataset {
        let samples: Vec<Sample> = (0..n)
            .map(|i| {
                let f = (0..SMALL.input).map(|_| rng.random_range(0.0..1.0)).collect();
                Sample::new(f, Target::Class((i % 10) as u8))
            })
            .collect();
        Dataset::from_samples(&samples).unwrap()
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = seeded(1);
        let m = MlpModel::glorot(SMALL, &mut rng);
        let back = MlpModel::unflatten(SMALL, &m.flatten());
        assert_eq!(back, m);
        assert_eq!(m.flatten().dim(), SMALL.param_count());
        assert_eq!(MlpShape::MNIST.param_count(), 101_770);
    }

    #[test]
    fn forward_is_a_distribution() {
        let mut rng = seeded(2);
        let m = MlpModel::glorot(SMALL, &mut rng);
        let p = m.forward(&[0.3, 0.1, 0.9, 0.0, 0.5, 0.2]);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_output_gives_ln_ten() {
        let mut rng = seeded(3);
        let d = random_data(20, &mut rng);
        let m = MlpModel::zeros(SMALL);
        assert!((m.loss(&d) - 10f64.ln()).abs() < 1e-12);
        // constant predictor picks class 0 on ties: 2 of 20 balanced samples
        assert!((m.accuracy(&d) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn chunked_loss_matches_single_block() {
        let mut rng = seeded(4);
        let d = random_data(CHUNK * 2 + 17, &mut rng);
        let m = MlpModel::glorot(SMALL, &mut rng);
        let probs = m.predict(&d);
        let direct: f64 = probs
            .axis_iter(Axis(0))
            .zip(d.labels())
            .map(|(row, y)| -row[y as usize].ln())
            .sum::<f64>()
            / d.len() as f64;
        assert!((m.loss(&d) - direct).abs() < 1e-10);
        assert!((m.loss_and_gradient(&d).0 - direct).abs() < 1e-10);
    }
}
