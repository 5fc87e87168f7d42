use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{AgentId, AgentSchedule, Dataset, Parameter, Problem, Sample, Target};
use crate::error::{Result, SolaError};
use crate::rng::{stream, Component};

const RIDGE: f64 = 1e-9;

/// Mean squared error `F(x, D) = (1/m) Σ (a − xᵀb)²` of a scalar linear model.
#[derive(Clone, Debug)]
pub struct LinearRegression {
    dim: usize,
    convexity: Option<f64>,
}

impl LinearRegression {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            convexity: None,
        }
    }

    pub fn with_convexity(mut self, ell: f64) -> Self {
        self.convexity = Some(ell);
        self
    }

    fn residuals(&self, x: &Parameter, d: &Dataset) -> Array1<f64> {
        let a = Array1::from(d.values());
        a - d.features().dot(x.values())
    }

    /// Smallest eigenvalue of the Hessian `(2/m) BBᵀ` on `d`.
    pub fn min_curvature(&self, d: &Dataset) -> f64 {
        let h = self.hessian(&Parameter::zeros(self.dim), d).expect("closed form");
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| h[[i, j]]);
        m.symmetric_eigenvalues().min()
    }
}

impl Problem for LinearRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, x: &Parameter, d: &Dataset) -> f64 {
        let r = self.residuals(x, d);
        r.dot(&r) / d.len() as f64
    }

    fn gradient(&self, x: &Parameter, d: &Dataset) -> Array1<f64> {
        let r = self.residuals(x, d);
        d.features().t().dot(&r) * (-2.0 / d.len() as f64)
    }

    fn loss_and_gradient(&self, x: &Parameter, d: &Dataset) -> (f64, Array1<f64>) {
        let r = self.residuals(x, d);
        let m = d.len() as f64;
        (r.dot(&r) / m, d.features().t().dot(&r) * (-2.0 / m))
    }

    fn hessian(&self, _x: &Parameter, d: &Dataset) -> Option<Array2<f64>> {
        let b = d.features();
        Some(b.t().dot(&b) * (2.0 / d.len() as f64))
    }

    fn error_norm(&self, x: &Parameter, d: &Dataset) -> f64 {
        let r = self.residuals(x, d);
        r.dot(&r).sqrt()
    }

    fn convexity(&self) -> Option<f64> {
        self.convexity
    }

    /// Least squares through the normal equations `BᵀB x = Bᵀa`. A tiny ridge
    /// is added (and reported) when `BᵀB` is numerically singular.
    fn exact_minimizer(&self, d: &Dataset) -> Option<Result<(Parameter, bool)>> {
        if d.is_empty() {
            return Some(Err(SolaError::EmptyDataset));
        }
        let p = self.dim;
        let b = d.features();
        let gram = b.t().dot(&b);
        let rhs = b.t().dot(&Array1::from(d.values()));
        let mut g = DMatrix::from_fn(p, p, |i, j| gram[[i, j]]);
        let v = DVector::from_iterator(p, rhs.iter().copied());
        let ev = g.clone().symmetric_eigenvalues();
        let scale = ev.max().abs().max(1.0);
        let ridged = ev.min() <= 1e-12 * scale;
        if ridged {
            g += DMatrix::identity(p, p) * RIDGE * scale;
        }
        let solved = g
            .cholesky()
            .map(|c| c.solve(&v))
            .ok_or_else(|| SolaError::invalid("normal equations are not positive definite"));
        Some(solved.map(|x| (Parameter::from_vec(x.iter().copied().collect()), ridged)))
    }
}

/// How arrival times are laid out across agents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arrival {
    /// Agents take turns collecting `block` consecutive rounds of data.
    Blocked { block: usize },
    /// Round robin: one arrival per agent per round, never simultaneous.
    Interleaved,
    /// Independent Poisson clocks with unit rate per agent.
    Jittered,
}

impl Arrival {
    /// Wall time of the `j`-th (0-based) arrival of the `a`-th of `agents` agents.
    fn time(self, a: usize, agents: usize, j: usize, rng: &mut impl Rng, last: f64) -> f64 {
        match self {
            Arrival::Blocked { block } => {
                let block = block.max(1);
                let global_block = (j / block) * agents + a;
                (global_block * block + j % block + 1) as f64
            }
            Arrival::Interleaved => (j * agents + a + 1) as f64,
            Arrival::Jittered => {
                let gap: f64 = Exp::new(1.0).expect("unit rate").sample(rng);
                last + gap
            }
        }
    }
}

/// Synthetic online regression streams `A = x*ᵀB + ζ`.
#[derive(Clone, Debug)]
pub struct LinRegStream {
    pub x_star: Vec<f64>,
    /// Variance of every feature entry, `B ~ N(0, v I)`.
    pub feature_variance: f64,
    /// `(agent, noise variance)`; `ζ^i ~ N(0, v^i I)`.
    pub agents: Vec<(AgentId, f64)>,
    pub arrival: Arrival,
    pub seed: u64,
}

/// Draws `x* ~ N(0, I)`.
pub fn draw_x_star(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Component::Init, 0xfeed);
    (0..dim).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}

/// Wall times of `per_agent` arrivals for each of `agents` agents.
pub fn arrival_times(arrival: Arrival, agents: &[AgentId], per_agent: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = agents.len();
    agents
        .iter()
        .enumerate()
        .map(|(a, id)| {
            let mut clock_rng = stream(seed, Component::Signal, id.0 as u64);
            let mut last = 0.0;
            (0..per_agent)
                .map(|j| {
                    last = arrival.time(a, m, j, &mut clock_rng, last);
                    last
                })
                .collect()
        })
        .collect()
}

/// Per-agent arrival lists: `events_per_agent` arrivals of `batch_size`
/// samples each. Each agent's draws come from its own stream.
pub fn gen_linreg_stream(
    spec: &LinRegStream,
    events_per_agent: usize,
    batch_size: usize,
) -> Result<Vec<AgentSchedule>> {
    if batch_size == 0 {
        return Err(SolaError::invalid("batch_size must be at least 1"));
    }
    if spec.feature_variance < 0.0 || spec.agents.iter().any(|&(_, v)| v < 0.0) {
        return Err(SolaError::invalid("variances must be nonnegative"));
    }
    let features = Normal::new(0.0, spec.feature_variance.sqrt())
        .map_err(|e| SolaError::invalid(e.to_string()))?;
    let x_star = Array1::from(spec.x_star.clone());
    let ids: Vec<AgentId> = spec.agents.iter().map(|a| a.0).collect();
    let times = arrival_times(spec.arrival, &ids, events_per_agent, spec.seed);
    let mut out = Vec::with_capacity(ids.len());
    for (&(agent, noise_variance), times) in spec.agents.iter().zip(times) {
        let noise = Normal::new(0.0, noise_variance.sqrt())
            .map_err(|e| SolaError::invalid(e.to_string()))?;
        let mut data_rng = stream(spec.seed, Component::Data, agent.0 as u64);
        let mut arrivals = Vec::with_capacity(events_per_agent);
        for t in times {
            let b = Array2::from_shape_fn((batch_size, x_star.len()), |_| {
                features.sample(&mut data_rng)
            });
            let clean = b.dot(&x_star);
            let batch = b
                .axis_iter(Axis(0))
                .zip(clean.iter())
                .map(|(row, &c)| {
                    let zeta = noise.sample(&mut data_rng);
                    Sample::new(row.to_vec(), Target::Value(c + zeta))
                })
                .collect();
            arrivals.push((t, batch));
        }
        out.push((agent, arrivals));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::merge_schedules;

    fn single(a: f64, b: [f64; 3]) -> Dataset {
        Dataset::from_samples(&[Sample::new(b.to_vec(), Target::Value(a))]).unwrap()
    }

    #[test]
    fn hand_computed_loss_and_gradient() {
        let p = LinearRegression::new(3);
        let d = single(2.0, [1.0, 0.0, 0.0]);
        let x = Parameter::zeros(3);
        assert_eq!(p.loss(&x, &d), 4.0);
        assert_eq!(p.gradient(&x, &d).to_vec(), vec![-4.0, 0.0, 0.0]);
    }

    fn stream_spec(noise: f64, seed: u64) -> LinRegStream {
        LinRegStream {
            x_star: vec![1.0, -2.0, 0.5],
            feature_variance: 0.5,
            agents: vec![(AgentId(1), noise)],
            arrival: Arrival::Interleaved,
            seed,
        }
    }

    #[test]
    fn noiseless_samples_are_exact() {
        let s = gen_linreg_stream(&stream_spec(0.0, 3), 4, 5).unwrap();
        let p = LinearRegression::new(3);
        let x = Parameter::from_vec(vec![1.0, -2.0, 0.5]);
        for (_, batch) in &s[0].1 {
            let d = Dataset::from_samples(batch).unwrap();
            assert!(p.loss(&x, &d) < 1e-28);
            assert!(p.gradient(&x, &d).iter().all(|g| g.abs() < 1e-14));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = gen_linreg_stream(&stream_spec(3.0, 11), 5, 3).unwrap();
        let b = gen_linreg_stream(&stream_spec(3.0, 11), 5, 3).unwrap();
        let c = gen_linreg_stream(&stream_spec(3.0, 12), 5, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_variance_matches() {
        // x* = 0 so every target is pure noise
        let spec = LinRegStream {
            x_star: vec![0.0; 3],
            feature_variance: 0.5,
            agents: vec![(AgentId(2), 30.0)],
            arrival: Arrival::Interleaved,
            seed: 5,
        };
        let s = gen_linreg_stream(&spec, 1000, 100).unwrap();
        let zs: Vec<f64> = s[0]
            .1
            .iter()
            .flat_map(|(_, b)| b.iter().map(|s| s.target.value().unwrap()))
            .collect();
        assert_eq!(zs.len(), 100_000);
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
        assert!((29.0..=31.0).contains(&var), "variance {var}");
    }

    #[test]
    fn blocked_arrivals_alternate_in_blocks() {
        let spec = LinRegStream {
            agents: vec![(AgentId(1), 1.0), (AgentId(2), 1.0)],
            arrival: Arrival::Blocked { block: 3 },
            ..stream_spec(1.0, 0)
        };
        let s = merge_schedules(gen_linreg_stream(&spec, 6, 1).unwrap()).unwrap();
        let owners: Vec<usize> = s.iter().map(|e| e.agent.0).collect();
        assert_eq!(owners, vec![1, 1, 1, 2, 2, 2, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn hessian_positive_definite_on_generated_data() {
        let p = LinearRegression::new(3);
        for seed in 0..20 {
            let s = gen_linreg_stream(&stream_spec(3.0, seed), 1, 3).unwrap();
            let d = Dataset::from_samples(&s[0].1[0].1).unwrap();
            assert!(p.min_curvature(&d) > 0.0);
        }
    }

    #[test]
    fn exact_minimizer_recovers_noiseless_parameter() {
        let s = gen_linreg_stream(&stream_spec(0.0, 9), 10, 5).unwrap();
        let d = Dataset::from_samples(
            &s[0].1.iter().flat_map(|(_, b)| b.clone()).collect::<Vec<_>>(),
        )
        .unwrap();
        let (x, ridged) = LinearRegression::new(3).exact_minimizer(&d).unwrap().unwrap();
        assert!(!ridged);
        for (a, b) in x.as_slice().iter().zip([1.0, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_sample_one_dimension() {
        let d = Dataset::from_samples(&[Sample::new(vec![1.0], Target::Value(2.0))]).unwrap();
        let (x, _) = LinearRegression::new(1).exact_minimizer(&d).unwrap().unwrap();
        assert!((x.as_slice()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gets_ridge() {
        // two identical rows in R^3: BᵀB has rank one
        let s = Sample::new(vec![1.0, 1.0, 0.0], Target::Value(1.0));
        let d = Dataset::from_samples(&[s.clone(), s]).unwrap();
        let (x, ridged) = LinearRegression::new(3).exact_minimizer(&d).unwrap().unwrap();
        assert!(ridged);
        assert!(x.is_finite());
    }
}
