//! Local algorithms `A^i`: the update an agent applies to the shared
//! parameter with its own data, plus the Jacobian of that update for
//! contraction analysis.

mod gd;
mod subunits;

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;

pub use gd::{gd_step, sgd_step, PerturbedGd};
pub use subunits::{dsgd_round, fedavg_round, Dsgd, FedAvg, Mixing, ShardRule, SubUnitState};

use crate::domain::{AgentId, Dataset, Parameter, Problem, Sample};
use crate::error::{Result, SolaError};
use crate::rng::{stream, Component};

#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    Gd(PerturbedGd),
    Sgd { model: PerturbedGd, batch_size: usize },
    Dsgd { state: SubUnitState, config: Dsgd },
    FedAvg { state: SubUnitState, config: FedAvg },
}

/// One agent's optimizer together with its private randomness.
#[derive(Clone, Debug)]
pub struct LocalAlgorithm {
    agent: AgentId,
    variant: Variant,
    rng: ChaCha8Rng,
}

impl LocalAlgorithm {
    pub fn new(agent: AgentId, variant: Variant) -> Self {
        Self {
            agent,
            variant,
            rng: stream(0, Component::Batching, agent.0 as u64),
        }
    }

    pub fn gd(agent: AgentId, learning_rate: f64) -> Self {
        Self::new(agent, Variant::Gd(PerturbedGd::new(learning_rate)))
    }

    pub fn sgd(agent: AgentId, learning_rate: f64, batch_size: usize) -> Self {
        Self::new(
            agent,
            Variant::Sgd {
                model: PerturbedGd::new(learning_rate),
                batch_size,
            },
        )
    }

    pub fn dsgd(agent: AgentId, sub_units: usize, dim: usize, rule: ShardRule, config: Dsgd) -> Self {
        Self::new(
            agent,
            Variant::Dsgd {
                state: SubUnitState::new(sub_units, dim, rule),
                config,
            },
        )
    }

    pub fn fedavg(agent: AgentId, sub_units: usize, dim: usize, rule: ShardRule, config: FedAvg) -> Self {
        Self::new(
            agent,
            Variant::FedAvg {
                state: SubUnitState::new(sub_units, dim, rule),
                config,
            },
        )
    }

    /// Re-keys the batching/noise stream from an experiment's master seed.
    pub fn with_seed(mut self, master: u64) -> Self {
        self.rng = stream(master, Component::Batching, self.agent.0 as u64);
        self
    }

    /// Gradient-proportional noise scale (GD and SGD variants only).
    pub fn with_noise(mut self, scale: f64) -> Self {
        match &mut self.variant {
            Variant::Gd(m) | Variant::Sgd { model: m, .. } => m.noise_scale = scale,
            _ => {}
        }
        self
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn kind(&self) -> &'static str {
        match self.variant {
            Variant::Gd(_) => "gd",
            Variant::Sgd { .. } => "sgd",
            Variant::Dsgd { .. } => "dsgd",
            Variant::FedAvg { .. } => "fedavg",
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match &self.variant {
            Variant::Gd(m) | Variant::Sgd { model: m, .. } => m.learning_rate,
            Variant::Dsgd { config, .. } => config.learning_rate,
            Variant::FedAvg { config, .. } => config.learning_rate,
        }
    }

    pub fn sub_units(&self) -> Option<&SubUnitState> {
        match &self.variant {
            Variant::Dsgd { state, .. } | Variant::FedAvg { state, .. } => Some(state),
            _ => None,
        }
    }

    /// Hands newly arrived samples to the sub-units (no-op for single units).
    pub fn ingest(&mut self, batch: &[Sample]) -> Result<()> {
        match &mut self.variant {
            Variant::Dsgd { state, .. } | Variant::FedAvg { state, .. } => state.ingest(batch),
            _ => Ok(()),
        }
    }

    /// `x(k⁺) = A(x, D)`. SGD batches are clamped to the data available so far.
    pub fn apply(&mut self, x: &Parameter, d: &Dataset, problem: &dyn Problem) -> Result<Parameter> {
        if d.is_empty() {
            return Err(SolaError::EmptyDataset);
        }
        match &mut self.variant {
            Variant::Gd(model) => gd_step(model, x, d, problem, &mut self.rng),
            Variant::Sgd { model, batch_size } => {
                let b = (*batch_size).clamp(1, d.len());
                sgd_step(model, x, d, problem, b, &mut self.rng)
            }
            Variant::Dsgd { state, config } => {
                state.broadcast(x);
                let (next, avg) = dsgd_round(state, config, problem, &mut self.rng)?;
                *state = next;
                Ok(avg)
            }
            Variant::FedAvg { state, config } => {
                state.broadcast(x);
                let (next, global) = fedavg_round(state, config, problem, &mut self.rng)?;
                *state = next;
                Ok(global)
            }
        }
    }

    /// The update with all randomness removed: full batches, no noise,
    /// uniform averaging. This is the map whose Jacobian is analysed.
    pub fn mean_map(&self, x: &Parameter, d: &Dataset, problem: &dyn Problem) -> Result<Array1<f64>> {
        if d.is_empty() {
            return Err(SolaError::EmptyDataset);
        }
        let out = match &self.variant {
            Variant::Gd(m) | Variant::Sgd { model: m, .. } => {
                x.values() - &(problem.gradient(x, d) * m.learning_rate)
            }
            Variant::Dsgd { state, config } => {
                state.check_shards()?;
                let mut g = Array1::<f64>::zeros(x.dim());
                for shard in state.shards() {
                    g += &problem.gradient(x, shard);
                }
                x.values() - &(g * (config.learning_rate / state.len() as f64))
            }
            Variant::FedAvg { state, config } => {
                state.check_shards()?;
                let total: usize = state.shards().iter().map(Dataset::len).sum();
                let mut acc = Array1::<f64>::zeros(x.dim());
                for shard in state.shards() {
                    let mut y = x.values().clone();
                    for _ in 0..config.local_steps.max(1) {
                        let g = problem.gradient(&Parameter::from(y.clone()), shard);
                        y.scaled_add(-config.learning_rate, &g);
                    }
                    acc.scaled_add(shard.len() as f64 / total as f64, &y);
                }
                acc
            }
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(SolaError::NonFinite("non-finite update"))
        }
    }

    /// `∂A(x, D)/∂x` of [`mean_map`](Self::mean_map).
    ///
    /// Analytic (`I − η∇²F` and its sub-unit compositions) when the problem
    /// provides Hessians, otherwise central finite differences with step
    /// `h = 1e-5 (1 + ‖x‖∞)`.
    pub fn jacobian(&self, x: &Parameter, d: &Dataset, problem: &dyn Problem) -> Result<Array2<f64>> {
        if d.is_empty() {
            return Err(SolaError::EmptyDataset);
        }
        let j = match self.analytic_jacobian(x, d, problem)? {
            Some(j) => j,
            None => finite_difference_jacobian(|y| self.mean_map(y, d, problem), x)?,
        };
        if j.iter().all(|v| v.is_finite()) {
            Ok(j)
        } else {
            Err(SolaError::NonFinite("non-finite Jacobian"))
        }
    }

    /// Jacobian-vector product `J δ`, without forming `J` when no Hessian
    /// is available.
    pub fn jvp(&self, x: &Parameter, d: &Dataset, delta: &Array1<f64>, problem: &dyn Problem) -> Result<Array1<f64>> {
        if let Some(j) = self.analytic_jacobian(x, d, problem)? {
            return Ok(j.dot(delta));
        }
        let norm = delta.dot(delta).sqrt();
        if norm == 0.0 {
            return Ok(Array1::zeros(x.dim()));
        }
        let h = fd_step(x);
        let unit = delta / norm;
        let plus = Parameter::from(x.values() + &(&unit * h));
        let minus = Parameter::from(x.values() - &(&unit * h));
        let diff = self.mean_map(&plus, d, problem)? - self.mean_map(&minus, d, problem)?;
        Ok(diff * (norm / (2.0 * h)))
    }

    fn analytic_jacobian(&self, x: &Parameter, d: &Dataset, problem: &dyn Problem) -> Result<Option<Array2<f64>>> {
        let n = x.dim();
        let eye = Array2::<f64>::eye(n);
        Ok(match &self.variant {
            Variant::Gd(m) | Variant::Sgd { model: m, .. } => {
                problem.hessian(x, d).map(|h| &eye - &(h * m.learning_rate))
            }
            Variant::Dsgd { state, config } => {
                state.check_shards()?;
                let mut acc = Array2::<f64>::zeros((n, n));
                for shard in state.shards() {
                    match problem.hessian(x, shard) {
                        Some(h) => acc += &h,
                        None => return Ok(None),
                    }
                }
                Some(&eye - &(acc * (config.learning_rate / state.len() as f64)))
            }
            Variant::FedAvg { state, config } => {
                state.check_shards()?;
                let total: usize = state.shards().iter().map(Dataset::len).sum();
                let mut acc = Array2::<f64>::zeros((n, n));
                for shard in state.shards() {
                    let mut y = x.clone();
                    let mut jac = eye.clone();
                    for _ in 0..config.local_steps.max(1) {
                        let Some(h) = problem.hessian(&y, shard) else {
                            return Ok(None);
                        };
                        jac = (&eye - &(h * config.learning_rate)).dot(&jac);
                        let g = problem.gradient(&y, shard);
                        y = Parameter::from(y.values() - &(g * config.learning_rate));
                    }
                    acc.scaled_add(shard.len() as f64 / total as f64, &jac);
                }
                Some(acc)
            }
        })
    }
}

fn fd_step(x: &Parameter) -> f64 {
    1e-5 * (1.0 + x.norm_inf())
}

/// Central-difference Jacobian of `map` at `x`.
pub fn finite_difference_jacobian(
    map: impl Fn(&Parameter) -> Result<Array1<f64>>,
    x: &Parameter,
) -> Result<Array2<f64>> {
    let n = x.dim();
    let h = fd_step(x);
    let mut j = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut plus = x.clone();
        plus.values_mut()[i] += h;
        let mut minus = x.clone();
        minus.values_mut()[i] -= h;
        let col = (map(&plus)? - map(&minus)?) / (2.0 * h);
        j.column_mut(i).assign(&col);
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Target;
    use crate::models::{LinearRegression, Quadratic};
    use rand::Rng;

    fn dummy() -> Dataset {
        Dataset::from_samples(&[Sample::new(vec![0.0], Target::Value(0.0))]).unwrap()
    }

    fn regression(m: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::seeded(seed);
        let samples: Vec<Sample> = (0..m)
            .map(|_| {
                let f: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
                Sample::new(f, Target::Value(rng.random_range(-1.0..1.0)))
            })
            .collect();
        Dataset::from_samples(&samples).unwrap()
    }

    #[test]
    fn apply_dispatches_to_gd() {
        let q = Quadratic::diagonal(&[2.0, 4.0]);
        let mut alg = LocalAlgorithm::gd(AgentId(1), 0.1);
        let x = Parameter::from_vec(vec![1.0, 1.0]);
        let out = alg.apply(&x, &dummy(), &q).unwrap();
        let direct = gd_step(&PerturbedGd::new(0.1), &x, &dummy(), &q, &mut crate::rng::seeded(0)).unwrap();
        assert_eq!(out, direct);
    }

    #[test]
    fn apply_dispatches_to_dsgd() {
        let p = LinearRegression::new(2);
        let data = regression(10, 2, 1);
        let mut alg = LocalAlgorithm::dsgd(AgentId(2), 2, 2, ShardRule::RoundRobin, Dsgd::new(0.1));
        alg.ingest(&data.samples().collect::<Vec<_>>()).unwrap();
        let x = Parameter::from_vec(vec![0.5, 0.5]);
        let mut state = alg.sub_units().unwrap().clone();
        state.broadcast(&x);
        let (_, expected) = dsgd_round(&state, &Dsgd::new(0.1), &p, &mut crate::rng::seeded(0)).unwrap();
        let got = alg.apply(&x, &data, &p).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn apply_rejects_empty_data() {
        let q = Quadratic::isotropic(2, 1.0);
        let mut alg = LocalAlgorithm::gd(AgentId(1), 0.1);
        assert!(matches!(
            alg.apply(&Parameter::zeros(2), &Dataset::new(), &q),
            Err(SolaError::EmptyDataset)
        ));
    }

    #[test]
    fn jacobian_of_diagonal_quadratic() {
        let q = Quadratic::diagonal(&[2.0, 4.0]);
        let j = LocalAlgorithm::gd(AgentId(1), 0.1)
            .jacobian(&Parameter::zeros(2), &dummy(), &q)
            .unwrap();
        assert!((j[[0, 0]] - 0.8).abs() < 1e-15 && (j[[1, 1]] - 0.6).abs() < 1e-15);
        assert_eq!(j[[0, 1]], 0.0);
        let id = LocalAlgorithm::gd(AgentId(1), 0.0)
            .jacobian(&Parameter::zeros(2), &dummy(), &q)
            .unwrap();
        assert_eq!(id, Array2::<f64>::eye(2));
    }

    #[test]
    fn analytic_matches_finite_differences_for_every_variant() {
        let p = LinearRegression::new(3);
        let data = regression(20, 3, 7);
        let batch: Vec<Sample> = data.samples().collect();
        let x = Parameter::from_vec(vec![0.3, -0.1, 0.8]);
        let mut algs = vec![
            LocalAlgorithm::gd(AgentId(1), 0.1),
            LocalAlgorithm::sgd(AgentId(1), 0.1, 4),
            LocalAlgorithm::dsgd(AgentId(2), 4, 3, ShardRule::RoundRobin, Dsgd::new(0.1)),
            LocalAlgorithm::fedavg(AgentId(3), 3, 3, ShardRule::RoundRobin, FedAvg::new(0.1, 3)),
        ];
        for alg in &mut algs {
            alg.ingest(&batch).unwrap();
            let analytic = alg.jacobian(&x, &data, &p).unwrap();
            let fd = finite_difference_jacobian(|y| alg.mean_map(y, &data, &p), &x).unwrap();
            for (a, b) in analytic.iter().zip(fd.iter()) {
                assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", alg.kind());
            }
            let delta = Array1::from(vec![1.0, -2.0, 0.5]);
            let jv = alg.jvp(&x, &data, &delta, &p).unwrap();
            let expect = analytic.dot(&delta);
            for (a, b) in jv.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_for_every_variant() {
        // all shards identical and the stationary point shared: nothing moves
        let c = vec![0.25, -0.5];
        let q = Quadratic::isotropic(2, 1.0).with_center(c.clone());
        let x = Parameter::from_vec(c);
        let batch: Vec<Sample> = (0..6).map(|_| Sample::new(vec![0.0], Target::Value(0.0))).collect();
        let d = Dataset::from_samples(&batch).unwrap();
        let mut algs = vec![
            LocalAlgorithm::gd(AgentId(1), 0.2).with_noise(0.5),
            LocalAlgorithm::sgd(AgentId(1), 0.2, 2).with_noise(0.5),
            LocalAlgorithm::dsgd(AgentId(2), 3, 2, ShardRule::RoundRobin, Dsgd::new(0.2).with_local_batch(Some(1))),
            LocalAlgorithm::fedavg(AgentId(3), 3, 2, ShardRule::RoundRobin, FedAvg::new(0.2, 2)),
        ];
        for alg in &mut algs {
            alg.ingest(&batch).unwrap();
            assert_eq!(alg.apply(&x, &d, &q).unwrap(), x, "{}", alg.kind());
        }
    }
}
