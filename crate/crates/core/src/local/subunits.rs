use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gd::minibatch;
use crate::domain::{Dataset, Parameter, Problem, Sample, Target};
use crate::error::{Result, SolaError};

/// How an agent's incoming samples are distributed over its sub-units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShardRule {
    RoundRobin,
    /// Class `c` goes to sub-unit `c / labels_per_unit`.
    ByLabel { labels_per_unit: usize },
}

/// Parameters and data shards of the sub-units making up one composite agent.
#[derive(Clone, Debug, PartialEq)]
pub struct SubUnitState {
    params: Vec<Parameter>,
    shards: Vec<Dataset>,
    rule: ShardRule,
    cursor: usize,
}

impl SubUnitState {
    pub fn new(count: usize, dim: usize, rule: ShardRule) -> Self {
        assert!(count > 0, "an agent needs at least one sub-unit");
        Self {
            params: vec![Parameter::zeros(dim); count],
            shards: vec![Dataset::new(); count],
            rule,
            cursor: 0,
        }
    }

    /// Explicit parameters and shards, mostly for tests and hand-built setups.
    pub fn from_parts(params: Vec<Parameter>, shards: Vec<Dataset>) -> Result<Self> {
        if params.is_empty() || params.len() != shards.len() {
            return Err(SolaError::invalid("need one shard per sub-unit"));
        }
        let dim = params[0].dim();
        if let Some(p) = params.iter().find(|p| p.dim() != dim) {
            return Err(SolaError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self {
            params,
            shards,
            rule: ShardRule::RoundRobin,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn shards(&self) -> &[Dataset] {
        &self.shards
    }

    pub fn rule(&self) -> ShardRule {
        self.rule
    }

    /// Routes newly arrived samples to their sub-units.
    pub fn ingest(&mut self, batch: &[Sample]) -> Result<()> {
        let n = self.len();
        let mut routed: Vec<Vec<Sample>> = vec![Vec::new(); n];
        for s in batch {
            let unit = match self.rule {
                ShardRule::RoundRobin => {
                    let u = self.cursor % n;
                    self.cursor += 1;
                    u
                }
                ShardRule::ByLabel { labels_per_unit } => {
                    let Target::Class(c) = s.target else {
                        return Err(SolaError::invalid("label sharding needs class targets"));
                    };
                    let u = usize::from(c) / labels_per_unit.max(1);
                    if u >= n {
                        return Err(SolaError::invalid(format!("label {c} has no sub-unit")));
                    }
                    u
                }
            };
            routed[unit].push(s.clone());
        }
        for (shard, samples) in self.shards.iter_mut().zip(routed) {
            if !samples.is_empty() {
                shard.extend(&samples)?;
            }
        }
        Ok(())
    }

    /// Sets every sub-unit to `x`.
    pub fn broadcast(&mut self, x: &Parameter) {
        for p in &mut self.params {
            p.clone_from(x);
        }
    }

    /// Uniform average of the sub-unit parameters.
    pub fn average(&self) -> Parameter {
        let mut acc = Array1::<f64>::zeros(self.params[0].dim());
        for p in &self.params {
            acc += p.values();
        }
        Parameter::from(acc / self.len() as f64)
    }

    pub(crate) fn check_shards(&self) -> Result<()> {
        match self.shards.iter().position(Dataset::is_empty) {
            Some(j) => Err(SolaError::EmptyShard(j)),
            None => Ok(()),
        }
    }

    /// One independent generator per sub-unit, drawn in order from `rng`.
    fn unit_rngs(&self, rng: &mut impl Rng) -> Vec<ChaCha8Rng> {
        (0..self.len())
            .map(|_| ChaCha8Rng::seed_from_u64(rng.random()))
            .collect()
    }
}

/// Gossip weights applied after every round of local steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Mixing {
    /// Complete graph: every sub-unit takes the uniform average.
    #[default]
    Uniform,
    /// Doubly stochastic `W`; sub-unit `i` becomes `Σ_j W_ij x_j`.
    Weights(Array2<f64>),
}

impl Mixing {
    pub fn weights(w: Array2<f64>) -> Result<Self> {
        let n = w.nrows();
        let stochastic = |sums: Array1<f64>| sums.iter().all(|s| (s - 1.0).abs() < 1e-9);
        if w.ncols() != n
            || w.iter().any(|&v| v < 0.0)
            || !stochastic(w.sum_axis(ndarray::Axis(0)))
            || !stochastic(w.sum_axis(ndarray::Axis(1)))
        {
            return Err(SolaError::invalid("mixing matrix must be square and doubly stochastic"));
        }
        Ok(Mixing::Weights(w))
    }
}

/// Decentralized SGD: one local (minibatch) SGD step per sub-unit, then mixing.
#[derive(Clone, Debug, PartialEq)]
pub struct Dsgd {
    pub learning_rate: f64,
    /// Per-sub-unit minibatch size; `None` uses the whole shard.
    pub local_batch: Option<usize>,
    pub mixing: Mixing,
}

impl Dsgd {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            local_batch: None,
            mixing: Mixing::Uniform,
        }
    }

    pub fn with_local_batch(mut self, batch: Option<usize>) -> Self {
        self.local_batch = batch;
        self
    }
}

/// FedAvg: `local_steps` gradient steps per sub-unit from the global
/// parameter, then a shard-size-weighted average.
#[derive(Clone, Debug, PartialEq)]
pub struct FedAvg {
    pub learning_rate: f64,
    pub local_steps: usize,
    /// Per-sub-unit minibatch size; `None` uses the whole shard.
    pub local_batch: Option<usize>,
}

impl FedAvg {
    pub fn new(learning_rate: f64, local_steps: usize) -> Self {
        Self {
            learning_rate,
            local_steps,
            local_batch: None,
        }
    }

    pub fn with_local_batch(mut self, batch: Option<usize>) -> Self {
        self.local_batch = batch;
        self
    }
}

fn local_gradient(
    problem: &dyn Problem,
    x: &Parameter,
    shard: &Dataset,
    batch: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    match batch {
        Some(b) if b < shard.len() => problem.gradient(x, &minibatch(shard, b.max(1), rng)),
        _ => problem.gradient(x, shard),
    }
}

fn descend(x: &Parameter, grad: &Array1<f64>, eta: f64) -> Result<Parameter> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(SolaError::NonFinite("non-finite gradient"));
    }
    Ok(Parameter::from(x.values() - &(grad * eta)))
}

/// One decentralized SGD round. Returns the new state and the uniform
/// average of the mixed sub-unit parameters.
pub fn dsgd_round(
    state: &SubUnitState,
    config: &Dsgd,
    problem: &dyn Problem,
    rng: &mut impl Rng,
) -> Result<(SubUnitState, Parameter)> {
    state.check_shards()?;
    let rngs = state.unit_rngs(rng);
    let local: Vec<Parameter> = state
        .params
        .par_iter()
        .zip(state.shards.par_iter())
        .zip(rngs)
        .map(|((x, shard), mut r)| {
            let g = local_gradient(problem, x, shard, config.local_batch, &mut r);
            descend(x, &g, config.learning_rate)
        })
        .collect::<Result<_>>()?;
    let mut next = state.clone();
    match &config.mixing {
        Mixing::Uniform => {
            next.params = local;
            let avg = next.average();
            next.broadcast(&avg);
        }
        Mixing::Weights(w) => {
            if w.nrows() != state.len() {
                return Err(SolaError::invalid("mixing matrix size differs from sub-unit count"));
            }
            next.params = (0..state.len())
                .map(|i| {
                    let mut acc = Array1::<f64>::zeros(local[0].dim());
                    for (j, p) in local.iter().enumerate() {
                        acc.scaled_add(w[[i, j]], p.values());
                    }
                    Parameter::from(acc)
                })
                .collect();
        }
    }
    let avg = next.average();
    Ok((next, avg))
}

/// One FedAvg round from the current global parameter (the sub-unit average).
pub fn fedavg_round(
    state: &SubUnitState,
    config: &FedAvg,
    problem: &dyn Problem,
    rng: &mut impl Rng,
) -> Result<(SubUnitState, Parameter)> {
    if config.local_steps == 0 {
        return Err(SolaError::invalid("FedAvg needs at least one local step"));
    }
    state.check_shards()?;
    let global = state.average();
    let rngs = state.unit_rngs(rng);
    let local: Vec<Parameter> = state
        .shards
        .par_iter()
        .zip(rngs)
        .map(|(shard, mut r)| {
            let mut x = global.clone();
            for _ in 0..config.local_steps {
                let g = local_gradient(problem, &x, shard, config.local_batch, &mut r);
                x = descend(&x, &g, config.learning_rate)?;
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let total: usize = state.shards.iter().map(Dataset::len).sum();
    let mut acc = Array1::<f64>::zeros(global.dim());
    for (x, shard) in local.iter().zip(&state.shards) {
        acc.scaled_add(shard.len() as f64 / total as f64, x.values());
    }
    let new_global = Parameter::from(acc);
    let mut next = state.clone();
    next.broadcast(&new_global);
    Ok((next, new_global))
}
