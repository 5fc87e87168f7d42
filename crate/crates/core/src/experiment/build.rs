use std::sync::Arc;

use rand::Rng;

use super::config::{AgentConfig, AlgorithmKind, ExperimentConfig, ExperimentKind, MnistConfig};
use crate::domain::{merge_schedules, AgentId, AgentSchedule, Dataset, EventSchedule, Parameter, Problem, Sample, Target};
use crate::error::{Result, SolaError};
use crate::fusion::{Agent, Scenario};
use crate::local::{Dsgd, FedAvg, LocalAlgorithm, ShardRule};
use crate::models::{
    arrival_times, draw_x_star, gen_linreg_stream, load_idx, make_shards, IdxData, LinRegStream, LinearRegression,
    MlpProblem, MlpShape, MnistImages, Quadratic,
};
use crate::rng::{stream, Component};

/// A scenario ready to run plus what the experiment needs around it.
#[derive(Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    /// Held-out data for classification runs.
    pub test: Option<Dataset>,
    /// Parameter that generated synthetic data, when there is one.
    pub generator: Option<Parameter>,
}

fn algorithm(a: &AgentConfig, dim: usize, default_rule: ShardRule) -> LocalAlgorithm {
    let id = AgentId(a.id);
    let rule = a.shard_rule.unwrap_or(default_rule);
    match a.algorithm {
        AlgorithmKind::Gd => LocalAlgorithm::gd(id, a.learning_rate).with_noise(a.noise_scale),
        AlgorithmKind::Sgd => LocalAlgorithm::sgd(id, a.learning_rate, a.batch_size.unwrap_or(1)).with_noise(a.noise_scale),
        AlgorithmKind::Dsgd => LocalAlgorithm::dsgd(
            id,
            a.sub_units,
            dim,
            rule,
            Dsgd::new(a.learning_rate).with_local_batch(a.local_batch),
        ),
        AlgorithmKind::Fedavg => LocalAlgorithm::fedavg(
            id,
            a.sub_units,
            dim,
            rule,
            FedAvg::new(a.learning_rate, a.local_steps).with_local_batch(a.local_batch),
        ),
    }
}

fn truncate(per_agent: Vec<AgentSchedule>, events: usize) -> Result<EventSchedule> {
    let merged = merge_schedules(per_agent)?;
    EventSchedule::from_ordered(merged.events().iter().take(events).cloned().collect())
}

fn per_agent_events(cfg: &ExperimentConfig) -> usize {
    cfg.events.div_ceil(cfg.agents.len())
}

fn ids(cfg: &ExperimentConfig) -> Vec<AgentId> {
    cfg.agents.iter().map(|a| AgentId(a.id)).collect()
}

/// Turns a validated config into a runnable scenario.
pub fn build_scenario(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let prepared = match cfg.kind {
        ExperimentKind::Linreg => linreg(cfg)?,
        ExperimentKind::Custom => custom(cfg)?,
        ExperimentKind::Mnist => mnist(cfg)?,
    };
    let mut scenario = prepared.scenario;
    scenario.policy = cfg.signal.clone();
    scenario.metric = cfg.metric;
    scenario.mode = cfg.mode;
    scenario.seed = cfg.seed;
    Ok(Prepared { scenario, ..prepared })
}

fn linreg(cfg: &ExperimentConfig) -> Result<Prepared> {
    let l = cfg.linreg.clone().unwrap_or_default();
    let x_star = l.x_star.clone().unwrap_or_else(|| draw_x_star(l.dim, cfg.seed));
    let spec = LinRegStream {
        x_star: x_star.clone(),
        feature_variance: l.feature_variance,
        agents: cfg.agents.iter().map(|a| (AgentId(a.id), a.noise_variance)).collect(),
        arrival: l.arrival,
        seed: cfg.seed,
    };
    let schedule = truncate(gen_linreg_stream(&spec, per_agent_events(cfg), l.batch_size)?, cfg.events)?;
    let problem: Arc<dyn Problem> = Arc::new(LinearRegression::new(l.dim));
    let agents = cfg
        .agents
        .iter()
        .map(|a| Agent::new(algorithm(a, l.dim, ShardRule::RoundRobin)))
        .collect();
    Ok(Prepared {
        scenario: Scenario::new(problem, agents, schedule),
        test: None,
        generator: Some(Parameter::from_vec(x_star)),
    })
}

fn custom(cfg: &ExperimentConfig) -> Result<Prepared> {
    let c = cfg.custom.as_ref().ok_or_else(|| SolaError::Config("custom.diagonal required".into()))?;
    let n = c.diagonal.len();
    let q = Quadratic::diagonal(&c.diagonal).with_center(c.center.clone().unwrap_or_else(|| vec![0.0; n]));
    let dummy = || vec![Sample::new(vec![0.0], Target::Value(0.0))];
    let ids = ids(cfg);
    let times = arrival_times(c.arrival, &ids, per_agent_events(cfg), cfg.seed);
    let per_agent = ids
        .iter()
        .zip(times)
        .map(|(id, ts)| (*id, ts.into_iter().map(|t| (t, dummy())).collect()))
        .collect();
    let schedule = truncate(per_agent, cfg.events)?;
    let agents = cfg
        .agents
        .iter()
        .map(|a| Agent::new(algorithm(a, n, ShardRule::RoundRobin)))
        .collect();
    let mut scenario = Scenario::new(Arc::new(q), agents, schedule);
    scenario.x0 = c.x0.clone().map(Parameter::from_vec);
    Ok(Prepared {
        scenario,
        test: None,
        generator: None,
    })
}

fn images(path: &std::path::Path) -> Result<MnistImages> {
    match load_idx(path)? {
        IdxData::Images(i) => Ok(i),
        IdxData::Labels(_) => Err(SolaError::Config(format!("{} holds labels, not images", path.display()))),
    }
}

fn labels(path: &std::path::Path) -> Result<Vec<u8>> {
    match load_idx(path)? {
        IdxData::Labels(l) => Ok(l),
        IdxData::Images(_) => Err(SolaError::Config(format!("{} holds images, not labels", path.display()))),
    }
}

fn head(images: MnistImages, labels: Vec<u8>, n: Option<usize>) -> Result<(MnistImages, Vec<u8>)> {
    if images.count != labels.len() {
        return Err(SolaError::Config("image and label counts differ".into()));
    }
    let n = n.unwrap_or(images.count).min(images.count);
    let px = images.pixels_per_image();
    let mut pixels = images.pixels;
    pixels.truncate(n * px);
    let mut labels = labels;
    labels.truncate(n);
    Ok((
        MnistImages {
            count: n,
            pixels,
            ..images
        },
        labels,
    ))
}

fn to_dataset(images: &MnistImages, labels: &[u8]) -> Result<Dataset> {
    let samples: Vec<Sample> = (0..images.count)
        .map(|i| Sample::new(images.image(i).to_vec(), Target::Class(labels[i])))
        .collect();
    Dataset::from_samples(&samples)
}

fn mnist(cfg: &ExperimentConfig) -> Result<Prepared> {
    let m: &MnistConfig = cfg.mnist.as_ref().ok_or_else(|| SolaError::Config("mnist.images_path required".into()))?;
    let (train, train_labels) = head(images(&m.images_path)?, labels(&m.labels_path)?, m.train_subset)?;
    let (test, test_labels) = head(images(&m.test_images_path)?, labels(&m.test_labels_path)?, m.test_subset)?;
    if train.count == 0 {
        return Err(SolaError::Config("mnist training set is empty".into()));
    }
    let shape = MlpShape {
        input: train.pixels_per_image(),
        hidden: m.hidden,
        output: 10,
    };
    let dim = shape.param_count();
    let ids = ids(cfg);
    let per_agent = per_agent_events(cfg);
    let times = arrival_times(m.arrival, &ids, per_agent, cfg.seed);
    let mut schedules = Vec::with_capacity(ids.len());
    let mut agents = Vec::with_capacity(ids.len());
    for (a, ts) in cfg.agents.iter().zip(times) {
        let id = AgentId(a.id);
        let composite = matches!(a.algorithm, AlgorithmKind::Dsgd | AlgorithmKind::Fedavg);
        let mut rng = stream(cfg.seed, Component::Data, a.id as u64);
        let arrivals: Vec<(f64, Vec<Sample>)> = if composite {
            // each sub-unit owns a label-restricted, capped, noisy pool and
            // receives `subunit_batch` of its images per event, cycling
            let per = 10 / a.sub_units;
            let shards = make_shards(&train, &train_labels, a.sub_units, per, m.shard_cap, m.shard_noise_variance, &mut rng)?;
            let pools: Vec<Vec<Sample>> = shards.iter().map(|s| s.samples()).collect();
            if let Some(j) = pools.iter().position(Vec::is_empty) {
                return Err(SolaError::EmptyShard(j));
            }
            let mut cursors = vec![0usize; pools.len()];
            ts.into_iter()
                .map(|t| {
                    let mut batch = Vec::with_capacity(m.subunit_batch * pools.len());
                    for (pool, cur) in pools.iter().zip(cursors.iter_mut()) {
                        for _ in 0..m.subunit_batch {
                            batch.push(pool[*cur % pool.len()].clone());
                            *cur += 1;
                        }
                    }
                    (t, batch)
                })
                .collect()
        } else {
            ts.into_iter()
                .map(|t| {
                    let batch = (0..m.batch_size)
                        .map(|_| {
                            let i = rng.random_range(0..train.count);
                            Sample::new(train.image(i).to_vec(), Target::Class(train_labels[i]))
                        })
                        .collect();
                    (t, batch)
                })
                .collect()
        };
        schedules.push((id, arrivals));
        let rule = ShardRule::ByLabel {
            labels_per_unit: 10 / a.sub_units.max(1),
        };
        agents.push(Agent::new(algorithm(a, dim, rule)));
    }
    let schedule = truncate(schedules, cfg.events)?;
    let mut scenario = Scenario::new(Arc::new(MlpProblem::new(shape)), agents, schedule);
    scenario.keep_params = cfg.analysis.chain;
    Ok(Prepared {
        scenario,
        test: Some(to_dataset(&test, &test_labels)?),
        generator: None,
    })
}
