//! The fusion loop: select an agent, apply its local algorithm, weight the
//! proposal by relative performance, blend, record.

mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trace::{fmt_f64, RunTrace, TraceRecord, TRACE_HEADER};

use crate::domain::{AgentId, Dataset, Event, EventSchedule, Parameter, PerformanceMetric, Problem, DIVISION_GUARD};
use crate::error::{Result, SolaError};
use crate::local::LocalAlgorithm;
use crate::switching::{greedy_signal, periodic_signal, SelectingSignal};

/// Abort threshold on `‖x‖∞`.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// `α = p_new / (p_new + p_prev)`, or `0.5` when both are below the guard.
pub fn fusing_variable(p_new: f64, p_prev: f64) -> Result<f64> {
    if !(p_new >= 0.0) || !(p_prev >= 0.0) {
        return Err(SolaError::invalid(format!(
            "performance values must be nonnegative, got {p_new} and {p_prev}"
        )));
    }
    if p_new < DIVISION_GUARD && p_prev < DIVISION_GUARD {
        return Ok(0.5);
    }
    if p_new.is_infinite() {
        return Ok(if p_prev.is_infinite() { 0.5 } else { 1.0 });
    }
    if p_prev.is_infinite() {
        return Ok(0.0);
    }
    Ok((p_new / (p_new + p_prev)).clamp(0.0, 1.0))
}

/// How `α(k)` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Performance-weighted fusing variable.
    #[default]
    Weighted,
    /// `α ≡ 1`: each update is passed on unchanged.
    Naive,
    /// Constant `α`.
    Fixed(f64),
}

impl FusionMode {
    pub fn alpha(self, p_new: f64, p_prev: f64) -> Result<f64> {
        match self {
            FusionMode::Weighted => fusing_variable(p_new, p_prev),
            FusionMode::Naive => Ok(1.0),
            FusionMode::Fixed(a) if (0.0..=1.0).contains(&a) => Ok(a),
            FusionMode::Fixed(a) => Err(SolaError::invalid(format!("fixed α {a} outside [0, 1]"))),
        }
    }
}

/// `α(k)` together with the two performance values it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusingState {
    pub alpha: f64,
    pub p_new: f64,
    pub p_prev: f64,
}

/// The message from `σ(k−1)` to `σ(k)`: the parameter and its performance on
/// the sender's data.
#[derive(Clone, Debug, PartialEq)]
pub struct Handoff {
    pub x: Parameter,
    pub performance: f64,
}

impl Handoff {
    pub fn x(&self) -> &Parameter {
        &self.x
    }

    pub fn performance(&self) -> f64 {
        self.performance
    }
}

/// Packages `(x(k−1), P(x(k−1), D^{σ(k−1)}(k−1)))`.
pub fn handoff(prev: &Handoff) -> (Parameter, f64) {
    (prev.x.clone(), prev.performance)
}

/// Result of one fusion step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub x: Parameter,
    pub x_plus: Parameter,
    pub fusing: FusingState,
}

/// One event of the loop: `x(k⁺) = A(x(k−1), D)` and the blend.
pub fn sola_step(
    prev: &Handoff,
    algorithm: &mut LocalAlgorithm,
    data: &Dataset,
    metric: PerformanceMetric,
    mode: FusionMode,
    problem: &dyn Problem,
) -> Result<Step> {
    let (x_prev, p_prev) = handoff(prev);
    let x_plus = algorithm.apply(&x_prev, data, problem)?;
    let p_new = metric.evaluate(problem, &x_plus, data)?;
    let alpha = mode.alpha(p_new, p_prev)?;
    let x = x_prev.blend(&x_plus, alpha)?;
    Ok(Step {
        x,
        x_plus,
        fusing: FusingState { alpha, p_new, p_prev },
    })
}

/// An agent at the start of a run.
#[derive(Clone, Debug)]
pub struct Agent {
    pub algorithm: LocalAlgorithm,
    /// Data held before the first event (normally empty).
    pub data: Dataset,
}

impl Agent {
    pub fn new(algorithm: LocalAlgorithm) -> Self {
        Self {
            algorithm,
            data: Dataset::new(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.algorithm.agent()
    }
}

/// How `σ(k)` is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalPolicy {
    /// Whoever owns the event.
    Owner,
    /// Blocks of `period` own events per agent, cycling through `order`
    /// (ascending ids when absent).
    Periodic {
        period: usize,
        #[serde(default)]
        order: Option<Vec<AgentId>>,
    },
    /// Among simultaneous arrivals, the agent with the best last-known
    /// performance goes first.
    Greedy,
}

/// Everything a run needs.
#[derive(Clone)]
pub struct Scenario {
    pub problem: Arc<dyn Problem>,
    pub agents: Vec<Agent>,
    pub schedule: EventSchedule,
    pub policy: SignalPolicy,
    pub metric: PerformanceMetric,
    pub mode: FusionMode,
    /// Starting point; the problem's default when `None`.
    pub x0: Option<Parameter>,
    pub seed: u64,
    /// Keep `x(k)` and `x(k⁺)` in the trace.
    pub keep_params: bool,
}

impl Scenario {
    pub fn new(problem: Arc<dyn Problem>, agents: Vec<Agent>, schedule: EventSchedule) -> Self {
        Self {
            problem,
            agents,
            schedule,
            policy: SignalPolicy::Owner,
            metric: PerformanceMetric::default(),
            mode: FusionMode::default(),
            x0: None,
            seed: 0,
            keep_params: true,
        }
    }

    pub fn with_policy(mut self, policy: SignalPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_mode(mut self, mode: FusionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_metric(mut self, metric: PerformanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_x0(mut self, x0: Parameter) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn initial_parameter(&self) -> Parameter {
        self.x0.clone().unwrap_or_else(|| self.problem.initial_parameter(self.seed))
    }

    /// Every event's data pooled, in schedule order.
    pub fn pooled_data(&self) -> Result<Dataset> {
        let mut d = Dataset::new();
        for a in &self.agents {
            if !a.data.is_empty() {
                d.extend(&a.data.samples().collect::<Vec<_>>())?;
            }
        }
        for e in self.schedule.iter() {
            d.extend(&e.batch)?;
        }
        Ok(d)
    }
}

/// A finished run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// Events in the order they were processed.
    pub events: EventSchedule,
    pub signal: SelectingSignal,
}

/// A run that stopped early; `partial` holds everything up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: SolaError,
    pub partial: RunTrace,
}

impl From<RunFailure> for SolaError {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// What an observer sees after each event.
pub struct StepView<'a> {
    pub record: &'a TraceRecord,
    pub x: &'a Parameter,
    pub data: &'a Dataset,
}

pub fn run(scenario: &Scenario) -> std::result::Result<RunOutput, RunFailure> {
    run_observed(scenario, |_| Ok(()))
}

/// [`run`] with a callback after every event (test-set evaluation and the like).
pub fn run_observed(
    scenario: &Scenario,
    mut observe: impl FnMut(&StepView<'_>) -> Result<()>,
) -> std::result::Result<RunOutput, RunFailure> {
    let mut trace = RunTrace {
        seed: scenario.seed,
        ..RunTrace::default()
    };
    match drive(scenario, &mut trace, &mut observe) {
        Ok((events, signal)) => Ok(RunOutput { trace, events, signal }),
        Err(error) => Err(RunFailure { error, partial: trace }),
    }
}

fn realize(scenario: &Scenario) -> Result<(Vec<&Event>, Option<SelectingSignal>)> {
    let events: Vec<&Event> = scenario.schedule.iter().collect();
    match &scenario.policy {
        SignalPolicy::Owner => Ok((events, None)),
        SignalPolicy::Periodic { period, order } => {
            let order = order.clone().unwrap_or_else(|| scenario.schedule.agents());
            let sig = periodic_signal(&scenario.schedule, *period, &order)?;
            Ok((events, Some(sig)))
        }
        // order decided online
        SignalPolicy::Greedy => Ok((events, None)),
    }
}

fn drive(
    scenario: &Scenario,
    trace: &mut RunTrace,
    observe: &mut impl FnMut(&StepView<'_>) -> Result<()>,
) -> Result<(EventSchedule, SelectingSignal)> {
    let problem = scenario.problem.as_ref();
    let mut algorithms: BTreeMap<AgentId, LocalAlgorithm> = BTreeMap::new();
    let mut data: BTreeMap<AgentId, Dataset> = BTreeMap::new();
    for a in &scenario.agents {
        if algorithms.insert(a.id(), a.algorithm.clone().with_seed(scenario.seed)).is_some() {
            return Err(SolaError::invalid(format!("agent {} listed twice", a.id())));
        }
        data.insert(a.id(), a.data.clone());
    }
    for id in scenario.schedule.agents() {
        if !algorithms.contains_key(&id) {
            return Err(SolaError::UnknownAgent(id));
        }
    }

    let x0 = scenario.initial_parameter();
    x0.check_dim(problem.dim())?;
    let (events, planned) = realize(scenario)?;
    let first = events.first().ok_or(SolaError::NoEvents)?;
    let mut d0 = data[&first.agent].clone();
    d0.extend(&first.batch)?;
    let mut prev = Handoff {
        performance: scenario.metric.evaluate(problem, &x0, &d0)?,
        x: x0.clone(),
    };
    trace.x0 = Some(x0);

    let mut order: Vec<Event> = Vec::with_capacity(events.len());
    let mut forced_flags = Vec::with_capacity(events.len());
    let mut last_known: BTreeMap<AgentId, f64> = BTreeMap::new();
    let mut i = 0;
    while i < events.len() {
        // events sharing a wall time form a group the greedy policy may reorder
        let mut j = i + 1;
        while j < events.len() && events[j].time == events[i].time {
            j += 1;
        }
        let mut pending: Vec<&Event> = events[i..j].to_vec();
        while !pending.is_empty() {
            let pick = if scenario.policy == SignalPolicy::Greedy {
                let candidates: Vec<AgentId> = pending.iter().map(|e| e.agent).collect();
                let chosen = greedy_signal(&candidates, &last_known)?;
                pending.iter().position(|e| e.agent == chosen).unwrap_or(0)
            } else {
                0
            };
            let event = pending.remove(pick);
            let k = order.len() + 1;
            let forced = planned.as_ref().is_some_and(|s| s.forced()[event.k - 1]);
            let agent = event.agent;
            let d = data.get_mut(&agent).ok_or(SolaError::UnknownAgent(agent))?;
            d.extend(&event.batch)?;
            let alg = algorithms.get_mut(&agent).ok_or(SolaError::UnknownAgent(agent))?;
            alg.ingest(&event.batch)?;
            let step = sola_step(&prev, alg, d, scenario.metric, scenario.mode, problem).map_err(|e| match e {
                SolaError::NonFinite(reason) => SolaError::Diverged {
                    k,
                    reason: reason.to_string(),
                },
                other => other,
            })?;
            if !step.x.is_finite() || step.x.norm_inf() > DIVERGENCE_LIMIT {
                return Err(SolaError::Diverged {
                    k,
                    reason: format!("‖x‖∞ = {:e}", step.x.norm_inf()),
                });
            }
            let loss = problem.loss(&step.x, d);
            let performance = match scenario.metric.from_loss(loss) {
                Some(p) => p,
                None => scenario.metric.evaluate(problem, &step.x, d)?,
            };
            last_known.insert(agent, step.fusing.p_new);
            let record = TraceRecord {
                k,
                time: event.time,
                sigma: agent,
                alpha: step.fusing.alpha,
                loss,
                p_new: step.fusing.p_new,
                p_prev: step.fusing.p_prev,
                param_norm: step.x.norm(),
                step_norm: step.x.distance(&prev.x),
                proposal_norm: step.x_plus.distance(&prev.x),
                err_to_opt: None,
                forced,
                x: scenario.keep_params.then(|| step.x.clone()),
                x_plus: scenario.keep_params.then(|| step.x_plus.clone()),
            };
            observe(&StepView {
                record: &record,
                x: &step.x,
                data: d,
            })?;
            trace.records.push(record);
            prev = Handoff {
                x: step.x,
                performance,
            };
            order.push(event.clone());
            forced_flags.push(forced);
        }
        i = j;
    }
    let schedule = EventSchedule::from_ordered(order)?;
    let sigma = schedule.owners();
    let signal = SelectingSignal::for_schedule(&schedule, sigma, forced_flags)?;
    Ok((schedule, signal))
}
