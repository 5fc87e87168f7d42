use std::collections::BTreeMap;

use crate::domain::{AgentId, Dataset, Event, EventSchedule};
use crate::error::{Result, SolaError};
use crate::fusion::Scenario;
use crate::local::LocalAlgorithm;

/// Re-plays the data side of a run: after [`advance`](Replay::advance) returns
/// event `k`, every agent holds exactly the data (and sub-unit shards) it had
/// at `k`. Parameters are not re-simulated; they come from the trace.
#[derive(Clone, Debug)]
pub struct Replay {
    algorithms: BTreeMap<AgentId, LocalAlgorithm>,
    data: BTreeMap<AgentId, Dataset>,
    events: Vec<Event>,
    next: usize,
}

/// Agent state at one replayed event.
pub struct ReplayStep<'a> {
    pub k: usize,
    pub agent: AgentId,
    pub algorithm: &'a LocalAlgorithm,
    pub data: &'a Dataset,
}

impl Replay {
    /// `events` is the processed order from [`RunOutput`](crate::fusion::RunOutput).
    pub fn new(scenario: &Scenario, events: &EventSchedule) -> Self {
        let mut algorithms = BTreeMap::new();
        let mut data = BTreeMap::new();
        for a in &scenario.agents {
            algorithms.insert(a.id(), a.algorithm.clone());
            data.insert(a.id(), a.data.clone());
        }
        Self {
            algorithms,
            data,
            events: events.events().to_vec(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn advance(&mut self) -> Result<Option<ReplayStep<'_>>> {
        let Some(e) = self.events.get(self.next) else {
            return Ok(None);
        };
        self.next += 1;
        let alg = self.algorithms.get_mut(&e.agent).ok_or(SolaError::UnknownAgent(e.agent))?;
        alg.ingest(&e.batch)?;
        let d = self.data.get_mut(&e.agent).ok_or(SolaError::UnknownAgent(e.agent))?;
        d.extend(&e.batch)?;
        Ok(Some(ReplayStep {
            k: e.k,
            agent: e.agent,
            algorithm: &self.algorithms[&e.agent],
            data: &self.data[&e.agent],
        }))
    }

    /// Runs to the end and returns every agent's final algorithm and data.
    pub fn finish(mut self) -> Result<BTreeMap<AgentId, (LocalAlgorithm, Dataset)>> {
        while self.advance()?.is_some() {}
        let mut data = self.data;
        Ok(self
            .algorithms
            .into_iter()
            .map(|(id, alg)| {
                let d = data.remove(&id).unwrap_or_default();
                (id, (alg, d))
            })
            .collect())
    }
}
