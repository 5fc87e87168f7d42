use std::fmt;

use serde::{Deserialize, Serialize};

use super::data::Sample;
use crate::error::{Result, SolaError};

/// 1-based agent identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One agent's arrivals: `(wall time, batch)` pairs in time order.
pub type AgentSchedule = (AgentId, Vec<(f64, Vec<Sample>)>);

/// A single arrival: at event index `k` (1-based) agent `agent` receives `batch`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub k: usize,
    pub time: f64,
    pub agent: AgentId,
    pub batch: Vec<Sample>,
}

/// The merged arrival clock `T = ∪_i T^i`, one acting agent per index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventSchedule {
    events: Vec<Event>,
}

impl EventSchedule {
    /// Wraps events that are already in processing order, renumbering `k`.
    pub fn from_ordered(mut events: Vec<Event>) -> Result<Self> {
        if events.is_empty() {
            return Err(SolaError::NoEvents);
        }
        for (i, e) in events.iter_mut().enumerate() {
            if e.batch.is_empty() {
                return Err(SolaError::EmptyBatch);
            }
            e.k = i + 1;
        }
        if events.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(SolaError::invalid("event times must be nondecreasing"));
        }
        Ok(Self { events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Event with 1-based index `k`.
    pub fn event(&self, k: usize) -> Option<&Event> {
        k.checked_sub(1).and_then(|i| self.events.get(i))
    }

    pub fn owners(&self) -> Vec<AgentId> {
        self.events.iter().map(|e| e.agent).collect()
    }

    /// Distinct agents in ascending order.
    pub fn agents(&self) -> Vec<AgentId> {
        let mut ids = self.owners();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }
}

/// Merges per-agent arrival lists into one clock sorted by `(time, agent id)`.
pub fn merge_schedules(per_agent: Vec<AgentSchedule>) -> Result<EventSchedule> {
    let mut events = Vec::new();
    for (agent, arrivals) in per_agent {
        let mut last = f64::NEG_INFINITY;
        for (time, batch) in arrivals {
            if time.is_nan() || time < last {
                return Err(SolaError::UnsortedSchedule(agent));
            }
            last = time;
            events.push(Event {
                k: 0,
                time,
                agent,
                batch,
            });
        }
    }
    if events.is_empty() {
        return Err(SolaError::NoEvents);
    }
    // stable: equal (time, agent) keep their per-agent order
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent.cmp(&b.agent)));
    EventSchedule::from_ordered(events)
}
