use std::collections::BTreeMap;

use crate::domain::{AgentId, EventSchedule};
use crate::error::{Result, SolaError};

/// The realized selection `σ(1), …, σ(|T|)`.
///
/// `forced[i]` marks events where the policy wanted a different agent but the
/// event belonged to someone else, so the owner was selected instead.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectingSignal {
    sigma: Vec<AgentId>,
    forced: Vec<bool>,
}

impl SelectingSignal {
    /// A bare assignment sequence, with no schedule to check against.
    pub fn new(sigma: Vec<AgentId>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(SolaError::NoEvents);
        }
        let forced = vec![false; sigma.len()];
        Ok(Self { sigma, forced })
    }

    /// Checks that every selection owns its event.
    pub fn for_schedule(schedule: &EventSchedule, sigma: Vec<AgentId>, forced: Vec<bool>) -> Result<Self> {
        if sigma.len() != schedule.len() || forced.len() != sigma.len() {
            return Err(SolaError::invalid(format!(
                "signal length {} does not match {} events",
                sigma.len(),
                schedule.len()
            )));
        }
        for (e, &s) in schedule.iter().zip(&sigma) {
            if e.agent != s {
                return Err(SolaError::NotOwner {
                    k: e.k,
                    selected: s,
                    owner: e.agent,
                });
            }
        }
        Ok(Self { sigma, forced })
    }

    /// The owner of each event, in schedule order.
    pub fn owners(schedule: &EventSchedule) -> Self {
        Self {
            sigma: schedule.owners(),
            forced: vec![false; schedule.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `σ(k)` for 1-based `k`.
    pub fn at(&self, k: usize) -> Option<AgentId> {
        k.checked_sub(1).and_then(|i| self.sigma.get(i).copied())
    }

    pub fn assignments(&self) -> &[AgentId] {
        &self.sigma
    }

    pub fn forced(&self) -> &[bool] {
        &self.forced
    }

    pub fn forced_count(&self) -> usize {
        self.forced.iter().filter(|&&f| f).count()
    }

    /// Distinct agents, ascending.
    pub fn agents(&self) -> Vec<AgentId> {
        let mut a = self.sigma.clone();
        a.sort();
        a.dedup();
        a
    }

    /// Switch indicator prefix sums: `s[p] = #{q ≤ p : σ[q] ≠ σ[q−1]}`.
    pub(crate) fn switch_prefix(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sigma.len());
        let mut acc = 0;
        for p in 0..self.sigma.len() {
            if p > 0 && self.sigma[p] != self.sigma[p - 1] {
                acc += 1;
            }
            out.push(acc);
        }
        out
    }

    pub fn total_switches(&self) -> usize {
        self.switch_prefix().last().copied().unwrap_or(0)
    }
}

/// `N(k1, k2)`: the number of `p ∈ (k1, k2]` with `σ[p] ≠ σ[p−1]`.
///
/// Positions are 0-based into the assignment sequence, so
/// `0 ≤ k1 < k2 ≤ len − 1`.
pub fn count_switches(signal: &SelectingSignal, k1: usize, k2: usize) -> Result<usize> {
    let len = signal.len();
    if k1 >= k2 || k2 >= len {
        return Err(SolaError::InvalidWindow { k1, k2, len });
    }
    Ok(((k1 + 1)..=k2)
        .filter(|&p| signal.sigma[p] != signal.sigma[p - 1])
        .count())
}

/// Holds each agent in `order` for `period` of its own events, then moves on.
///
/// An event whose owner is not the current block holder is still given to its
/// owner (only agents with new data may act), flagged as forced, and does not
/// count toward the block.
pub fn periodic_signal(schedule: &EventSchedule, period: usize, order: &[AgentId]) -> Result<SelectingSignal> {
    if period == 0 {
        return Err(SolaError::invalid("period must be at least 1"));
    }
    if schedule.is_empty() {
        return Err(SolaError::NoEvents);
    }
    let present = schedule.agents();
    for a in order {
        if !present.contains(a) {
            return Err(SolaError::UnknownAgent(*a));
        }
    }
    if let Some(missing) = present.iter().find(|a| !order.contains(a)) {
        return Err(SolaError::UnknownAgent(*missing));
    }
    let mut sigma = Vec::with_capacity(schedule.len());
    let mut forced = Vec::with_capacity(schedule.len());
    let (mut block, mut held) = (0usize, 0usize);
    for e in schedule.iter() {
        sigma.push(e.agent);
        if e.agent == order[block] {
            forced.push(false);
            held += 1;
            if held == period {
                block = (block + 1) % order.len();
                held = 0;
            }
        } else {
            forced.push(true);
        }
    }
    SelectingSignal::for_schedule(schedule, sigma, forced)
}

/// Picks, among `candidates` (agents with new data now), the one with the
/// highest last-known performance. Agents never evaluated rank first; ties go
/// to the lower id.
pub fn greedy_signal(candidates: &[AgentId], last_known: &BTreeMap<AgentId, f64>) -> Result<AgentId> {
    let score = |a: &AgentId| last_known.get(a).copied().unwrap_or(f64::INFINITY);
    let mut best: Option<AgentId> = None;
    for &c in candidates {
        best = match best {
            None => Some(c),
            Some(b) => {
                let (sb, sc) = (score(&b), score(&c));
                if sc > sb || (sc == sb && c < b) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or(SolaError::NoEvents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{merge_schedules, Sample, Target};
    use proptest::prelude::*;

    fn sig(ids: &[usize]) -> SelectingSignal {
        SelectingSignal::new(ids.iter().map(|&i| AgentId(i)).collect()).unwrap()
    }

    fn schedule(per_agent: &[(usize, Vec<f64>)]) -> EventSchedule {
        let one = || vec![Sample::new(vec![0.0], Target::Value(0.0))];
        merge_schedules(
            per_agent
                .iter()
                .map(|(a, ts)| (AgentId(*a), ts.iter().map(|&t| (t, one())).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn counts_sign_changes() {
        assert_eq!(count_switches(&sig(&[1, 1, 2, 2, 1]), 0, 4).unwrap(), 2);
        assert_eq!(count_switches(&sig(&[3; 9]), 2, 8).unwrap(), 0);
        let alt: Vec<usize> = (0..12).map(|i| 1 + i % 2).collect();
        for w in 1..12 {
            assert_eq!(count_switches(&sig(&alt), 0, w).unwrap(), w);
        }
    }

    #[test]
    fn bad_windows() {
        let s = sig(&[1, 2, 1]);
        assert!(matches!(count_switches(&s, 2, 2), Err(SolaError::InvalidWindow { .. })));
        assert!(count_switches(&s, 0, 3).is_err());
    }

    #[test]
    fn owner_check() {
        let s = schedule(&[(1, vec![1.0]), (2, vec![2.0])]);
        let err = SelectingSignal::for_schedule(&s, vec![AgentId(1), AgentId(1)], vec![false; 2]);
        assert!(matches!(err, Err(SolaError::NotOwner { k: 2, .. })));
    }

    fn blocked(agents: usize, block: usize, per_agent: usize) -> EventSchedule {
        let lists: Vec<(usize, Vec<f64>)> = (0..agents)
            .map(|a| {
                let ts = (0..per_agent)
                    .map(|j| (((j / block) * agents + a) * block + j % block + 1) as f64)
                    .collect();
                (a + 1, ts)
            })
            .collect();
        schedule(&lists)
    }

    #[test]
    fn period_ten_two_agents() {
        let s = blocked(2, 10, 20);
        let sig = periodic_signal(&s, 10, &[AgentId(1), AgentId(2)]).unwrap();
        assert_eq!(sig.len(), 40);
        assert_eq!(sig.total_switches(), 3);
        assert_eq!(sig.forced_count(), 0);
        for start in (0..30).step_by(10) {
            assert_eq!(count_switches(&sig, start, start + 10).unwrap(), 1);
        }
    }

    #[test]
    fn period_one_alternates() {
        let s = schedule(&[(1, vec![1.0, 3.0, 5.0]), (2, vec![2.0, 4.0, 6.0])]);
        let sig = periodic_signal(&s, 1, &[AgentId(1), AgentId(2)]).unwrap();
        assert_eq!(sig.total_switches(), 5);
        assert_eq!(sig.forced_count(), 0);
    }

    #[test]
    fn single_agent_is_constant() {
        let s = schedule(&[(4, vec![1.0, 2.0, 3.0, 4.0])]);
        for p in 1..6 {
            let sig = periodic_signal(&s, p, &[AgentId(4)]).unwrap();
            assert_eq!(sig.total_switches(), 0);
        }
    }

    #[test]
    fn interleaved_arrivals_force_selections() {
        let s = schedule(&[(1, vec![1.0, 3.0, 5.0, 7.0]), (2, vec![2.0, 4.0, 6.0, 8.0])]);
        let sig = periodic_signal(&s, 2, &[AgentId(1), AgentId(2)]).unwrap();
        // blocks: agent 1 on events 1,3, agent 2 on 4,6, agent 1 on 7; the rest are forced
        assert_eq!(sig.forced(), &[false, true, false, false, true, false, false, true][..]);
    }

    #[test]
    fn periodic_rejects_unknown_agents() {
        let s = schedule(&[(1, vec![1.0]), (2, vec![2.0])]);
        assert!(matches!(
            periodic_signal(&s, 3, &[AgentId(1), AgentId(3)]),
            Err(SolaError::UnknownAgent(AgentId(3)))
        ));
        assert!(periodic_signal(&s, 3, &[AgentId(1)]).is_err());
        assert!(periodic_signal(&s, 0, &[AgentId(1), AgentId(2)]).is_err());
    }

    #[test]
    fn greedy_choices() {
        let mut known = BTreeMap::new();
        known.insert(AgentId(1), 0.9);
        known.insert(AgentId(2), 0.3);
        assert_eq!(greedy_signal(&[AgentId(1), AgentId(2)], &known).unwrap(), AgentId(1));
        assert_eq!(greedy_signal(&[AgentId(2)], &known).unwrap(), AgentId(2));
        known.insert(AgentId(2), 0.9);
        assert_eq!(greedy_signal(&[AgentId(2), AgentId(1)], &known).unwrap(), AgentId(1));
        assert_eq!(greedy_signal(&[AgentId(1), AgentId(3)], &known).unwrap(), AgentId(3));
        assert!(greedy_signal(&[], &known).is_err());
    }

    proptest! {
        #[test]
        fn switches_are_additive(ids in prop::collection::vec(1usize..4, 3..60), a in 0usize..60, b in 0usize..60, c in 0usize..60) {
            let s = sig(&ids);
            let mut w = [a % ids.len(), b % ids.len(), c % ids.len()];
            w.sort();
            prop_assume!(w[0] < w[1] && w[1] < w[2]);
            let whole = count_switches(&s, w[0], w[2]).unwrap();
            let parts = count_switches(&s, w[0], w[1]).unwrap() + count_switches(&s, w[1], w[2]).unwrap();
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn periodic_blocks_switch_once_per_boundary(agents in 1usize..5, period in 1usize..6, rounds in 1usize..5) {
            let s = blocked(agents, period, period * rounds);
            let order: Vec<AgentId> = (1..=agents).map(AgentId).collect();
            let sig = periodic_signal(&s, period, &order).unwrap();
            prop_assert_eq!(sig.forced_count(), 0);
            let span = period * agents;
            let mut k = 0;
            while k + span < sig.len() {
                prop_assert_eq!(count_switches(&sig, k, k + span).unwrap(), if agents > 1 { agents } else { 0 });
                k += period;
            }
        }
    }
}
