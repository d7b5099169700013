//! Online policies (EDF, TSP-EDF, BG) and the recolor/align sequence
//! transforms used when comparing against single-color instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_integer::Roots;
use serde::{Deserialize, Serialize};

use crate::metric::{best_tour, Color, Tour, TransitionGraph, Weight};
use crate::sched::{Packet, PacketId, Policy, Slot, SlotAction};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("phase length K={k} must be between 1 and the horizon {horizon}")]
    PhaseLength { k: u64, horizon: Slot },
    #[error("bg needs a uniform metric with unit transition cost")]
    NotUniform,
    #[error("unknown policy {0:?} (expected edf, tsp-edf or bg)")]
    UnknownPolicy(String),
}

/// Earliest-deadline-first over all colors. When the earliest packet has
/// another color, the policy spends the full transition cost first.
#[derive(Clone, Debug)]
pub struct EdfPolicy {
    graph: TransitionGraph,
    /// Ordered by (deadline, id).
    pending: BTreeSet<(Slot, PacketId, Color)>,
    color: Option<Color>,
    transition: Option<(Color, Weight)>,
}

impl EdfPolicy {
    pub fn new(graph: &TransitionGraph) -> EdfPolicy {
        EdfPolicy {
            graph: graph.clone(),
            pending: BTreeSet::new(),
            color: None,
            transition: None,
        }
    }

    fn tick(&mut self, target: Color, remaining: Weight) -> SlotAction {
        let left = remaining - 1;
        if left == 0 {
            self.color = Some(target);
            self.transition = None;
        } else {
            self.transition = Some((target, left));
        }
        SlotAction::TransitionTick(target)
    }
}

impl Policy for EdfPolicy {
    fn name(&self) -> &str {
        "edf"
    }

    fn on_arrivals(&mut self, _slot: Slot, packets: &[Packet]) {
        self.pending
            .extend(packets.iter().map(|p| (p.d, p.id, p.c)));
    }

    fn choose_action(&mut self, slot: Slot) -> SlotAction {
        if let Some((target, remaining)) = self.transition {
            return self.tick(target, remaining);
        }
        while self.pending.first().is_some_and(|&(d, _, _)| d < slot) {
            self.pending.pop_first();
        }
        let Some(&(d, id, c)) = self.pending.first() else {
            return SlotAction::Idle;
        };
        let cost = match self.color {
            Some(j) if j != c => self.graph.weight(j, c),
            _ => 0,
        };
        if cost > 0 {
            return self.tick(c, cost);
        }
        self.pending.remove(&(d, id, c));
        self.color = Some(c);
        SlotAction::Transmit(id)
    }
}

/// `ceil(sqrt(n))` in integers.
pub fn ceil_sqrt(n: u64) -> u64 {
    let s = n.sqrt();
    if s * s < n {
        s + 1
    } else {
        s
    }
}

/// Phase length `K = ceil(sqrt(TSP * L))`, at least one slot.
pub fn phase_length(tsp: Weight, laxity: u64) -> u64 {
    ceil_sqrt(tsp.saturating_mul(laxity)).max(1)
}

/// The guarantee `1 - 3 sqrt(TSP / L)` (negative when `L` is small).
pub fn tsp_edf_bound(tsp: Weight, laxity: u64) -> f64 {
    1.0 - 3.0 * (tsp as f64 / laxity as f64).sqrt()
}

/// One phase of TSP-EDF as planned at its first slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: u64,
    pub k: u64,
    /// First slot of the phase.
    pub start: Slot,
    /// Exactly `k` actions.
    pub actions: Vec<SlotAction>,
    /// Pending packets still transmissible until the phase end (`S^l`).
    pub candidates: Vec<PacketId>,
    /// The first `k` candidates in EDF order on reduced deadlines.
    pub prefix: Vec<PacketId>,
    /// Prefix split by color, in the order the plan visits them.
    pub groups: Vec<(Color, Vec<PacketId>)>,
    /// Cost of reaching the first group from the previous color.
    pub entry_transition: Weight,
    /// Transition slots planned before truncation, entry included.
    pub planned_transition: Weight,
}

/// Phase-based policy: every `K` slots it takes the `K` most urgent
/// pending packets (by deadline rounded down to a multiple of `K`), groups
/// them by color and serves the groups in a fixed tour order.
#[derive(Clone, Debug)]
pub struct TspEdfPolicy {
    name: &'static str,
    graph: TransitionGraph,
    tour: Tour,
    k: u64,
    pending: BTreeMap<PacketId, Packet>,
    /// Color of the last transmission.
    color: Option<Color>,
    current: Vec<SlotAction>,
    plans: Vec<PhasePlan>,
}

impl TspEdfPolicy {
    /// Uses the best available tour and `K = ceil(sqrt(TSP * L))` unless
    /// `k_override` is given.
    pub fn new(
        graph: &TransitionGraph,
        laxity: u64,
        k_override: Option<u64>,
        horizon: Slot,
    ) -> Result<TspEdfPolicy, AlgorithmError> {
        Self::with_tour(graph, best_tour(graph), laxity, k_override, horizon)
    }

    pub fn with_tour(
        graph: &TransitionGraph,
        tour: Tour,
        laxity: u64,
        k_override: Option<u64>,
        horizon: Slot,
    ) -> Result<TspEdfPolicy, AlgorithmError> {
        let k = k_override.unwrap_or_else(|| phase_length(tour.weight, laxity));
        if k == 0 || k > horizon {
            return Err(AlgorithmError::PhaseLength { k, horizon });
        }
        Ok(TspEdfPolicy {
            name: "tsp-edf",
            graph: graph.clone(),
            tour,
            k,
            pending: BTreeMap::new(),
            color: None,
            current: Vec::new(),
            plans: Vec::new(),
        })
    }

    /// TSP-EDF on a unit uniform metric, visiting colors by id.
    pub fn bg(
        graph: &TransitionGraph,
        laxity: u64,
        k_override: Option<u64>,
        horizon: Slot,
    ) -> Result<TspEdfPolicy, AlgorithmError> {
        if graph.colors() > 1 && graph.uniform_cost() != Some(1) {
            return Err(AlgorithmError::NotUniform);
        }
        let tour = Tour::from_order(graph, (0..graph.colors()).collect());
        let mut p = Self::with_tour(graph, tour, laxity, k_override, horizon)?;
        p.name = "bg";
        Ok(p)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn tour(&self) -> &Tour {
        &self.tour
    }

    pub fn plans(&self) -> &[PhasePlan] {
        &self.plans
    }

    fn plan_phase(&mut self, slot: Slot) {
        let k = self.k;
        let phase = (slot - 1) / k + 1;
        let end = phase * k;
        let mut candidates: Vec<(Slot, PacketId)> = self
            .pending
            .values()
            .filter(|p| k * (p.d / k) >= end)
            .map(|p| (k * (p.d / k), p.id))
            .collect();
        candidates.sort_unstable();
        let prefix: Vec<PacketId> = candidates
            .iter()
            .take(k as usize)
            .map(|&(_, id)| id)
            .collect();

        let mut by_color: BTreeMap<Color, Vec<PacketId>> = BTreeMap::new();
        for &id in &prefix {
            by_color.entry(self.pending[&id].c).or_default().push(id);
        }
        let n = self.tour.order.len();
        let first = match self.color {
            Some(c) => self.tour.position(c).map_or(0, |i| (i + 1) % n),
            None => 0,
        };
        let groups: Vec<(Color, Vec<PacketId>)> = (0..n)
            .map(|i| self.tour.order[(first + i) % n])
            .filter_map(|c| by_color.remove(&c).map(|ids| (c, ids)))
            .collect();

        let mut actions = Vec::with_capacity(k as usize);
        let mut cur = self.color;
        let mut entry_transition = 0;
        let mut planned_transition = 0;
        for (gi, (c, ids)) in groups.iter().enumerate() {
            let w = match cur {
                Some(j) if j != *c => self.graph.weight(j, *c),
                _ => 0,
            };
            if gi == 0 {
                entry_transition = w;
            }
            planned_transition += w;
            actions.extend(std::iter::repeat_n(
                SlotAction::TransitionTick(*c),
                w as usize,
            ));
            actions.extend(ids.iter().map(|&id| SlotAction::Transmit(id)));
            cur = Some(*c);
        }
        actions.truncate(k as usize);
        actions.resize(k as usize, SlotAction::Idle);

        self.current = actions.iter().rev().copied().collect();
        self.plans.push(PhasePlan {
            phase,
            k,
            start: slot,
            actions,
            candidates: candidates.into_iter().map(|(_, id)| id).collect(),
            prefix,
            groups,
            entry_transition,
            planned_transition,
        });
    }
}

impl Policy for TspEdfPolicy {
    fn name(&self) -> &str {
        self.name
    }

    fn on_arrivals(&mut self, _slot: Slot, packets: &[Packet]) {
        self.pending.extend(packets.iter().map(|p| (p.id, *p)));
    }

    fn choose_action(&mut self, slot: Slot) -> SlotAction {
        if (slot - 1).is_multiple_of(self.k) {
            self.plan_phase(slot);
        }
        let action = self.current.pop().unwrap_or_default();
        if let SlotAction::Transmit(id) = action {
            let p = self.pending.remove(&id).expect("planned packet is pending");
            self.color = Some(p.c);
        }
        action
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "edf")]
    Edf,
    #[serde(rename = "tsp-edf")]
    TspEdf,
    #[serde(rename = "bg")]
    Bg,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Edf => "edf",
            PolicyKind::TspEdf => "tsp-edf",
            PolicyKind::Bg => "bg",
        }
    }

    /// Builds the policy. `laxity` is the sequence's minimum laxity.
    pub fn build(
        self,
        graph: &TransitionGraph,
        laxity: u64,
        horizon: Slot,
    ) -> Result<Box<dyn Policy + Send>, AlgorithmError> {
        Ok(match self {
            PolicyKind::Edf => Box::new(EdfPolicy::new(graph)),
            PolicyKind::TspEdf => Box::new(TspEdfPolicy::new(graph, laxity, None, horizon)?),
            PolicyKind::Bg => Box::new(TspEdfPolicy::bg(graph, laxity, None, horizon)?),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edf" => Ok(PolicyKind::Edf),
            "tsp-edf" => Ok(PolicyKind::TspEdf),
            "bg" => Ok(PolicyKind::Bg),
            other => Err(AlgorithmError::UnknownPolicy(other.to_string())),
        }
    }
}

/// Same spans, every packet recolored to `color`.
pub fn recolor_sigma_prime(packets: &[Packet], color: Color) -> Vec<Packet> {
    packets.iter().map(|p| Packet { c: color, ..*p }).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aligned {
    pub packets: Vec<Packet>,
    /// Packets whose aligned span was empty.
    pub dropped: usize,
}

/// Maps `(r, d, c)` to `(K ceil(r/K), K floor(d/K), color)`, dropping
/// packets left with an empty span.
pub fn align_sigma_tilde(packets: &[Packet], k: u64, color: Color) -> Aligned {
    assert!(k >= 1, "K must be positive");
    let mut out = Vec::with_capacity(packets.len());
    let mut dropped = 0;
    for p in packets {
        let r = k * p.r.div_ceil(k);
        let d = k * (p.d / k);
        if r > d {
            dropped += 1;
        } else {
            out.push(Packet::new(p.id, r, d, color));
        }
    }
    Aligned {
        packets: out,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::uniform_metric;
    use crate::sched::{simulate, validate_schedule, Instance, StaticSource};

    fn inst(g: &TransitionGraph, packets: &[(Slot, Slot, Color)]) -> Instance {
        let ps = packets
            .iter()
            .enumerate()
            .map(|(i, &(r, d, c))| Packet::new(i, r, d, c))
            .collect();
        Instance::new(g.clone(), ps, None).unwrap()
    }

    #[test]
    fn edf_examples() {
        let one = uniform_metric(1, 0);
        let i = inst(&one, &[(1, 3, 0), (1, 3, 0), (1, 3, 0)]);
        let run = simulate(&mut StaticSource::new(&i), &mut EdfPolicy::new(&one)).unwrap();
        assert_eq!(run.schedule.throughput(), 3);

        let two = uniform_metric(2, 1);
        let i = inst(&two, &[(1, 2, 0), (1, 2, 1)]);
        let run = simulate(&mut StaticSource::new(&i), &mut EdfPolicy::new(&two)).unwrap();
        assert_eq!(run.schedule.throughput(), 1);
        assert_eq!(run.schedule.action(1), SlotAction::Transmit(0));
        assert_eq!(run.schedule.action(2), SlotAction::TransitionTick(1));
    }

    #[test]
    fn edf_breaks_ties_by_id() {
        let g = uniform_metric(2, 1);
        let i = inst(&g, &[(1, 5, 1), (1, 5, 0), (1, 5, 1)]);
        let run = simulate(&mut StaticSource::new(&i), &mut EdfPolicy::new(&g)).unwrap();
        let order: Vec<_> = run.schedule.transmissions().map(|(_, id)| id).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn phase_length_formula() {
        assert_eq!(phase_length(4, 100), 20);
        assert_eq!(phase_length(3, 300), 30);
        assert_eq!(phase_length(2, 3), 3);
        assert_eq!(phase_length(0, 50), 1);
        assert!((tsp_edf_bound(3, 300) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn reduced_deadline() {
        let g = uniform_metric(1, 0);
        let mut p = TspEdfPolicy::new(&g, 10, Some(10), 100).unwrap();
        p.on_arrivals(1, &[Packet::new(0, 1, 37, 0), Packet::new(1, 1, 19, 0)]);
        p.choose_action(1);
        // 37 -> 30 reaches the end of phase 1; 19 -> 10 as well.
        assert_eq!(p.plans()[0].candidates, vec![1, 0]);
        for t in 2..=11 {
            p.choose_action(t);
        }
        // Packet 1 is left over with reduced deadline 10 < 20.
        assert!(p.plans()[1].candidates.is_empty());
    }

    #[test]
    fn phase_length_errors() {
        let g = uniform_metric(2, 1);
        assert_eq!(
            TspEdfPolicy::new(&g, 10, Some(0), 50).unwrap_err(),
            AlgorithmError::PhaseLength { k: 0, horizon: 50 }
        );
        assert!(TspEdfPolicy::new(&g, 10, Some(51), 50).is_err());
        assert!(TspEdfPolicy::bg(&uniform_metric(3, 2), 10, None, 50).is_err());
    }

    #[test]
    fn tsp_edf_plans_follow_tour() {
        let g = uniform_metric(3, 1);
        let i = inst(
            &g,
            &[(1, 40, 2), (1, 40, 0), (1, 40, 1), (1, 40, 2), (12, 40, 0)],
        );
        let mut p = TspEdfPolicy::new(&g, 39, Some(10), i.horizon).unwrap();
        let run = simulate(&mut StaticSource::new(&i), &mut p).unwrap();
        assert_eq!(validate_schedule(&i, &run.schedule), Ok(5));
        let first = &p.plans()[0];
        assert_eq!(first.actions.len(), 10);
        let colors: Vec<Color> = first.groups.iter().map(|g| g.0).collect();
        assert_eq!(colors, p.tour().order);
        assert_eq!(first.entry_transition, 0);
        assert!(first.planned_transition <= p.tour().weight);
        // Packet 4 arrives during phase 2 and waits for phase 3.
        assert!(!p.plans()[1].candidates.contains(&4));
        assert_eq!(p.plans()[2].prefix, vec![4]);
    }

    #[test]
    fn policy_kind_parse() {
        assert_eq!("tsp-edf".parse::<PolicyKind>(), Ok(PolicyKind::TspEdf));
        assert!("fifo".parse::<PolicyKind>().is_err());
        assert_eq!(PolicyKind::Bg.to_string(), "bg");
    }

    #[test]
    fn transforms() {
        assert_eq!(
            recolor_sigma_prime(&[Packet::new(0, 1, 5, 2)], 0),
            vec![Packet::new(0, 1, 5, 0)]
        );
        assert!(recolor_sigma_prime(&[], 0).is_empty());
        let a = align_sigma_tilde(&[Packet::new(0, 7, 23, 3), Packet::new(1, 1, 9, 1)], 10, 0);
        assert_eq!(a.packets, vec![Packet::new(0, 10, 20, 0)]);
        assert_eq!(a.dropped, 1);
    }
}
