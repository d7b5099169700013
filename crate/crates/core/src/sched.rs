//! Discrete-time switch model: packets, schedules, the feasibility checker
//! and the online simulation loop.
//!
//! Slots are 1-indexed. A packet `(r, d, c)` may be transmitted at any slot
//! `t` with `r <= t <= d`. The switch starts unconfigured, so the first
//! transmission needs no transition. Between consecutive transmissions of
//! colors `j != k` at least `w(j, k)` slots must be transition ticks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::metric::{Color, MetricError, MetricFile, TransitionGraph, Weight};

pub type Slot = u64;
pub type PacketId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub r: Slot,
    pub d: Slot,
    pub c: Color,
}

impl Packet {
    pub fn new(id: PacketId, r: Slot, d: Slot, c: Color) -> Packet {
        Packet { id, r, d, c }
    }

    pub fn laxity(&self) -> u64 {
        self.d.saturating_sub(self.r)
    }

    pub fn alive_at(&self, t: Slot) -> bool {
        self.r <= t && t <= self.d
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("packet list is empty")]
    NoPackets,
    #[error("packet {id}: release must be >= 1 and deadline >= release (got r={r}, d={d})")]
    BadSpan { id: PacketId, r: Slot, d: Slot },
    #[error("packet {id}: color {c} out of range for {colors} colors")]
    BadColor {
        id: PacketId,
        c: Color,
        colors: usize,
    },
    #[error("duplicate packet id {0}")]
    DuplicateId(PacketId),
    #[error("horizon {horizon} is before the last deadline {deadline}")]
    ShortHorizon { horizon: Slot, deadline: Slot },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `L`, the minimum laxity `d - r` over the packets.
pub fn min_laxity(packets: &[Packet]) -> Result<u64, SchedError> {
    packets
        .iter()
        .map(Packet::laxity)
        .min()
        .ok_or(SchedError::NoPackets)
}

fn check_packet(p: &Packet, colors: usize) -> Result<(), SchedError> {
    if p.r < 1 || p.d < p.r {
        return Err(SchedError::BadSpan {
            id: p.id,
            r: p.r,
            d: p.d,
        });
    }
    if p.c >= colors {
        return Err(SchedError::BadColor {
            id: p.id,
            c: p.c,
            colors,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub graph: TransitionGraph,
    pub packets: Vec<Packet>,
    pub horizon: Slot,
}

impl Instance {
    /// Checks packets against the graph. `horizon` defaults to the last deadline.
    pub fn new(
        graph: TransitionGraph,
        packets: Vec<Packet>,
        horizon: Option<Slot>,
    ) -> Result<Instance, SchedError> {
        let mut ids = HashSet::with_capacity(packets.len());
        for p in &packets {
            check_packet(p, graph.colors())?;
            if !ids.insert(p.id) {
                return Err(SchedError::DuplicateId(p.id));
            }
        }
        let last = packets.iter().map(|p| p.d).max().unwrap_or(0);
        let horizon = horizon.unwrap_or(last);
        if horizon < last {
            return Err(SchedError::ShortHorizon {
                horizon,
                deadline: last,
            });
        }
        Ok(Instance {
            graph,
            packets,
            horizon,
        })
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet> {
        self.packets.iter().find(|p| p.id == id)
    }

    /// File form with packets listed by id, so ids `0..n` survive a round trip.
    pub fn to_file(&self) -> InstanceFile {
        let mut sorted: Vec<&Packet> = self.packets.iter().collect();
        sorted.sort_by_key(|p| p.id);
        InstanceFile {
            metric: self.graph.to_file(),
            packets: sorted
                .into_iter()
                .map(|p| PacketRecord {
                    r: p.r,
                    d: p.d,
                    c: p.c,
                })
                .collect(),
            horizon: Some(self.horizon),
        }
    }

    /// Builds an instance from its file form; packet ids are list positions.
    pub fn from_file(file: InstanceFile) -> Result<Instance, SchedError> {
        let graph = TransitionGraph::try_from(file.metric)?;
        let packets = file
            .packets
            .iter()
            .enumerate()
            .map(|(id, p)| Packet::new(id, p.r, p.d, p.c))
            .collect();
        Instance::new(graph, packets, file.horizon)
    }

    pub fn from_json(text: &str) -> Result<Instance, InstanceParseError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Ok(Instance::from_file(file)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("instance serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceParseError {
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] SchedError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub r: Slot,
    pub d: Slot,
    pub c: Color,
}

/// On-disk instance. Unknown fields are ignored, so adversary traces load
/// as instances directly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub metric: MetricFile,
    pub packets: Vec<PacketRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Slot>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotAction {
    Transmit(PacketId),
    TransitionTick(Color),
    #[default]
    Idle,
}

/// Actions for slots `1..=len`; slots past the end are idle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    actions: Vec<SlotAction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: Slot,
    pub action: SlotAction,
}

impl Schedule {
    pub fn new() -> Schedule {
        Schedule::default()
    }

    pub fn from_actions(actions: Vec<SlotAction>) -> Schedule {
        Schedule { actions }
    }

    pub fn len(&self) -> Slot {
        self.actions.len() as Slot
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, t: Slot) -> SlotAction {
        t.checked_sub(1)
            .and_then(|i| self.actions.get(i as usize))
            .copied()
            .unwrap_or_default()
    }

    pub fn set(&mut self, t: Slot, action: SlotAction) {
        assert!(t >= 1, "slots are 1-indexed");
        let i = (t - 1) as usize;
        if self.actions.len() <= i {
            self.actions.resize(i + 1, SlotAction::Idle);
        }
        self.actions[i] = action;
    }

    pub fn push(&mut self, action: SlotAction) {
        self.actions.push(action);
    }

    /// Pads with idle slots up to `horizon`.
    pub fn pad_to(&mut self, horizon: Slot) {
        if self.len() < horizon {
            self.actions.resize(horizon as usize, SlotAction::Idle);
        }
    }

    pub fn actions(&self) -> &[SlotAction] {
        &self.actions
    }

    /// `(slot, action)` pairs for slots `1..=len`.
    pub fn iter(&self) -> impl Iterator<Item = (Slot, SlotAction)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, &a)| (i as Slot + 1, a))
    }

    pub fn transmissions(&self) -> impl Iterator<Item = (Slot, PacketId)> + '_ {
        self.iter().filter_map(|(t, a)| match a {
            SlotAction::Transmit(id) => Some((t, id)),
            _ => None,
        })
    }

    pub fn throughput(&self) -> u64 {
        self.transmissions().count() as u64
    }

    /// Idle and transition-tick counts over slots `from..=to`.
    pub fn counts_in(&self, from: Slot, to: Slot) -> SlotCounts {
        let mut counts = SlotCounts::default();
        for t in from.max(1)..=to {
            match self.action(t) {
                SlotAction::Transmit(_) => counts.transmit += 1,
                SlotAction::TransitionTick(_) => counts.transition += 1,
                SlotAction::Idle => counts.idle += 1,
            }
        }
        counts
    }

    pub fn to_records(&self) -> Vec<SlotRecord> {
        self.iter()
            .map(|(t, action)| SlotRecord { t, action })
            .collect()
    }

    pub fn from_records(records: &[SlotRecord]) -> Schedule {
        let mut s = Schedule::new();
        for r in records {
            s.set(r.t, r.action);
        }
        s
    }

    /// JSON dump: `[{"t": 1, "action": {"transmit": 0}}, ...]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_records()).expect("schedule serializes")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub transmit: u64,
    pub transition: u64,
    pub idle: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleViolation {
    UnknownPacket {
        t: Slot,
        id: PacketId,
    },
    Duplicate {
        t: Slot,
        id: PacketId,
        first: Slot,
    },
    BeforeRelease {
        t: Slot,
        id: PacketId,
        r: Slot,
    },
    AfterDeadline {
        t: Slot,
        id: PacketId,
        d: Slot,
    },
    MissingTransition {
        from_slot: Slot,
        to_slot: Slot,
        from: Color,
        to: Color,
        required: Weight,
        found: u64,
    },
    BadTransitionTarget {
        t: Slot,
        target: Color,
    },
    BeyondHorizon {
        t: Slot,
        horizon: Slot,
    },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScheduleViolation::*;
        match *self {
            UnknownPacket { t, id } => write!(f, "slot {t}: packet {id} does not exist"),
            Duplicate { t, id, first } => {
                write!(f, "slot {t}: packet {id} already transmitted at slot {first}")
            }
            BeforeRelease { t, id, r } => write!(f, "slot {t}: packet {id} is released at {r}"),
            AfterDeadline { t, id, d } => write!(f, "slot {t}: packet {id} expired at {d}"),
            MissingTransition { from_slot, to_slot, from, to, required, found } => write!(
                f,
                "slots {from_slot}..{to_slot}: switching {from}->{to} needs {required} transition slots, found {found}"
            ),
            BadTransitionTarget { t, target } => {
                write!(f, "slot {t}: transition target {target} is not a color")
            }
            BeyondHorizon { t, horizon } => write!(f, "slot {t}: action after horizon {horizon}"),
        }
    }
}

/// Returns the throughput if the schedule is feasible for the instance,
/// otherwise every violation found.
pub fn validate_schedule(
    instance: &Instance,
    schedule: &Schedule,
) -> Result<u64, Vec<ScheduleViolation>> {
    let by_id: HashMap<PacketId, &Packet> = instance.packets.iter().map(|p| (p.id, p)).collect();
    let mut violations = Vec::new();
    let mut sent: HashMap<PacketId, Slot> = HashMap::new();
    // (slot, color) of the previous transmission and ticks seen since.
    let mut last: Option<(Slot, Color)> = None;
    let mut ticks = 0u64;
    let mut throughput = 0;

    for (t, action) in schedule.iter() {
        if t > instance.horizon && action != SlotAction::Idle {
            violations.push(ScheduleViolation::BeyondHorizon {
                t,
                horizon: instance.horizon,
            });
        }
        match action {
            SlotAction::Idle => {}
            SlotAction::TransitionTick(target) => {
                if target >= instance.graph.colors() {
                    violations.push(ScheduleViolation::BadTransitionTarget { t, target });
                }
                ticks += 1;
            }
            SlotAction::Transmit(id) => {
                let Some(p) = by_id.get(&id) else {
                    violations.push(ScheduleViolation::UnknownPacket { t, id });
                    continue;
                };
                if let Some(&first) = sent.get(&id) {
                    violations.push(ScheduleViolation::Duplicate { t, id, first });
                } else {
                    sent.insert(id, t);
                }
                if t < p.r {
                    violations.push(ScheduleViolation::BeforeRelease { t, id, r: p.r });
                }
                if t > p.d {
                    violations.push(ScheduleViolation::AfterDeadline { t, id, d: p.d });
                }
                if let Some((from_slot, from)) = last {
                    let required = instance.graph.weight(from, p.c);
                    if from != p.c && ticks < required {
                        violations.push(ScheduleViolation::MissingTransition {
                            from_slot,
                            to_slot: t,
                            from,
                            to: p.c,
                            required,
                            found: ticks,
                        });
                    }
                }
                last = Some((t, p.c));
                ticks = 0;
                throughput += 1;
            }
        }
    }
    if violations.is_empty() {
        Ok(throughput)
    } else {
        Err(violations)
    }
}

/// An online scheduling policy. It only ever sees packets that have been
/// released, through `on_arrivals`, and picks one action per slot.
pub trait Policy {
    fn name(&self) -> &str;
    fn on_arrivals(&mut self, slot: Slot, packets: &[Packet]);
    fn choose_action(&mut self, slot: Slot) -> SlotAction;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn on_arrivals(&mut self, slot: Slot, packets: &[Packet]) {
        (**self).on_arrivals(slot, packets)
    }
    fn choose_action(&mut self, slot: Slot) -> SlotAction {
        (**self).choose_action(slot)
    }
}

/// Supplies packets slot by slot. Adaptive sources may inspect the
/// policy's actions for slots `1..slot` (never the current one).
pub trait PacketSource {
    fn graph(&self) -> &TransitionGraph;
    fn horizon(&self) -> Slot;
    fn releases(&mut self, slot: Slot, history: &[SlotAction]) -> Vec<Packet>;
}

/// Releases a fixed instance. Within a slot packets come in id order.
pub struct StaticSource {
    graph: TransitionGraph,
    horizon: Slot,
    by_slot: BTreeMap<Slot, Vec<Packet>>,
}

impl StaticSource {
    pub fn new(instance: &Instance) -> StaticSource {
        let mut by_slot: BTreeMap<Slot, Vec<Packet>> = BTreeMap::new();
        for p in &instance.packets {
            by_slot.entry(p.r).or_default().push(*p);
        }
        for v in by_slot.values_mut() {
            v.sort_by_key(|p| p.id);
        }
        StaticSource {
            graph: instance.graph.clone(),
            horizon: instance.horizon,
            by_slot,
        }
    }
}

impl PacketSource for StaticSource {
    fn graph(&self) -> &TransitionGraph {
        &self.graph
    }

    fn horizon(&self) -> Slot {
        self.horizon
    }

    fn releases(&mut self, slot: Slot, _history: &[SlotAction]) -> Vec<Packet> {
        self.by_slot.remove(&slot).unwrap_or_default()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SimulationError {
    #[error("source released packet {id} at slot {slot} but its release time is {r}")]
    ReleaseMismatch { slot: Slot, id: PacketId, r: Slot },
    #[error("source released an invalid packet: {0}")]
    BadPacket(SchedError),
    #[error("policy {policy} chose an infeasible action at slot {slot}: {reason}")]
    InfeasibleAction {
        policy: String,
        slot: Slot,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationRun {
    pub schedule: Schedule,
    /// Everything the source released, in release order.
    pub instance: Instance,
}

/// Drives slots `1..=horizon`: releases first, then one policy action.
/// Each action is checked on the spot, so an infeasible policy aborts the
/// run with a diagnostic instead of producing an invalid schedule.
pub fn simulate<S, P>(source: &mut S, policy: &mut P) -> Result<SimulationRun, SimulationError>
where
    S: PacketSource + ?Sized,
    P: Policy + ?Sized,
{
    let graph = source.graph().clone();
    let horizon = source.horizon();
    let mut released: Vec<Packet> = Vec::new();
    let mut index: HashMap<PacketId, usize> = HashMap::new();
    let mut sent: HashSet<PacketId> = HashSet::new();
    let mut actions: Vec<SlotAction> = Vec::with_capacity(horizon as usize);
    let mut last_color: Option<Color> = None;
    let mut ticks = 0u64;

    for t in 1..=horizon {
        let arrivals = source.releases(t, &actions);
        for p in &arrivals {
            if p.r != t {
                return Err(SimulationError::ReleaseMismatch {
                    slot: t,
                    id: p.id,
                    r: p.r,
                });
            }
            check_packet(p, graph.colors()).map_err(SimulationError::BadPacket)?;
            if index.insert(p.id, released.len()).is_some() {
                return Err(SimulationError::BadPacket(SchedError::DuplicateId(p.id)));
            }
            released.push(*p);
        }
        policy.on_arrivals(t, &arrivals);
        let action = policy.choose_action(t);
        let fail = |reason: String| SimulationError::InfeasibleAction {
            policy: policy.name().to_string(),
            slot: t,
            reason,
        };
        match action {
            SlotAction::Idle => {}
            SlotAction::TransitionTick(target) => {
                if target >= graph.colors() {
                    return Err(fail(format!("transition target {target} is not a color")));
                }
                ticks += 1;
            }
            SlotAction::Transmit(id) => {
                let Some(&i) = index.get(&id) else {
                    return Err(fail(format!("packet {id} has not been released")));
                };
                let p = released[i];
                if !sent.insert(id) {
                    return Err(fail(format!("packet {id} was already transmitted")));
                }
                if t > p.d {
                    return Err(fail(format!("packet {id} expired at slot {}", p.d)));
                }
                if let Some(from) = last_color {
                    let need = graph.weight(from, p.c);
                    if from != p.c && ticks < need {
                        return Err(fail(format!(
                            "switching {from}->{} needs {need} transition slots, found {ticks}",
                            p.c
                        )));
                    }
                }
                last_color = Some(p.c);
                ticks = 0;
            }
        }
        actions.push(action);
    }

    let instance = Instance {
        graph,
        packets: released,
        horizon,
    };
    let schedule = Schedule::from_actions(actions);
    if let Err(v) = validate_schedule(&instance, &schedule) {
        return Err(SimulationError::InfeasibleAction {
            policy: policy.name().to_string(),
            slot: horizon,
            reason: format!("post-run validation failed: {}", v[0]),
        });
    }
    Ok(SimulationRun { schedule, instance })
}

/// Appends actions left to right for offline constructions. Transitions are
/// emitted as ticks right before the transmission that needs them.
#[derive(Clone, Debug)]
pub struct ScheduleBuilder<'g> {
    graph: &'g TransitionGraph,
    next: Slot,
    color: Option<Color>,
    schedule: Schedule,
}

impl<'g> ScheduleBuilder<'g> {
    pub fn new(graph: &'g TransitionGraph) -> Self {
        ScheduleBuilder {
            graph,
            next: 1,
            color: None,
            schedule: Schedule::new(),
        }
    }

    /// The next free slot.
    pub fn cursor(&self) -> Slot {
        self.next
    }

    pub fn color(&self) -> Option<Color> {
        self.color
    }

    fn switch_cost(&self, c: Color) -> Weight {
        match self.color {
            Some(j) if j != c => self.graph.weight(j, c),
            _ => 0,
        }
    }

    /// Earliest slot at which `p` could be transmitted, if before its deadline.
    pub fn earliest(&self, p: &Packet) -> Option<Slot> {
        let t = (self.next + self.switch_cost(p.c)).max(p.r);
        (t <= p.d).then_some(t)
    }

    /// Leaves slots idle until the cursor reaches `t`.
    pub fn idle_until(&mut self, t: Slot) {
        self.next = self.next.max(t);
    }

    /// Emits the ticks to reconfigure to `c` now.
    pub fn transition_to(&mut self, c: Color) {
        for _ in 0..self.switch_cost(c) {
            self.schedule.set(self.next, SlotAction::TransitionTick(c));
            self.next += 1;
        }
        self.color = Some(c);
    }

    /// Transmits `p` as early as possible; returns the slot, or `None`
    /// (leaving the builder untouched) if its deadline cannot be met.
    pub fn transmit(&mut self, p: &Packet) -> Option<Slot> {
        let t = self.earliest(p)?;
        self.transition_to(p.c);
        self.idle_until(t);
        self.schedule.set(t, SlotAction::Transmit(p.id));
        self.next = t + 1;
        Some(t)
    }

    pub fn finish(mut self, horizon: Slot) -> Schedule {
        self.schedule.pad_to(horizon);
        self.schedule
    }
}
