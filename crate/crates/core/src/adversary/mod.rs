//! Adaptive lower-bound sequences and the offline schedules that beat them.
//!
//! Each adversary is a [`PacketSource`](crate::sched::PacketSource) that
//! watches the policy's past actions and decides block by block whether to
//! stop with a final burst of packets. The resulting [`AdversaryTrace`]
//! serializes to JSON that also loads as an instance file.

mod directed;
mod opt_prime;
mod probes;
mod star;

use std::collections::BTreeSet;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::metric::{Color, MetricError, MetricFile, StarFile, TransitionGraph, Weight};
use crate::sched::{
    simulate, Instance, Packet, PacketId, PacketRecord, PacketSource, Policy, Schedule,
    SimulationError, SimulationRun, Slot, SlotAction,
};

pub use directed::{DirectedAdversary, DirectedAdversaryParams};
pub use opt_prime::{
    loss_accounting, opt_prime, opt_prime_bound, opt_prime_directed, opt_prime_star, LossCheck,
    LossReport,
};
pub use probes::{ColorSubsetPolicy, IdlePolicy};
pub use star::{metric_adversary, StarAdversary, StarAdversaryParams};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("constructed schedule is infeasible: {0}")]
    Infeasible(String),
    #[error("trace is incomplete: {0}")]
    BadTrace(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    Star,
    Metric,
    Directed,
}

/// How the sequence ended: a type-B burst, a type-A burst after a slack
/// block, or the full complement of blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TerminationCase {
    One,
    Two,
    Three,
}

impl From<TerminationCase> for u8 {
    fn from(c: TerminationCase) -> u8 {
        match c {
            TerminationCase::One => 1,
            TerminationCase::Two => 2,
            TerminationCase::Three => 3,
        }
    }
}

impl TryFrom<u8> for TerminationCase {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(TerminationCase::One),
            2 => Ok(TerminationCase::Two),
            3 => Ok(TerminationCase::Three),
            _ => Err(format!("termination case must be 1, 2 or 3, got {v}")),
        }
    }
}

/// Half-open range of packet ids `[first, end)`.
pub type IdRange = [PacketId; 2];

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularPhase {
    pub start: Slot,
    pub end: Slot,
    /// Colors released at the start of the phase.
    pub colors: Vec<Color>,
    pub type_b: IdRange,
    /// Type-B colors the policy transmitted during the phase.
    pub transmitted_colors: Vec<Color>,
    pub untransmitted_b: u64,
    pub condition_i1: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u64,
    pub start: Slot,
    /// Last slot of the block (0 while it is running).
    pub end: Slot,
    /// Type-B packets released at the block start (star) or in its
    /// regular phases (directed).
    pub type_b: IdRange,
    /// Packets the policy transmitted during the block.
    pub transmitted: u64,
    /// Untransmitted type-B packets at the block end.
    pub untransmitted_b: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition1: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition2: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regular_phases: Vec<RegularPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_phase: Option<[Slot; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_phase: Option<[Slot; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_in_start_phase: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_in_end_phase: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_i2: Option<bool>,
}

/// Everything an adversary run released plus its block structure. The
/// `metric`, `packets` and `horizon` fields make it a valid instance file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryTrace {
    pub kind: AdversaryKind,
    pub metric: MetricFile,
    pub packets: Vec<PacketRecord>,
    pub horizon: Slot,
    /// Laxity used by the sequence.
    pub laxity: u64,
    pub requested_laxity: u64,
    /// The requested laxity was too small and was raised.
    pub clamped: bool,
    pub type_a: Color,
    pub type_b: Vec<Color>,
    /// `F` for star sequences, `H` for directed ones.
    pub budget: u64,
    pub max_blocks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_c: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<StarFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsp: Option<Weight>,
    pub blocks: Vec<BlockRecord>,
    pub case: Option<TerminationCase>,
    pub final_event: Option<Slot>,
    /// Ids released at the final event.
    pub final_packets: IdRange,
}

impl AdversaryTrace {
    pub fn graph(&self) -> Result<TransitionGraph, MetricError> {
        TransitionGraph::try_from(self.metric.clone())
    }

    pub fn packet_list(&self) -> Vec<Packet> {
        self.packets
            .iter()
            .enumerate()
            .map(|(id, p)| Packet::new(id, p.r, p.d, p.c))
            .collect()
    }

    /// The released sequence as a static instance.
    pub fn instance(&self) -> Result<Instance, AdversaryError> {
        Instance::new(self.graph()?, self.packet_list(), Some(self.horizon))
            .map_err(|e| AdversaryError::BadTrace(e.to_string()))
    }

    pub fn star_weight(&self) -> Option<Rational64> {
        self.star
            .as_ref()
            .and_then(|s| crate::metric::StarMetric::from_file(s).ok())
            .map(|s| s.total())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn is_type_b(&self, c: Color) -> bool {
        c != self.type_a
    }
}

/// Adversary sources that can report their trace.
pub trait Adversary: PacketSource {
    fn trace(&self) -> AdversaryTrace;
}

/// Runs `policy` against `adversary`.
pub fn run_adversary<A, P>(
    adversary: &mut A,
    policy: &mut P,
) -> Result<(SimulationRun, AdversaryTrace), AdversaryError>
where
    A: Adversary + ?Sized,
    P: Policy + ?Sized,
{
    let run = simulate(adversary, policy)?;
    Ok((run, adversary.trace()))
}

/// `max(1, ceil(log2 C))`.
pub fn log2_ceil(c: usize) -> u64 {
    let mut k = 0u64;
    while (1usize << k) < c {
        k += 1;
    }
    k.max(1)
}

/// Smallest integer `x` with `x^2 * q >= p` (that is, `ceil(sqrt(p/q))`).
pub(crate) fn ceil_sqrt_ratio(p: u128, q: u128) -> u64 {
    use num_integer::Roots;
    let mut x = (p / q).sqrt();
    while x * x * q < p {
        x += 1;
    }
    while x > 0 && (x - 1) * (x - 1) * q >= p {
        x -= 1;
    }
    x as u64
}

/// Largest integer `x` with `x^2 * q <= p` (that is, `floor(sqrt(p/q))`).
pub(crate) fn floor_sqrt_ratio(p: u128, q: u128) -> u64 {
    use num_integer::Roots;
    let mut x = (p / q).sqrt();
    while (x + 1) * (x + 1) * q <= p {
        x += 1;
    }
    while x > 0 && x * x * q > p {
        x -= 1;
    }
    x as u64
}

/// Bookkeeping shared by the adversaries: released packets and which of
/// them the policy has transmitted so far.
#[derive(Clone, Debug, Default)]
pub(crate) struct Ledger {
    pub released: Vec<Packet>,
    pub sent: Vec<bool>,
    pub seen: usize,
    pub type_a: Color,
    pub released_b: u64,
    pub sent_b: u64,
}

/// A transmission observed in the history.
pub(crate) struct Observed {
    pub slot: Slot,
    pub color: Color,
}

impl Ledger {
    pub fn new(type_a: Color) -> Ledger {
        Ledger {
            type_a,
            ..Default::default()
        }
    }

    pub fn release(&mut self, r: Slot, d: Slot, c: Color, out: &mut Vec<Packet>) {
        let p = Packet::new(self.released.len(), r, d, c);
        if c != self.type_a {
            self.released_b += 1;
        }
        self.released.push(p);
        self.sent.push(false);
        out.push(p);
    }

    /// Consumes new history entries; returns the transmissions among them.
    pub fn observe(&mut self, history: &[SlotAction]) -> Vec<Observed> {
        let mut out = Vec::new();
        while self.seen < history.len() {
            let slot = self.seen as Slot + 1;
            if let SlotAction::Transmit(id) = history[self.seen] {
                if let Some(p) = self.released.get(id) {
                    if !self.sent[id] {
                        self.sent[id] = true;
                        if p.c != self.type_a {
                            self.sent_b += 1;
                        }
                    }
                    out.push(Observed { slot, color: p.c });
                }
            }
            self.seen += 1;
        }
        out
    }

    pub fn untransmitted_b(&self) -> u64 {
        self.released_b - self.sent_b
    }

    pub fn next_id(&self) -> PacketId {
        self.released.len()
    }

    pub fn records(&self) -> Vec<PacketRecord> {
        self.released
            .iter()
            .map(|p| PacketRecord {
                r: p.r,
                d: p.d,
                c: p.c,
            })
            .collect()
    }
}

/// Slot counts of a schedule per block, used by the loss accounting.
pub fn block_counts(schedule: &Schedule, block: &BlockRecord) -> crate::sched::SlotCounts {
    schedule.counts_in(block.start, block.end)
}

pub(crate) fn distinct(colors: impl IntoIterator<Item = Color>) -> Vec<Color> {
    colors
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_and_roots() {
        assert_eq!(log2_ceil(2), 1);
        assert_eq!(log2_ceil(3), 2);
        assert_eq!(log2_ceil(4), 2);
        assert_eq!(log2_ceil(5), 3);
        assert_eq!(log2_ceil(1), 1);
        assert_eq!(ceil_sqrt_ratio(100, 1), 10);
        assert_eq!(ceil_sqrt_ratio(101, 1), 11);
        assert_eq!(ceil_sqrt_ratio(6400, 2), 57);
        assert_eq!(floor_sqrt_ratio(25, 9), 1);
        assert_eq!(floor_sqrt_ratio(36, 9), 2);
        assert_eq!(floor_sqrt_ratio(35, 9), 1);
        assert_eq!(floor_sqrt_ratio(0, 3), 0);
    }

    #[test]
    fn case_serializes_as_number() {
        assert_eq!(serde_json::to_string(&TerminationCase::Two).unwrap(), "2");
        assert_eq!(
            serde_json::from_str::<TerminationCase>("3").unwrap(),
            TerminationCase::Three
        );
        assert!(serde_json::from_str::<TerminationCase>("4").is_err());
    }
}
