//! Block adversary for directed transition graphs. A block is a start
//! phase, up to `log C` regular phases that each release type-B packets on
//! the colors the policy has not touched yet in this block, and an end
//! phase.

use serde::{Deserialize, Serialize};

use super::{
    ceil_sqrt_ratio, floor_sqrt_ratio, log2_ceil, Adversary, AdversaryError, AdversaryKind,
    AdversaryTrace, BlockRecord, Ledger, RegularPhase, TerminationCase,
};
use crate::metric::{best_tour, Color, TransitionGraph, Weight};
use crate::sched::{Packet, PacketSource, Slot, SlotAction};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedAdversaryParams {
    pub tsp: Weight,
    pub log_c: u64,
    /// Regular phase length and type-B budget per phase.
    pub h: u64,
    pub n: u64,
    /// Length of the start and end phases, `2 H log C`.
    pub side_len: u64,
    pub laxity: u64,
    pub requested_laxity: u64,
    pub clamped: bool,
    pub colors: usize,
}

fn phase_shape(tsp: u128, log_c: u128, colors: usize, l: u64) -> Option<(u64, u64)> {
    let h = ceil_sqrt_ratio(tsp * l as u128, log_c);
    if h == 0 {
        return None;
    }
    let n = floor_sqrt_ratio(l as u128, 25 * tsp * log_c).min(l / (5 * h * log_c as u64));
    let r = colors as u64 - 1;
    (n >= 1 && h >= r * r).then_some((h, n))
}

impl DirectedAdversaryParams {
    /// `H = ceil(sqrt(TSP L / log C))` and `N = floor(sqrt(L / (TSP log C)) / 5)`,
    /// with `N` also capped so that every block fits before slot `L + 1`.
    /// `H` must be at least `(C-1)^2` so that each regular phase halves the
    /// remaining colors. With `clamp`, a laxity that violates any of this
    /// is raised to the smallest one that works.
    pub fn new(g: &TransitionGraph, laxity: u64, clamp: bool) -> Result<Self, AdversaryError> {
        let colors = g.colors();
        if colors < 2 {
            return Err(AdversaryError::Config(
                "the directed adversary needs at least two colors".into(),
            ));
        }
        if laxity == 0 {
            return Err(AdversaryError::Config("laxity must be positive".into()));
        }
        let tsp = best_tour(g).weight;
        if tsp == 0 {
            return Err(AdversaryError::Config(
                "tour weight must be positive".into(),
            ));
        }
        let log_c = log2_ceil(colors);
        if tsp * log_c >= laxity && !clamp {
            return Err(AdversaryError::Config(format!(
                "TSP * log C = {} is not below the laxity {laxity}; enable clamping",
                tsp * log_c
            )));
        }
        let mut l = laxity;
        let mut shape = phase_shape(tsp as u128, log_c as u128, colors, l);
        if shape.is_none() {
            if !clamp {
                return Err(AdversaryError::Config(format!(
                    "laxity {laxity} is too small for one block (TSP = {tsp}, C = {colors}); enable clamping"
                )));
            }
            while shape.is_none() {
                l += 1;
                shape = phase_shape(tsp as u128, log_c as u128, colors, l);
            }
        }
        let (h, n) = shape.expect("shape found");
        Ok(DirectedAdversaryParams {
            tsp,
            log_c,
            h,
            n,
            side_len: 2 * h * log_c,
            laxity: l,
            requested_laxity: laxity,
            clamped: l != laxity,
            colors,
        })
    }

    pub fn horizon(&self) -> Slot {
        3 * self.laxity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Start { index: u64, start: Slot },
    Regular { index: u64, start: Slot },
    End { index: u64, start: Slot },
    Filler,
    Done,
}

#[derive(Clone, Debug)]
pub struct DirectedAdversary {
    graph: TransitionGraph,
    params: DirectedAdversaryParams,
    ledger: Ledger,
    state: State,
    blocks: Vec<BlockRecord>,
    remaining: Vec<Color>,
    case: Option<TerminationCase>,
    final_event: Option<Slot>,
    final_packets: [usize; 2],
}

const TYPE_A: Color = 0;
const FIRST_B: Color = 1;

impl DirectedAdversary {
    pub fn new(g: &TransitionGraph, laxity: u64, clamp: bool) -> Result<Self, AdversaryError> {
        let params = DirectedAdversaryParams::new(g, laxity, clamp)?;
        Ok(DirectedAdversary {
            graph: g.clone(),
            params,
            ledger: Ledger::new(TYPE_A),
            state: State::Start { index: 1, start: 1 },
            blocks: Vec::new(),
            remaining: Vec::new(),
            case: None,
            final_event: None,
            final_packets: [0, 0],
        })
    }

    pub fn params(&self) -> &DirectedAdversaryParams {
        &self.params
    }

    fn finish(
        &mut self,
        case: TerminationCase,
        t: Slot,
        count: u64,
        d: Slot,
        c: Color,
        out: &mut Vec<Packet>,
    ) {
        let first = self.ledger.next_id();
        for _ in 0..count {
            self.ledger.release(t, d, c, out);
        }
        self.final_packets = [first, self.ledger.next_id()];
        self.case = Some(case);
        self.final_event = Some(t);
        self.state = State::Done;
    }

    fn block(&mut self) -> &mut BlockRecord {
        self.blocks.last_mut().expect("a block is open")
    }

    fn record(&mut self, slot: Slot, color: Color) {
        let state = self.state;
        let block = match self.blocks.last_mut() {
            Some(b) if b.end == 0 => b,
            _ => return,
        };
        match state {
            State::Start { .. } => {
                block.transmitted += 1;
                if color == TYPE_A {
                    block.a_in_start_phase = Some(true);
                }
            }
            State::Regular { start, .. } if slot >= start => {
                block.transmitted += 1;
                if color != TYPE_A {
                    let phase = block.regular_phases.last_mut().expect("a phase is open");
                    if !phase.transmitted_colors.contains(&color) {
                        phase.transmitted_colors.push(color);
                    }
                }
            }
            State::End { .. } => {
                block.transmitted += 1;
                if color == TYPE_A {
                    block.a_in_end_phase = Some(true);
                }
            }
            _ => {}
        }
    }

    fn open_phase(&mut self, t: Slot) -> Vec<Packet> {
        let mut out = Vec::new();
        let l = self.params.laxity;
        let per = self.params.h / self.remaining.len() as u64;
        let first = self.ledger.next_id();
        for &c in &self.remaining {
            for _ in 0..per {
                self.ledger.release(t, l + t, c, &mut out);
            }
        }
        let end = self.ledger.next_id();
        let colors = self.remaining.clone();
        let block = self.block();
        if block.regular_phases.is_empty() {
            block.type_b[0] = first;
        }
        block.type_b[1] = end;
        block.regular_phases.push(RegularPhase {
            start: t,
            colors,
            type_b: [first, end],
            ..Default::default()
        });
        out
    }
}

impl PacketSource for DirectedAdversary {
    fn graph(&self) -> &TransitionGraph {
        &self.graph
    }

    fn horizon(&self) -> Slot {
        self.params.horizon()
    }

    fn releases(&mut self, t: Slot, history: &[SlotAction]) -> Vec<Packet> {
        for o in self.ledger.observe(history) {
            self.record(o.slot, o.color);
        }
        let l = self.params.laxity;
        let (h, side) = (self.params.h, self.params.side_len);
        let mut out = Vec::new();

        match self.state {
            State::Start { index, start } if t == start + side => {
                self.block().start_phase = Some([start, t - 1]);
                self.state = State::Regular { index, start: t };
                out.extend(self.open_phase(t));
            }
            State::Regular { index, start } if t == start + h => {
                let untransmitted = self.ledger.untransmitted_b();
                let block = self.block();
                let phase = block.regular_phases.last_mut().expect("a phase is open");
                phase.end = t - 1;
                phase.untransmitted_b = untransmitted;
                phase.condition_i1 = 2 * untransmitted >= h;
                let i1 = phase.condition_i1;
                let done = phase.transmitted_colors.clone();
                if i1 {
                    block.end = t - 1;
                    block.untransmitted_b = untransmitted;
                    self.finish(TerminationCase::One, t, l, l + t, FIRST_B, &mut out);
                } else {
                    self.remaining.retain(|c| !done.contains(c));
                    if self.remaining.is_empty() {
                        self.state = State::End { index, start: t };
                    } else {
                        self.state = State::Regular { index, start: t };
                        out.extend(self.open_phase(t));
                    }
                }
            }
            State::End { index, start } if t == start + side => {
                let untransmitted = self.ledger.untransmitted_b();
                let block = self.block();
                block.end = t - 1;
                block.untransmitted_b = untransmitted;
                block.end_phase = Some([start, t - 1]);
                let a_start = block.a_in_start_phase.unwrap_or(false);
                let a_end = block.a_in_end_phase.unwrap_or(false);
                block.a_in_start_phase = Some(a_start);
                block.a_in_end_phase = Some(a_end);
                let i2 = !a_start || !a_end;
                block.condition_i2 = Some(i2);
                if i2 {
                    self.finish(TerminationCase::Two, t, 3 * l, 3 * l, TYPE_A, &mut out);
                } else if index == self.params.n {
                    self.state = State::Filler;
                } else {
                    self.state = State::Start {
                        index: index + 1,
                        start: t,
                    };
                }
            }
            _ => {}
        }

        match self.state {
            State::Start { index, start } => {
                if t == start {
                    self.blocks.push(BlockRecord {
                        index,
                        start,
                        ..Default::default()
                    });
                    self.remaining = (FIRST_B..self.params.colors).collect();
                }
                self.ledger.release(t, 3 * l, TYPE_A, &mut out);
            }
            State::Regular { .. } | State::End { .. } => {
                self.ledger.release(t, 3 * l, TYPE_A, &mut out);
            }
            State::Filler => {
                if t <= l {
                    self.ledger.release(t, 3 * l, TYPE_A, &mut out);
                } else {
                    self.finish(TerminationCase::Three, t, 2 * l, 3 * l, TYPE_A, &mut out);
                }
            }
            State::Done => {}
        }
        out
    }
}

impl Adversary for DirectedAdversary {
    fn trace(&self) -> AdversaryTrace {
        AdversaryTrace {
            kind: AdversaryKind::Directed,
            metric: self.graph.to_file(),
            packets: self.ledger.records(),
            horizon: self.params.horizon(),
            laxity: self.params.laxity,
            requested_laxity: self.params.requested_laxity,
            clamped: self.params.clamped,
            type_a: TYPE_A,
            type_b: (FIRST_B..self.params.colors).collect(),
            budget: self.params.h,
            max_blocks: self.params.n,
            log_c: Some(self.params.log_c),
            star: None,
            tsp: Some(self.params.tsp),
            blocks: self.blocks.clone(),
            case: self.case,
            final_event: self.final_event,
            final_packets: self.final_packets,
        }
    }
}
