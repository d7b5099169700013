//! Block adversary for star metrics, and its metric-space version through
//! the Prim embedding.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{
    ceil_sqrt_ratio, floor_sqrt_ratio, Adversary, AdversaryError, AdversaryKind, AdversaryTrace,
    BlockRecord, Ledger, TerminationCase,
};
use crate::embedding::embed_prim;
use crate::metric::{Color, StarMetric, TransitionGraph};
use crate::sched::{Packet, PacketSource, Slot, SlotAction};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarAdversaryParams {
    pub type_a: Color,
    pub type_b: Vec<Color>,
    /// Type-B packets per block, `ceil(sqrt(w(S) L))`.
    pub f: u64,
    /// Maximum number of blocks.
    pub n: u64,
    pub block_len: u64,
    pub laxity: u64,
    pub requested_laxity: u64,
    pub clamped: bool,
    /// Type-B packets per color and block (indexed by color).
    pub counts: Vec<u64>,
}

/// `(F, N)` for weight `p/q` and laxity `l`, if at least one block fits.
fn block_shape(p: u128, q: u128, l: u64) -> Option<(u64, u64)> {
    let f = ceil_sqrt_ratio(p * l as u128, q);
    if f == 0 {
        return None;
    }
    let n = floor_sqrt_ratio(l as u128 * q, 9 * p).min(l / (3 * f));
    (n >= 1).then_some((f, n))
}

/// Splits `f` over the colors in proportion to `weights` by largest
/// remainder; ties go to the smaller color.
fn apportion(weights: &[(Color, Rational64)], f: u64, colors: usize) -> Vec<u64> {
    let total: Rational64 = weights.iter().map(|w| w.1).sum();
    let mut counts = vec![0u64; colors];
    let mut rems = Vec::with_capacity(weights.len());
    let mut assigned = 0;
    for &(c, w) in weights {
        let share = w * Rational64::from_integer(f as i64) / total;
        let base = share.floor().to_integer() as u64;
        counts[c] = base;
        assigned += base;
        rems.push((share - share.floor(), c));
    }
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in rems.iter().take((f - assigned) as usize) {
        counts[c] += 1;
    }
    counts
}

impl StarAdversaryParams {
    /// Derives `F`, `N` and the per-color counts. When the laxity is too
    /// small for a single block (which includes `w(S) >= L`), `clamp`
    /// raises it to the smallest laxity that admits one; otherwise this is
    /// an error.
    pub fn new(star: &StarMetric, laxity: u64, clamp: bool) -> Result<Self, AdversaryError> {
        let colors = star.leaves();
        if colors < 2 {
            return Err(AdversaryError::Config(
                "the star adversary needs at least two colors".into(),
            ));
        }
        let total = star.total();
        if total <= Rational64::from_integer(0) {
            return Err(AdversaryError::Config(
                "star weight must be positive".into(),
            ));
        }
        if laxity == 0 {
            return Err(AdversaryError::Config("laxity must be positive".into()));
        }
        let (p, q) = (*total.numer() as u128, *total.denom() as u128);
        let mut l = laxity;
        let mut shape = block_shape(p, q, l);
        if p >= q * laxity as u128 && !clamp {
            return Err(AdversaryError::Config(format!(
                "w(S) = {total} is not below the laxity {laxity}; enable clamping"
            )));
        }
        if shape.is_none() {
            if !clamp {
                return Err(AdversaryError::Config(format!(
                    "laxity {laxity} is too small for one block with w(S) = {total}; enable clamping"
                )));
            }
            while shape.is_none() {
                l += 1;
                shape = block_shape(p, q, l);
            }
        }
        let (f, n) = shape.expect("shape found");
        let root = star.root();
        let type_b: Vec<Color> = (0..colors).filter(|&c| c != root).collect();
        let weights: Vec<(Color, Rational64)> =
            type_b.iter().map(|&c| (c, star.weight(c))).collect();
        let counts = apportion(&weights, f, colors);
        Ok(StarAdversaryParams {
            type_a: root,
            type_b,
            f,
            n,
            block_len: 3 * f,
            laxity: l,
            requested_laxity: laxity,
            clamped: l != laxity,
            counts,
        })
    }

    /// First slot of block `i` (1-based): `1 + 3(i-1)F`.
    pub fn block_start(&self, i: u64) -> Slot {
        1 + 3 * (i - 1) * self.f
    }

    pub fn horizon(&self) -> Slot {
        3 * self.laxity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Block { index: u64, start: Slot },
    Filler,
    Done,
}

/// Adaptive star sequence. Each block of `3F` slots opens with `F` type-B
/// packets and carries one type-A packet per slot. At the end of a block
/// the adversary stops if half a block's worth of type-B packets is still
/// pending, or if the policy transmitted at most `2F` packets; after `N`
/// blocks it stops regardless.
#[derive(Clone, Debug)]
pub struct StarAdversary {
    kind: AdversaryKind,
    graph: TransitionGraph,
    star: StarMetric,
    params: StarAdversaryParams,
    ledger: Ledger,
    state: State,
    blocks: Vec<BlockRecord>,
    case: Option<TerminationCase>,
    final_event: Option<Slot>,
    final_packets: [usize; 2],
}

impl StarAdversary {
    pub fn new(star: &StarMetric, laxity: u64, clamp: bool) -> Result<Self, AdversaryError> {
        let params = StarAdversaryParams::new(star, laxity, clamp)?;
        Ok(Self::build(
            AdversaryKind::Star,
            star.to_transition_graph(),
            star.clone(),
            params,
        ))
    }

    pub fn from_params(star: &StarMetric, params: StarAdversaryParams) -> Self {
        Self::build(
            AdversaryKind::Star,
            star.to_transition_graph(),
            star.clone(),
            params,
        )
    }

    fn build(
        kind: AdversaryKind,
        graph: TransitionGraph,
        star: StarMetric,
        params: StarAdversaryParams,
    ) -> Self {
        StarAdversary {
            kind,
            graph,
            ledger: Ledger::new(params.type_a),
            star,
            params,
            state: State::Block { index: 1, start: 1 },
            blocks: Vec::new(),
            case: None,
            final_event: None,
            final_packets: [0, 0],
        }
    }

    pub fn params(&self) -> &StarAdversaryParams {
        &self.params
    }

    pub fn star(&self) -> &StarMetric {
        &self.star
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

    fn close_block(&mut self, t: Slot) -> (bool, bool) {
        let f = self.params.f;
        let untransmitted = self.ledger.untransmitted_b();
        let block = self.blocks.last_mut().expect("a block is open");
        block.end = t - 1;
        block.untransmitted_b = untransmitted;
        let c1 = 2 * untransmitted >= f;
        let c2 = block.transmitted <= 2 * f;
        block.condition1 = Some(c1);
        block.condition2 = Some(c2);
        (c1, c2)
    }
}

/// Metric adversary: the star sequence for the Prim embedding of `g`
/// rooted at `v0`, played on `g` itself.
pub fn metric_adversary(
    g: &TransitionGraph,
    v0: Color,
    laxity: u64,
    clamp: bool,
) -> Result<StarAdversary, AdversaryError> {
    let embedded = embed_prim(g, v0)?;
    let params = StarAdversaryParams::new(&embedded.star, laxity, clamp)?;
    Ok(StarAdversary::build(
        AdversaryKind::Metric,
        g.clone(),
        embedded.star,
        params,
    ))
}

impl PacketSource for StarAdversary {
    fn graph(&self) -> &TransitionGraph {
        &self.graph
    }

    fn horizon(&self) -> Slot {
        self.params.horizon()
    }

    fn releases(&mut self, t: Slot, history: &[SlotAction]) -> Vec<Packet> {
        let seen = self.ledger.observe(history);
        if let (State::Block { start, .. }, Some(block)) = (self.state, self.blocks.last_mut()) {
            block.transmitted += seen.iter().filter(|o| o.slot >= start).count() as u64;
        }
        let l = self.params.laxity;
        let a = self.params.type_a;
        let mut out = Vec::new();

        if let State::Block { index, start } = self.state {
            if t == start + self.params.block_len {
                let (c1, c2) = self.close_block(t);
                if c1 {
                    let first_b = self.params.type_b[0];
                    self.finish(TerminationCase::One, t, l, l + t, first_b, &mut out);
                } else if c2 {
                    self.finish(TerminationCase::Two, t, 3 * l, 3 * l, a, &mut out);
                } else if index == self.params.n {
                    self.state = State::Filler;
                } else {
                    self.state = State::Block {
                        index: index + 1,
                        start: t,
                    };
                }
            }
        }
        match self.state {
            State::Block { index, start } => {
                if t == start {
                    let first = self.ledger.next_id();
                    for &c in &self.params.type_b {
                        for _ in 0..self.params.counts[c] {
                            self.ledger.release(t, l + t, c, &mut out);
                        }
                    }
                    self.blocks.push(BlockRecord {
                        index,
                        start,
                        type_b: [first, self.ledger.next_id()],
                        ..Default::default()
                    });
                }
                self.ledger.release(t, 3 * l, a, &mut out);
            }
            State::Filler => {
                if t <= l {
                    self.ledger.release(t, 3 * l, a, &mut out);
                } else {
                    self.finish(TerminationCase::Three, t, 2 * l, 3 * l, a, &mut out);
                }
            }
            State::Done => {}
        }
        out
    }
}

impl Adversary for StarAdversary {
    fn trace(&self) -> AdversaryTrace {
        AdversaryTrace {
            kind: self.kind,
            metric: self.graph.to_file(),
            packets: self.ledger.records(),
            horizon: self.params.horizon(),
            laxity: self.params.laxity,
            requested_laxity: self.params.requested_laxity,
            clamped: self.params.clamped,
            type_a: self.params.type_a,
            type_b: self.params.type_b.clone(),
            budget: self.params.f,
            max_blocks: self.params.n,
            log_c: None,
            star: Some(self.star.to_file()),
            tsp: None,
            blocks: self.blocks.clone(),
            case: self.case,
            final_event: self.final_event,
            final_packets: self.final_packets,
        }
    }
}
