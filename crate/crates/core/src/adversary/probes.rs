//! Deliberately simple policies that steer adversaries into specific
//! termination cases.

use crate::algorithms::EdfPolicy;
use crate::metric::{Color, TransitionGraph};
use crate::sched::{Packet, Policy, Slot, SlotAction};

/// Never transmits.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn name(&self) -> &str {
        "idle"
    }

    fn on_arrivals(&mut self, _slot: Slot, _packets: &[Packet]) {}

    fn choose_action(&mut self, _slot: Slot) -> SlotAction {
        SlotAction::Idle
    }
}

/// EDF that ignores every packet whose color is not in `colors`.
#[derive(Clone, Debug)]
pub struct ColorSubsetPolicy {
    inner: EdfPolicy,
    allowed: Vec<bool>,
}

impl ColorSubsetPolicy {
    pub fn new(graph: &TransitionGraph, colors: &[Color]) -> Self {
        let mut allowed = vec![false; graph.colors()];
        for &c in colors {
            allowed[c] = true;
        }
        ColorSubsetPolicy {
            inner: EdfPolicy::new(graph),
            allowed,
        }
    }
}

impl Policy for ColorSubsetPolicy {
    fn name(&self) -> &str {
        "color-subset"
    }

    fn on_arrivals(&mut self, slot: Slot, packets: &[Packet]) {
        let kept: Vec<Packet> = packets
            .iter()
            .filter(|p| self.allowed[p.c])
            .copied()
            .collect();
        self.inner.on_arrivals(slot, &kept);
    }

    fn choose_action(&mut self, slot: Slot) -> SlotAction {
        self.inner.choose_action(slot)
    }
}
