//! Exact offline optimum for small instances.
//!
//! For a fixed transmission order the earliest-possible schedule is
//! optimal, and an earlier finishing slot never hurts what can follow. So
//! the search keeps, for every (transmitted set, last packet) pair, the
//! earliest next free slot, and the answer is the largest reachable set.

use serde::{Deserialize, Serialize};

use crate::sched::{validate_schedule, Instance, Schedule, ScheduleBuilder, Slot};

pub const ORACLE_MAX_PACKETS: usize = 15;
pub const ORACLE_MAX_HORIZON: Slot = 10_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle handles at most {limit} packets, got {got}")]
    TooManyPackets { limit: usize, got: usize },
    #[error("oracle handles horizons up to {limit}, got {got}")]
    HorizonTooLong { limit: Slot, got: Slot },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub opt: u64,
    #[serde(skip)]
    pub schedule: Schedule,
    /// Number of reachable (set, last packet) states.
    pub explored: usize,
}

const UNREACHED: Slot = Slot::MAX;

/// Maximum feasible throughput with a witness schedule. Among optimal
/// sets the witness prefers the earliest finish, then the smallest set
/// bitmask.
pub fn offline_opt(instance: &Instance) -> Result<OracleResult, OracleError> {
    let n = instance.packets.len();
    if n > ORACLE_MAX_PACKETS {
        return Err(OracleError::TooManyPackets {
            limit: ORACLE_MAX_PACKETS,
            got: n,
        });
    }
    if instance.horizon > ORACLE_MAX_HORIZON {
        return Err(OracleError::HorizonTooLong {
            limit: ORACLE_MAX_HORIZON,
            got: instance.horizon,
        });
    }
    let g = &instance.graph;
    let ps = &instance.packets;
    let full = 1usize << n;
    let at = |mask: usize, last: usize| mask * n + last;
    // next[mask * n + last]: earliest free slot after transmitting `mask`
    // with packet `last` transmitted most recently.
    let mut next = vec![UNREACHED; full * n];
    let mut pred: Vec<u32> = vec![u32::MAX; full * n];
    let mut explored = 0;

    for (q, p) in ps.iter().enumerate() {
        next[at(1 << q, q)] = p.r + 1;
    }
    for mask in 1..full {
        for last in 0..n {
            let free = next[at(mask, last)];
            if free == UNREACHED {
                continue;
            }
            explored += 1;
            let c = ps[last].c;
            for (q, p) in ps.iter().enumerate() {
                if mask & (1 << q) != 0 {
                    continue;
                }
                let switch = if p.c == c { 0 } else { g.weight(c, p.c) };
                let s = (free + switch).max(p.r);
                if s > p.d {
                    continue;
                }
                let i = at(mask | (1 << q), q);
                if s + 1 < next[i] {
                    next[i] = s + 1;
                    pred[i] = last as u32;
                }
            }
        }
    }

    let mut best: Option<(
        u32,
        std::cmp::Reverse<Slot>,
        std::cmp::Reverse<usize>,
        usize,
    )> = None;
    for mask in 1..full {
        for last in 0..n {
            let free = next[at(mask, last)];
            if free == UNREACHED {
                continue;
            }
            let key = (
                mask.count_ones(),
                std::cmp::Reverse(free),
                std::cmp::Reverse(mask),
                last,
            );
            if best
                .as_ref()
                .is_none_or(|b| (key.0, key.1, key.2) > (b.0, b.1, b.2))
            {
                best = Some(key);
            }
        }
    }

    let mut order = Vec::new();
    if let Some((_, _, std::cmp::Reverse(mut mask), mut last)) = best {
        loop {
            order.push(last);
            let p = pred[at(mask, last)];
            mask &= !(1 << last);
            if mask == 0 {
                break;
            }
            last = p as usize;
        }
        order.reverse();
    }

    let mut builder = ScheduleBuilder::new(g);
    for &q in &order {
        builder
            .transmit(&ps[q])
            .expect("reconstructed order replays greedily");
    }
    let schedule = builder.finish(instance.horizon);
    let opt = validate_schedule(instance, &schedule).expect("oracle witness is feasible");
    debug_assert_eq!(opt as usize, order.len());
    Ok(OracleResult {
        opt,
        schedule,
        explored,
    })
}

/// Convenience: the optimum only, `None` when out of capacity.
pub fn try_opt(instance: &Instance) -> Option<u64> {
    offline_opt(instance).ok().map(|r| r.opt)
}
