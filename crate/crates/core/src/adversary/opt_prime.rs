//! Offline schedules for adversary traces, their guaranteed throughput,
//! and the per-case loss accounting for the online policy.

use std::collections::HashSet;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{AdversaryError, AdversaryKind, AdversaryTrace, IdRange, TerminationCase};
use crate::metric::{best_tour, Color, TransitionGraph, Weight, TSP_EXACT_LIMIT};
use crate::sched::{validate_schedule, Packet, PacketId, Schedule, ScheduleBuilder};

/// Visiting order for `colors` starting from `from`: a rotation of the best
/// tour on the induced subgraph, picked to minimize the open path cost.
fn visit_order(g: &TransitionGraph, from: Option<Color>, colors: &[Color]) -> Vec<Color> {
    if colors.len() <= 1 {
        return colors.to_vec();
    }
    let sub = g.restrict(colors);
    let order: Vec<Color> = best_tour(&sub).order.iter().map(|&i| colors[i]).collect();
    let n = order.len();
    (0..n)
        .map(|s| {
            let rot: Vec<Color> = (0..n).map(|i| order[(s + i) % n]).collect();
            let entry = from.map_or(0, |f| if f == rot[0] { 0 } else { g.weight(f, rot[0]) });
            let path: Weight = rot.windows(2).map(|w| g.weight(w[0], w[1])).sum();
            (entry + path, rot)
        })
        .min()
        .map(|(_, rot)| rot)
        .expect("non-empty rotation set")
}

fn ids(range: IdRange) -> std::ops::Range<PacketId> {
    range[0]..range[1]
}

fn type_b_groups(trace: &AdversaryTrace) -> Vec<IdRange> {
    match trace.kind {
        AdversaryKind::Star | AdversaryKind::Metric => {
            trace.blocks.iter().map(|b| b.type_b).collect()
        }
        AdversaryKind::Directed => trace
            .blocks
            .iter()
            .flat_map(|b| b.regular_phases.iter().map(|p| p.type_b))
            .collect(),
    }
}

/// Builds the offline schedule for a finished trace.
///
/// Case 1: every group of type-B packets is served from its release slot,
/// colors in tour order; then the final type-B burst; then all type-A
/// packets. Cases 2 and 3: type-A packets only, one per slot.
pub fn opt_prime(trace: &AdversaryTrace) -> Result<Schedule, AdversaryError> {
    let case = trace
        .case
        .ok_or_else(|| AdversaryError::BadTrace("sequence has not terminated".into()))?;
    let instance = trace.instance()?;
    let g = &instance.graph;
    let packets: &[Packet] = &instance.packets;
    let mut b = ScheduleBuilder::new(g);

    if case == TerminationCase::One {
        for group in type_b_groups(trace) {
            let members = &packets[ids(group)];
            let Some(first) = members.first() else {
                continue;
            };
            b.idle_until(first.r);
            let colors = super::distinct(members.iter().map(|p| p.c));
            for c in visit_order(g, b.color(), &colors) {
                for p in members.iter().filter(|p| p.c == c) {
                    b.transmit(p);
                }
            }
        }
        let burst = &packets[ids(trace.final_packets)];
        if let Some(first) = burst.first() {
            b.idle_until(first.r);
        }
        for p in burst {
            b.transmit(p);
        }
    }
    for p in packets.iter().filter(|p| p.c == trace.type_a) {
        b.transmit(p);
    }

    let schedule = b.finish(instance.horizon);
    validate_schedule(&instance, &schedule).map_err(|v| {
        AdversaryError::Infeasible(
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    Ok(schedule)
}

pub fn opt_prime_star(trace: &AdversaryTrace) -> Result<Schedule, AdversaryError> {
    if trace.kind == AdversaryKind::Directed {
        return Err(AdversaryError::BadTrace(
            "expected a star or metric trace".into(),
        ));
    }
    opt_prime(trace)
}

pub fn opt_prime_directed(trace: &AdversaryTrace) -> Result<Schedule, AdversaryError> {
    if trace.kind != AdversaryKind::Directed {
        return Err(AdversaryError::BadTrace("expected a directed trace".into()));
    }
    opt_prime(trace)
}

/// Throughput the offline schedule is guaranteed to reach: `3L` in Cases 2
/// and 3; `Y - 2 w(S)` (star and metric) or `Y - (log C + 1) TSP`
/// (directed) in Case 1, where `Y` is the number of released packets.
pub fn opt_prime_bound(trace: &AdversaryTrace) -> Result<Rational64, AdversaryError> {
    let case = trace
        .case
        .ok_or_else(|| AdversaryError::BadTrace("sequence has not terminated".into()))?;
    let int = |x: u64| Rational64::from_integer(x as i64);
    if case != TerminationCase::One {
        return Ok(int(3 * trace.laxity));
    }
    let y = int(trace.packets.len() as u64);
    match trace.kind {
        AdversaryKind::Star | AdversaryKind::Metric => {
            let w = trace
                .star_weight()
                .ok_or_else(|| AdversaryError::BadTrace("star weights missing".into()))?;
            Ok(y - w * 2)
        }
        AdversaryKind::Directed => {
            let (Some(log_c), Some(tsp)) = (trace.log_c, trace.tsp) else {
                return Err(AdversaryError::BadTrace(
                    "directed parameters missing".into(),
                ));
            };
            Ok(y - int((log_c + 1) * tsp))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossCheck {
    pub what: String,
    pub measured: u64,
    /// Lower bound on `measured`, as a rational string.
    pub required: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossReport {
    pub case: TerminationCase,
    pub checks: Vec<LossCheck>,
}

impl LossReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn check(what: String, measured: u64, required: Rational64) -> LossCheck {
    LossCheck {
        what,
        measured,
        required: required.to_string(),
        holds: Rational64::from_integer(measured as i64) >= required,
    }
}

/// What the online policy must have lost, measured from its schedule:
/// Case 1 drops at least `budget/2 - 1` type-B packets; Case 2 leaves at
/// least `F` slots of the last block without a transmission (directed:
/// `H log C` slots of a phase without a type-A transmission); Case 3
/// spends at least `w(S)/2` transition slots over every pair of
/// consecutive blocks (directed: `TSP` per block).
pub fn loss_accounting(
    trace: &AdversaryTrace,
    schedule: &Schedule,
) -> Result<LossReport, AdversaryError> {
    let case = trace
        .case
        .ok_or_else(|| AdversaryError::BadTrace("sequence has not terminated".into()))?;
    let int = |x: u64| Rational64::from_integer(x as i64);
    let sent: HashSet<PacketId> = schedule.transmissions().map(|(_, id)| id).collect();
    let mut checks = Vec::new();
    match case {
        TerminationCase::One => {
            let (mut released, mut delivered) = (0u64, 0u64);
            for (id, p) in trace.packets.iter().enumerate() {
                if trace.is_type_b(p.c) {
                    released += 1;
                    delivered += sent.contains(&id) as u64;
                }
            }
            checks.push(check(
                "type-B packets dropped".into(),
                released - delivered,
                Rational64::new(trace.budget as i64, 2) - 1,
            ));
        }
        TerminationCase::Two => {
            let block = trace
                .blocks
                .last()
                .ok_or_else(|| AdversaryError::BadTrace("no blocks".into()))?;
            if trace.kind == AdversaryKind::Directed {
                let log_c = trace.log_c.unwrap_or(1);
                let side = if block.a_in_start_phase == Some(false) {
                    ("start", block.start_phase)
                } else {
                    ("end", block.end_phase)
                };
                let [from, to] = side
                    .1
                    .ok_or_else(|| AdversaryError::BadTrace("phase bounds missing".into()))?;
                let c = schedule.counts_in(from, to);
                checks.push(check(
                    format!(
                        "slots without transmission in the {} phase of block {}",
                        side.0, block.index
                    ),
                    c.idle + c.transition,
                    int(trace.budget * log_c),
                ));
            } else {
                let c = schedule.counts_in(block.start, block.end);
                checks.push(check(
                    format!("slots without transmission in block {}", block.index),
                    c.idle + c.transition,
                    int(trace.budget),
                ));
            }
        }
        TerminationCase::Three => {
            if trace.kind == AdversaryKind::Directed {
                let g = trace.graph()?;
                if g.colors() <= TSP_EXACT_LIMIT {
                    let tsp = trace.tsp.unwrap_or(0);
                    for block in &trace.blocks {
                        checks.push(check(
                            format!("transition slots in block {}", block.index),
                            schedule.counts_in(block.start, block.end).transition,
                            int(tsp),
                        ));
                    }
                }
            } else {
                let w = trace
                    .star_weight()
                    .ok_or_else(|| AdversaryError::BadTrace("star weights missing".into()))?;
                for pair in trace.blocks.windows(2) {
                    checks.push(check(
                        format!(
                            "transition slots in blocks {} and {}",
                            pair[0].index, pair[1].index
                        ),
                        schedule.counts_in(pair[0].start, pair[1].end).transition,
                        w / 2,
                    ));
                }
            }
        }
    }
    Ok(LossReport { case, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{
        run_adversary, ColorSubsetPolicy, DirectedAdversary, IdlePolicy, StarAdversary,
    };
    use crate::metric::StarMetric;

    #[test]
    fn star_cases_meet_bounds() {
        let s = StarMetric::from_integers(&[0, 2], 0).unwrap();
        let g = s.to_transition_graph();
        let policies: Vec<(TerminationCase, Box<dyn crate::sched::Policy>)> = vec![
            (TerminationCase::One, Box::new(IdlePolicy)),
            (
                TerminationCase::Two,
                Box::new(ColorSubsetPolicy::new(&g, &[1])),
            ),
        ];
        for (expected, mut policy) in policies {
            let mut adv = StarAdversary::new(&s, 50, false).unwrap();
            let (run, trace) = run_adversary(&mut adv, &mut policy).unwrap();
            assert_eq!(trace.case, Some(expected));
            let opt = opt_prime_star(&trace).unwrap();
            let bound = opt_prime_bound(&trace).unwrap();
            assert!(Rational64::from_integer(opt.throughput() as i64) >= bound);
            if expected == TerminationCase::Two {
                assert_eq!(opt.throughput(), 150);
            } else {
                assert_eq!(
                    bound,
                    Rational64::from_integer(trace.packets.len() as i64 - 4)
                );
            }
            let report = loss_accounting(&trace, &run.schedule).unwrap();
            assert!(report.holds(), "{report:?}");
        }
    }

    #[test]
    fn directed_case_one_meets_bound() {
        let g = TransitionGraph::from_rows(
            vec![
                vec![0, 1, 2, 3],
                vec![3, 0, 1, 2],
                vec![2, 3, 0, 1],
                vec![1, 2, 3, 0],
            ],
            true,
        )
        .unwrap();
        let mut adv = DirectedAdversary::new(&g, 400, false).unwrap();
        let (run, trace) = run_adversary(&mut adv, &mut IdlePolicy).unwrap();
        let opt = opt_prime_directed(&trace).unwrap();
        assert!(
            Rational64::from_integer(opt.throughput() as i64) >= opt_prime_bound(&trace).unwrap()
        );
        assert!(loss_accounting(&trace, &run.schedule).unwrap().holds());
        assert!(opt_prime_star(&trace).is_err());
    }

    #[test]
    fn visit_order_starts_near_current_color() {
        let g =
            TransitionGraph::from_rows(vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]], false)
                .unwrap();
        assert_eq!(visit_order(&g, Some(2), &[0, 1, 2])[0], 2);
        assert_eq!(visit_order(&g, None, &[1]), vec![1]);
    }
}
