//! Metric-to-star embedding built from a Prim tree, and the exhaustive
//! Steiner-tree oracle that checks its dominance property.
//!
//! Each leaf `u` of the star gets the weight of the Prim edge that attached
//! `u` to the tree grown from `v0`. Two properties hold:
//!
//! 1. `w(S) = MST(G)`;
//! 2. for every `V'` containing `v0`, the Steiner tree of `V'` in `G` weighs
//!    at least `w_S(V')`.
//!
//! [`replay_exchange`] runs the exchange argument behind property 2 step by
//! step, starting from an exact Steiner tree and swapping in Prim edges, so
//! the argument itself can be tested.

use std::collections::{BTreeSet, VecDeque};

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{prim_mst, MetricError, StarMetric, TransitionGraph, Weight};

/// Exhaustive Steiner search is limited to this many colors.
pub const STEINER_LIMIT: usize = 10;
/// Limit used by the sampling mode of [`verify_embedding`].
const STEINER_SAMPLE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbedResult {
    pub star: StarMetric,
    pub root: usize,
    /// Prim edges `(parent, u_i)` in the order they were chosen.
    pub trace: Vec<(usize, usize)>,
}

/// Builds the star from the Prim tree rooted at `v0`.
pub fn embed_prim(g: &TransitionGraph, v0: usize) -> Result<EmbedResult, MetricError> {
    g.require_symmetric("embed_prim")?;
    let tree = prim_mst(g, v0)?;
    let weights = tree
        .edge_weight
        .iter()
        .map(|&w| Rational64::from_integer(w as i64))
        .collect();
    let star = StarMetric::new(weights, v0)?;
    let trace = tree.edges().map(|(p, u, _)| (p, u)).collect();
    Ok(EmbedResult {
        star,
        root: v0,
        trace,
    })
}

/// An undirected edge with `a < b`.
pub type Edge = (usize, usize);

fn edge(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Minimum spanning tree of the subgraph induced by `nodes` (given as a
/// sorted list). Returns weight and edges.
fn mst_on(g: &TransitionGraph, nodes: &[usize]) -> (Weight, Vec<Edge>) {
    if nodes.len() <= 1 {
        return (0, Vec::new());
    }
    let sub = g.restrict(nodes);
    let tree = prim_mst(&sub, 0).expect("restriction of a symmetric graph");
    let edges = tree
        .edges()
        .map(|(p, u, _)| edge(nodes[p], nodes[u]))
        .collect();
    (tree.total_weight, edges)
}

/// Steiner tree on `terminals`: the cheapest MST over all supersets.
/// Exact on complete metric graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteinerTree {
    pub weight: Weight,
    pub nodes: Vec<usize>,
    pub edges: Vec<Edge>,
}

fn steiner_search(
    g: &TransitionGraph,
    terminals: &[usize],
    limit: usize,
) -> Result<SteinerTree, MetricError> {
    g.require_symmetric("steiner_bruteforce")?;
    let c = g.colors();
    if c > limit {
        return Err(MetricError::Capacity {
            op: "steiner_bruteforce",
            limit,
            got: c,
            hint: "exhaustive Steiner search is exponential in the color count",
        });
    }
    for &t in terminals {
        g.check_node(t)?;
    }
    let required: BTreeSet<usize> = terminals.iter().copied().collect();
    if required.is_empty() {
        return Err(MetricError::InvalidStar(
            "Steiner terminal set is empty".into(),
        ));
    }
    let optional: Vec<usize> = (0..c).filter(|v| !required.contains(v)).collect();
    let mut best: Option<SteinerTree> = None;
    for mask in 0u32..(1 << optional.len()) {
        let mut nodes: Vec<usize> = required.iter().copied().collect();
        nodes.extend(
            optional
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v),
        );
        nodes.sort_unstable();
        let (weight, edges) = mst_on(g, &nodes);
        if best.as_ref().is_none_or(|b| weight < b.weight) {
            best = Some(SteinerTree {
                weight,
                nodes,
                edges,
            });
        }
    }
    Ok(best.expect("at least the empty superset was tried"))
}

/// Exact Steiner tree by enumerating Steiner points (C <= 10).
pub fn steiner_tree_bruteforce(
    g: &TransitionGraph,
    terminals: &[usize],
) -> Result<SteinerTree, MetricError> {
    steiner_search(g, terminals, STEINER_LIMIT)
}

/// `T_G(V')`, the weight of the minimum Steiner tree on `terminals`.
pub fn steiner_bruteforce(g: &TransitionGraph, terminals: &[usize]) -> Result<Weight, MetricError> {
    steiner_tree_bruteforce(g, terminals).map(|t| t.weight)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub subset: Vec<usize>,
    pub steiner: Weight,
    pub star_weight: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub subsets_checked: usize,
    pub exhaustive: bool,
    pub total_matches_mst: bool,
    pub violations: Vec<DominanceViolation>,
}

impl EmbeddingReport {
    pub fn is_ok(&self) -> bool {
        self.total_matches_mst && self.violations.is_empty()
    }
}

/// Checks both embedding properties. With `C <= 10` every subset containing
/// `v0` is checked; larger graphs check `subset_budget` random subsets drawn
/// with `seed`.
pub fn verify_embedding(
    g: &TransitionGraph,
    v0: usize,
    result: &EmbedResult,
    subset_budget: usize,
    seed: u64,
) -> Result<EmbeddingReport, MetricError> {
    let c = g.colors();
    let mst = prim_mst(g, v0)?.total_weight;
    let mut report = EmbeddingReport {
        total_matches_mst: result.star.total() == Rational64::from_integer(mst as i64),
        exhaustive: c <= STEINER_LIMIT,
        ..Default::default()
    };
    let others: Vec<usize> = (0..c).filter(|&v| v != v0).collect();
    let mut check = |subset: Vec<usize>, limit: usize| -> Result<(), MetricError> {
        let steiner = steiner_search(g, &subset, limit)?.weight;
        let star_weight = result.star.subset_weight(&subset);
        report.subsets_checked += 1;
        if Rational64::from_integer(steiner as i64) < star_weight {
            report.violations.push(DominanceViolation {
                subset,
                steiner,
                star_weight: star_weight.to_string(),
            });
        }
        Ok(())
    };
    if c <= STEINER_LIMIT {
        for mask in 0u32..(1 << others.len()) {
            let mut subset = vec![v0];
            subset.extend(
                others
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &v)| v),
            );
            check(subset, STEINER_LIMIT)?;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..subset_budget {
            let k = rand::Rng::gen_range(&mut rng, 0..=others.len());
            let mut subset: Vec<usize> = others.choose_multiple(&mut rng, k).copied().collect();
            subset.push(v0);
            subset.sort_unstable();
            check(subset, STEINER_SAMPLE_LIMIT)?;
        }
    }
    Ok(report)
}

/// What happened when Prim attached `u_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ReplayCase {
    /// `u_i` is outside `V'` and new to `T'`: the edge and node are added.
    Outside,
    /// `u_i` is outside `V'` but already a Steiner point of `T'`; the cycle
    /// is opened by the same rule as `Exchange`. Not charged.
    OutsideCycle {
        removed: Edge,
        removed_weight: Weight,
    },
    /// `u_i` is in `V'` and `e_i` was already an edge of `T'`.
    Existing,
    /// `u_i` is in `V'`, `e_i` closed a cycle and `removed` was taken out.
    Exchange {
        removed: Edge,
        removed_weight: Weight,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub added: Edge,
    pub added_weight: Weight,
    pub case: ReplayCase,
    /// `T'` was a tree containing `V'` after this step.
    pub tree_ok: bool,
}

impl ReplayStep {
    /// Weight charged against the Steiner tree for this step, if any.
    pub fn charged(&self) -> Option<Weight> {
        match self.case {
            ReplayCase::Existing => Some(self.added_weight),
            ReplayCase::Exchange { removed_weight, .. } => Some(removed_weight),
            _ => None,
        }
    }

    /// `w(e_i) <= w(e')` wherever an edge was removed.
    pub fn exchange_ok(&self) -> bool {
        match self.case {
            ReplayCase::Exchange { removed_weight, .. }
            | ReplayCase::OutsideCycle { removed_weight, .. } => {
                self.added_weight <= removed_weight
            }
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub subset: Vec<usize>,
    pub steiner_weight: Weight,
    pub steps: Vec<ReplayStep>,
    /// The final `T'` equals the Prim tree.
    pub ends_at_prim_tree: bool,
}

impl ReplayReport {
    pub fn charged_total(&self) -> Weight {
        self.steps.iter().filter_map(ReplayStep::charged).sum()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("subset must contain v0 = {0}")]
    MissingRoot(usize),
    #[error("step {step}: no removable edge on the cycle closed by {added:?}")]
    NoExchangeEdge { step: usize, added: Edge },
}

struct WorkingTree {
    nodes: BTreeSet<usize>,
    /// Edge -> whether it has become a Prim edge.
    edges: std::collections::BTreeMap<Edge, bool>,
}

impl WorkingTree {
    fn path(&self, from: usize, to: usize) -> Option<Vec<Edge>> {
        let mut prev = std::collections::BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &(a, b) in self.edges.keys() {
                let next = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(next) {
                    e.insert(v);
                    queue.push_back(next);
                }
            }
        }
        if !prev.contains_key(&to) {
            return None;
        }
        let mut out = Vec::new();
        let mut v = to;
        while v != from {
            let p = prev[&v];
            out.push(edge(p, v));
            v = p;
        }
        Some(out)
    }

    fn is_tree_containing(&self, required: &BTreeSet<usize>) -> bool {
        if !required.is_subset(&self.nodes) || self.edges.len() + 1 != self.nodes.len() {
            return false;
        }
        let start = *self.nodes.iter().next().expect("non-empty");
        self.nodes.iter().all(|&v| self.path(start, v).is_some())
    }
}

/// Replays the exchange argument for `subset` (which must contain `v0`):
/// start from an exact Steiner tree `T'`, then follow Prim from `v0`,
/// swapping each Prim edge into `T'`. When `e_i` closes a cycle, the
/// removed edge is the heaviest non-Prim cycle edge touching the nodes
/// attached before `u_i`; ties go to the smallest endpoints.
pub fn replay_exchange(
    g: &TransitionGraph,
    v0: usize,
    subset: &[usize],
) -> Result<ReplayReport, ReplayError> {
    let required: BTreeSet<usize> = subset.iter().copied().collect();
    if !required.contains(&v0) {
        return Err(ReplayError::MissingRoot(v0));
    }
    let steiner = steiner_tree_bruteforce(g, subset)?;
    let prim = prim_mst(g, v0)?;
    let mut tree = WorkingTree {
        nodes: steiner.nodes.iter().copied().collect(),
        edges: steiner.edges.iter().map(|&e| (e, false)).collect(),
    };
    let mut attached: BTreeSet<usize> = BTreeSet::from([v0]);
    let mut steps = Vec::new();

    for (step, (p, u, w)) in prim.edges().enumerate() {
        let e = edge(p, u);
        let in_subset = required.contains(&u);
        let case = if tree.edges.contains_key(&e) {
            tree.edges.insert(e, true);
            if in_subset {
                ReplayCase::Existing
            } else {
                ReplayCase::Outside
            }
        } else if !tree.nodes.contains(&u) {
            tree.nodes.insert(u);
            tree.edges.insert(e, true);
            ReplayCase::Outside
        } else {
            let cycle = tree.path(u, p).expect("T' is connected");
            let removed = cycle
                .iter()
                .copied()
                .filter(|ce| !tree.edges[ce])
                .filter(|&(a, b)| attached.contains(&a) || attached.contains(&b))
                .max_by_key(|&(a, b)| (g.weight(a, b), std::cmp::Reverse((a, b))))
                .ok_or(ReplayError::NoExchangeEdge { step, added: e })?;
            tree.edges.remove(&removed);
            tree.edges.insert(e, true);
            let removed_weight = g.weight(removed.0, removed.1);
            if in_subset {
                ReplayCase::Exchange {
                    removed,
                    removed_weight,
                }
            } else {
                ReplayCase::OutsideCycle {
                    removed,
                    removed_weight,
                }
            }
        };
        attached.insert(u);
        steps.push(ReplayStep {
            added: e,
            added_weight: w,
            case,
            tree_ok: tree.is_tree_containing(&required),
        });
    }

    let prim_edges: BTreeSet<Edge> = prim.edges().map(|(p, u, _)| edge(p, u)).collect();
    let final_edges: BTreeSet<Edge> = tree.edges.keys().copied().collect();
    Ok(ReplayReport {
        subset: required.into_iter().collect(),
        steiner_weight: steiner.weight,
        steps,
        ends_at_prim_tree: prim_edges == final_edges,
    })
}
