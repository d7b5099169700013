//! Transition-cost structures: complete directed graphs with the triangle
//! inequality, their symmetric specialization (metric spaces), and star
//! metrics.
//!
//! Weights are integer slot counts. Star metrics carry exact rational leaf
//! weights so that equalities such as `w(S) = MST(G)` can be checked exactly.

mod mst;
mod tsp;

pub use mst::{prim_mst, RootedTree};
pub use tsp::{best_tour, tsp_approx, tsp_exact, Tour, TSP_EXACT_LIMIT};

use std::fmt;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a color (an input port of the switch).
pub type Color = usize;

/// Transition cost in time slots.
pub type Weight = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("a transition graph needs at least one color")]
    Empty,
    #[error("row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("{0} requires a symmetric (undirected) graph")]
    Directed(&'static str),
    #[error("{op} supports at most {limit} colors, got {got}; {hint}")]
    Capacity {
        op: &'static str,
        limit: usize,
        got: usize,
        hint: &'static str,
    },
    #[error("node {node} is out of range for {c} colors")]
    NodeOutOfRange { node: usize, c: usize },
    #[error("invalid star metric: {0}")]
    InvalidStar(String),
}

/// Complete weighted graph over `c` colors, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MetricFile", into = "MetricFile")]
pub struct TransitionGraph {
    c: usize,
    directed: bool,
    w: Vec<Weight>,
}

/// On-disk form: `{"c": int, "directed": bool, "w": [[int]]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFile {
    pub c: usize,
    pub directed: bool,
    pub w: Vec<Vec<Weight>>,
}

impl TryFrom<MetricFile> for TransitionGraph {
    type Error = MetricError;

    fn try_from(file: MetricFile) -> Result<Self, Self::Error> {
        if file.w.len() != file.c {
            return Err(MetricError::NotSquare {
                row: file.w.len(),
                len: 0,
                expected: file.c,
            });
        }
        TransitionGraph::from_rows(file.w, file.directed)
    }
}

impl From<TransitionGraph> for MetricFile {
    fn from(g: TransitionGraph) -> Self {
        MetricFile {
            c: g.c,
            directed: g.directed,
            w: g.rows(),
        }
    }
}

impl TransitionGraph {
    /// Builds a graph from a square matrix. Only the shape is checked here;
    /// use [`TransitionGraph::validate`] for the metric constraints.
    pub fn from_rows(rows: Vec<Vec<Weight>>, directed: bool) -> Result<Self, MetricError> {
        let c = rows.len();
        if c == 0 {
            return Err(MetricError::Empty);
        }
        let mut w = Vec::with_capacity(c * c);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != c {
                return Err(MetricError::NotSquare {
                    row,
                    len: r.len(),
                    expected: c,
                });
            }
            w.extend(r);
        }
        Ok(TransitionGraph { c, directed, w })
    }

    pub fn colors(&self) -> usize {
        self.c
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn weight(&self, from: Color, to: Color) -> Weight {
        self.w[from * self.c + to]
    }

    pub fn rows(&self) -> Vec<Vec<Weight>> {
        self.w.chunks(self.c).map(|r| r.to_vec()).collect()
    }

    pub fn to_file(&self) -> MetricFile {
        self.clone().into()
    }

    /// Reports every nonzero diagonal entry, every triangle violation
    /// `w[i][k] > w[i][j] + w[j][k]`, and (for undirected graphs) every
    /// asymmetric pair.
    pub fn validate(&self) -> ValidationReport {
        let c = self.c;
        let mut violations = Vec::new();
        for j in 0..c {
            let wjj = self.weight(j, j);
            if wjj != 0 {
                violations.push(Violation::NonZeroDiagonal {
                    node: j,
                    weight: wjj,
                });
            }
        }
        for i in 0..c {
            for j in 0..c {
                for k in 0..c {
                    let direct = self.weight(i, k);
                    let via = self.weight(i, j) + self.weight(j, k);
                    if direct > via {
                        violations.push(Violation::Triangle {
                            from: i,
                            via: j,
                            to: k,
                            direct,
                            detour: via,
                        });
                    }
                }
            }
        }
        if !self.directed {
            for j in 0..c {
                for k in j + 1..c {
                    if self.weight(j, k) != self.weight(k, j) {
                        violations.push(Violation::Asymmetric {
                            a: j,
                            b: k,
                            forward: self.weight(j, k),
                            backward: self.weight(k, j),
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    pub(crate) fn require_symmetric(&self, op: &'static str) -> Result<(), MetricError> {
        if self.directed {
            Err(MetricError::Directed(op))
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<(), MetricError> {
        if node >= self.c {
            Err(MetricError::NodeOutOfRange { node, c: self.c })
        } else {
            Ok(())
        }
    }

    /// The complete subgraph on `nodes`, relabelled `0..nodes.len()` in the
    /// given order.
    pub fn restrict(&self, nodes: &[Color]) -> TransitionGraph {
        let n = nodes.len();
        let mut w = Vec::with_capacity(n * n);
        for &a in nodes {
            for &b in nodes {
                w.push(self.weight(a, b));
            }
        }
        TransitionGraph {
            c: n,
            directed: self.directed,
            w,
        }
    }

    /// True when this is `uniform_metric(c, d)` for some `d`.
    pub fn uniform_cost(&self) -> Option<Weight> {
        if self.c < 2 {
            return Some(0);
        }
        let d = self.weight(0, 1);
        let uniform = (0..self.c)
            .all(|j| (0..self.c).all(|k| self.weight(j, k) == if j == k { 0 } else { d }));
        uniform.then_some(d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonZeroDiagonal {
        node: Color,
        weight: Weight,
    },
    Triangle {
        from: Color,
        via: Color,
        to: Color,
        direct: Weight,
        detour: Weight,
    },
    Asymmetric {
        a: Color,
        b: Color,
        forward: Weight,
        backward: Weight,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonZeroDiagonal { node, weight } => {
                write!(f, "w[{node}][{node}] = {weight}, expected 0")
            }
            Violation::Triangle {
                from,
                via,
                to,
                direct,
                detour,
            } => write!(
                f,
                "triangle ({from},{via},{to}): w[{from}][{to}] = {direct} > {detour}"
            ),
            Violation::Asymmetric {
                a,
                b,
                forward,
                backward,
            } => write!(f, "w[{a}][{b}] = {forward} but w[{b}][{a}] = {backward}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `validate_transition_graph` as a free function.
pub fn validate_transition_graph(g: &TransitionGraph) -> ValidationReport {
    g.validate()
}

/// Every off-diagonal transition costs `d` slots.
pub fn uniform_metric(c: usize, d: Weight) -> TransitionGraph {
    let c = c.max(1);
    let mut w = vec![d; c * c];
    for j in 0..c {
        w[j * c + j] = 0;
    }
    TransitionGraph {
        c,
        directed: false,
        w,
    }
}

/// Random symmetric metric: uniform weights in `range`, then replaced by
/// the all-pairs shortest-path closure.
pub fn random_metric(
    c: usize,
    seed: u64,
    range: std::ops::RangeInclusive<Weight>,
) -> TransitionGraph {
    random_matrix(c, seed, range, false)
}

/// Random directed graph satisfying the triangle inequality (asymmetric
/// draw followed by shortest-path closure).
pub fn random_directed_metric(
    c: usize,
    seed: u64,
    range: std::ops::RangeInclusive<Weight>,
) -> TransitionGraph {
    random_matrix(c, seed, range, true)
}

fn random_matrix(
    c: usize,
    seed: u64,
    range: std::ops::RangeInclusive<Weight>,
    directed: bool,
) -> TransitionGraph {
    let c = c.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0; c * c];
    for j in 0..c {
        for k in 0..c {
            if j == k || (!directed && k < j) {
                continue;
            }
            let x = rng.gen_range(range.clone());
            w[j * c + k] = x;
            if !directed {
                w[k * c + j] = x;
            }
        }
    }
    shortest_path_closure(c, &mut w);
    TransitionGraph { c, directed, w }
}

fn shortest_path_closure(c: usize, w: &mut [Weight]) {
    for via in 0..c {
        for i in 0..c {
            for k in 0..c {
                let detour = w[i * c + via] + w[via * c + k];
                if detour < w[i * c + k] {
                    w[i * c + k] = detour;
                }
            }
        }
    }
}

/// Star metric over `c` leaves: moving from leaf `i` to leaf `j != i` costs
/// `w_i + w_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarMetric {
    weights: Vec<Rational64>,
    root: usize,
}

/// On-disk form: `{"root": int, "weights": ["0", "3/2", ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarFile {
    pub root: usize,
    pub weights: Vec<String>,
}

impl StarMetric {
    pub fn new(weights: Vec<Rational64>, root: usize) -> Result<Self, MetricError> {
        if weights.is_empty() {
            return Err(MetricError::Empty);
        }
        if root >= weights.len() {
            return Err(MetricError::NodeOutOfRange {
                node: root,
                c: weights.len(),
            });
        }
        if weights.iter().any(|w| *w < Rational64::from_integer(0)) {
            return Err(MetricError::InvalidStar("negative leaf weight".into()));
        }
        if weights[root] != Rational64::from_integer(0) {
            return Err(MetricError::InvalidStar(format!(
                "root leaf {root} has weight {}, expected 0",
                weights[root]
            )));
        }
        Ok(StarMetric { weights, root })
    }

    /// Convenience constructor for integer leaf weights.
    pub fn from_integers(weights: &[i64], root: usize) -> Result<Self, MetricError> {
        Self::new(
            weights
                .iter()
                .map(|&w| Rational64::from_integer(w))
                .collect(),
            root,
        )
    }

    pub fn leaves(&self) -> usize {
        self.weights.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn weights(&self) -> &[Rational64] {
        &self.weights
    }

    pub fn weight(&self, leaf: usize) -> Rational64 {
        self.weights[leaf]
    }

    /// `w(S)`, the sum of all leaf weights.
    pub fn total(&self) -> Rational64 {
        self.weights.iter().copied().sum()
    }

    /// `w_S(V')`, the sum of the leaf weights of `subset`.
    pub fn subset_weight(&self, subset: &[usize]) -> Rational64 {
        subset.iter().map(|&v| self.weights[v]).sum()
    }

    pub fn transition_cost(&self, i: usize, j: usize) -> Rational64 {
        if i == j {
            Rational64::from_integer(0)
        } else {
            self.weights[i] + self.weights[j]
        }
    }

    /// Integer-slot transition graph induced by the star. Fractional costs
    /// round up, which keeps the triangle inequality.
    pub fn to_transition_graph(&self) -> TransitionGraph {
        let c = self.leaves();
        let mut w = vec![0; c * c];
        for i in 0..c {
            for j in 0..c {
                if i != j {
                    w[i * c + j] = self.transition_cost(i, j).ceil().to_integer() as Weight;
                }
            }
        }
        TransitionGraph {
            c,
            directed: false,
            w,
        }
    }

    pub fn to_file(&self) -> StarFile {
        StarFile {
            root: self.root,
            weights: self.weights.iter().map(|w| w.to_string()).collect(),
        }
    }

    pub fn from_file(file: &StarFile) -> Result<Self, MetricError> {
        let weights = file
            .weights
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<Rational64>()
                    .map_err(|e| MetricError::InvalidStar(format!("bad weight {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(weights, file.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_metric() -> TransitionGraph {
        TransitionGraph::from_rows(vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]], false)
            .unwrap()
    }

    #[test]
    fn uniform_is_valid() {
        assert!(uniform_metric(3, 1).validate().is_ok());
        assert!(uniform_metric(4, 5).validate().is_ok());
        let zero = uniform_metric(2, 0);
        assert!(zero.validate().is_ok());
        assert_eq!(zero.rows(), vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn detects_triangle_violation() {
        let g =
            TransitionGraph::from_rows(vec![vec![0, 5, 1], vec![5, 0, 1], vec![1, 1, 0]], false)
                .unwrap();
        let report = g.validate();
        assert!(report.violations.contains(&Violation::Triangle {
            from: 0,
            via: 2,
            to: 1,
            direct: 5,
            detour: 2
        }));
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, Violation::Triangle { .. })));
    }

    #[test]
    fn detects_nonzero_diagonal_and_asymmetry() {
        let g =
            TransitionGraph::from_rows(vec![vec![0, 1, 1], vec![1, 1, 1], vec![1, 2, 0]], false)
                .unwrap();
        let report = g.validate();
        assert!(report
            .violations
            .contains(&Violation::NonZeroDiagonal { node: 1, weight: 1 }));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Asymmetric { a: 1, b: 2, .. })));
        // the same matrix is fine as far as symmetry goes once declared directed
        let d = TransitionGraph::from_rows(g.rows(), true).unwrap();
        assert!(!d
            .validate()
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Asymmetric { .. })));
    }

    #[test]
    fn rejects_ragged_matrix() {
        let err = TransitionGraph::from_rows(vec![vec![0, 1], vec![1]], false).unwrap_err();
        assert!(matches!(err, MetricError::NotSquare { row: 1, .. }));
        assert_eq!(
            TransitionGraph::from_rows(vec![], false),
            Err(MetricError::Empty)
        );
    }

    #[test]
    fn random_metric_is_valid_and_deterministic() {
        for seed in 0..20 {
            let g = random_metric(6, seed, 1..=9);
            assert!(g.validate().is_ok(), "seed {seed}: {:?}", g.validate());
            assert_eq!(g, random_metric(6, seed, 1..=9));
            let d = random_directed_metric(5, seed, 1..=9);
            assert!(d.validate().is_ok());
        }
        assert_eq!(random_metric(1, 3, 1..=9).rows(), vec![vec![0]]);
    }

    #[test]
    fn metric_file_roundtrip() {
        let g = path_metric();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(
            json,
            r#"{"c":3,"directed":false,"w":[[0,1,2],[1,0,1],[2,1,0]]}"#
        );
        let back: TransitionGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"c":3,"directed":false,"w":[[0,1],[1,0]]}"#;
        assert!(serde_json::from_str::<TransitionGraph>(bad).is_err());
    }

    #[test]
    fn star_metric_costs() {
        let s = StarMetric::new(
            vec![
                Rational64::from_integer(0),
                Rational64::new(1, 2),
                Rational64::new(1, 2),
            ],
            0,
        )
        .unwrap();
        assert_eq!(s.total(), Rational64::from_integer(1));
        assert_eq!(s.transition_cost(1, 2), Rational64::from_integer(1));
        let g = s.to_transition_graph();
        assert_eq!(g.rows(), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        assert!(g.validate().is_ok());
        assert!(StarMetric::from_integers(&[1, 2], 0).is_err());
        let file = s.to_file();
        assert_eq!(file.weights, vec!["0", "1/2", "1/2"]);
        assert_eq!(StarMetric::from_file(&file).unwrap(), s);
    }

    #[test]
    fn uniform_detection() {
        assert_eq!(uniform_metric(4, 3).uniform_cost(), Some(3));
        assert_eq!(path_metric().uniform_cost(), None);
    }
}
