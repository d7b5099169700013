use serde::{Deserialize, Serialize};

use super::{MetricError, TransitionGraph, Weight};

/// Spanning tree produced by Prim's algorithm, rooted where the search began.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedTree {
    pub root: usize,
    /// `parent[v]` is `None` only for the root.
    pub parent: Vec<Option<usize>>,
    /// Weight of the edge `(v, parent[v])`; zero for the root.
    pub edge_weight: Vec<Weight>,
    pub total_weight: Weight,
    /// Nodes in the order Prim attached them; `order[0]` is the root.
    pub order: Vec<usize>,
}

impl RootedTree {
    /// Tree edges `(parent, child, weight)` in attachment order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Weight)> + '_ {
        self.order.iter().skip(1).map(move |&v| {
            (
                self.parent[v].expect("non-root node has a parent"),
                v,
                self.edge_weight[v],
            )
        })
    }

    /// Children of `node`, ascending by id.
    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.parent.len())
            .filter(|&v| self.parent[v] == Some(node))
            .collect()
    }

    /// Depth-first preorder from the root, visiting children by ascending id.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parent.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            let mut kids = self.children(v);
            kids.reverse();
            stack.extend(kids);
        }
        out
    }
}

/// Prim's algorithm from `root`. The next edge is the lightest one leaving
/// the tree; ties go to the smaller new node, then to the smaller parent.
pub fn prim_mst(g: &TransitionGraph, root: usize) -> Result<RootedTree, MetricError> {
    g.require_symmetric("prim_mst")?;
    g.check_node(root)?;
    let c = g.colors();
    let mut in_tree = vec![false; c];
    let mut key = vec![Weight::MAX; c];
    let mut parent: Vec<Option<usize>> = vec![None; c];
    let mut edge_weight = vec![0; c];
    let mut order = Vec::with_capacity(c);
    key[root] = 0;

    for _ in 0..c {
        let u = (0..c)
            .filter(|&v| !in_tree[v])
            .min_by_key(|&v| (key[v], v))
            .expect("a node remains outside the tree");
        in_tree[u] = true;
        order.push(u);
        if let Some(p) = parent[u] {
            edge_weight[u] = g.weight(p, u);
        }
        for v in 0..c {
            if in_tree[v] {
                continue;
            }
            let cand = g.weight(u, v);
            let better = cand < key[v] || (cand == key[v] && parent[v].is_some_and(|p| u < p));
            if better {
                key[v] = cand;
                parent[v] = Some(u);
            }
        }
    }

    let total_weight = edge_weight.iter().sum();
    Ok(RootedTree {
        root,
        parent,
        edge_weight,
        total_weight,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{random_metric, uniform_metric};

    /// Weight of the cheapest labelled spanning tree, enumerating every
    /// Prüfer sequence (n^(n-2) trees).
    fn brute_force_mst(g: &TransitionGraph) -> Weight {
        let n = g.colors();
        if n <= 1 {
            return 0;
        }
        if n == 2 {
            return g.weight(0, 1);
        }
        let len = n - 2;
        let total = n.pow(len as u32);
        let mut best = Weight::MAX;
        for code in 0..total {
            let mut seq = Vec::with_capacity(len);
            let mut x = code;
            for _ in 0..len {
                seq.push(x % n);
                x /= n;
            }
            let mut degree = vec![1usize; n];
            for &s in &seq {
                degree[s] += 1;
            }
            let mut weight = 0;
            for &s in &seq {
                let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
                weight += g.weight(leaf, s);
                degree[leaf] -= 1;
                degree[s] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
            weight += g.weight(rest[0], rest[1]);
            best = best.min(weight);
        }
        best
    }

    #[test]
    fn triangle_all_ones() {
        let t = prim_mst(&uniform_metric(3, 1), 0).unwrap();
        assert_eq!(t.total_weight, 2);
        assert_eq!(t.order, vec![0, 1, 2]);
    }

    #[test]
    fn path_metric_unique_tree() {
        let g =
            TransitionGraph::from_rows(vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]], false)
                .unwrap();
        let t = prim_mst(&g, 0).unwrap();
        assert_eq!(t.parent, vec![None, Some(0), Some(1)]);
        assert_eq!(t.total_weight, 2);
        assert_eq!(t.preorder(), vec![0, 1, 2]);
        assert_eq!(t.edges().collect::<Vec<_>>(), vec![(0, 1, 1), (1, 2, 1)]);
    }

    #[test]
    fn matches_cayley_enumeration() {
        for seed in 0..30 {
            let g = random_metric(5, seed, 1..=20);
            let t = prim_mst(&g, 0).unwrap();
            assert_eq!(t.total_weight, brute_force_mst(&g), "seed {seed}");
            for root in 1..5 {
                assert_eq!(prim_mst(&g, root).unwrap().total_weight, t.total_weight);
            }
        }
    }

    #[test]
    fn single_node_and_errors() {
        let t = prim_mst(&uniform_metric(1, 1), 0).unwrap();
        assert_eq!(t.total_weight, 0);
        assert_eq!(t.edges().count(), 0);
        let d = TransitionGraph::from_rows(vec![vec![0, 1], vec![2, 0]], true).unwrap();
        assert!(matches!(prim_mst(&d, 0), Err(MetricError::Directed(_))));
        assert!(matches!(
            prim_mst(&uniform_metric(2, 1), 5),
            Err(MetricError::NodeOutOfRange { .. })
        ));
    }
}
