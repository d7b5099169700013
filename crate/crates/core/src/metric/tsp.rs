use serde::{Deserialize, Serialize};

use super::{prim_mst, Color, MetricError, TransitionGraph, Weight};

/// Largest color count `tsp_exact` accepts (subset DP over 2^(C-1) masks).
pub const TSP_EXACT_LIMIT: usize = 15;

/// A cyclic visiting order of the colors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<Color>,
    pub weight: Weight,
}

impl Tour {
    /// Computes the cyclic weight of `order` in `g`.
    pub fn from_order(g: &TransitionGraph, order: Vec<Color>) -> Tour {
        let weight = cycle_weight(g, &order);
        Tour { order, weight }
    }

    /// Position of `color` in the tour.
    pub fn position(&self, color: Color) -> Option<usize> {
        self.order.iter().position(|&c| c == color)
    }

    /// The color visited right after `color`.
    pub fn successor(&self, color: Color) -> Option<Color> {
        self.position(color)
            .map(|i| self.order[(i + 1) % self.order.len()])
    }
}

fn cycle_weight(g: &TransitionGraph, order: &[Color]) -> Weight {
    if order.len() < 2 {
        return 0;
    }
    order
        .iter()
        .zip(order.iter().cycle().skip(1))
        .map(|(&a, &b)| g.weight(a, b))
        .sum()
}

/// Minimum-weight Hamiltonian cycle by Held-Karp, starting at color 0.
/// Works for directed and symmetric graphs alike.
pub fn tsp_exact(g: &TransitionGraph) -> Result<Tour, MetricError> {
    let n = g.colors();
    if n > TSP_EXACT_LIMIT {
        return Err(MetricError::Capacity {
            op: "tsp_exact",
            limit: TSP_EXACT_LIMIT,
            got: n,
            hint: "use tsp_approx for larger graphs",
        });
    }
    if n <= 2 {
        return Ok(Tour::from_order(g, (0..n).collect()));
    }

    // Node k in 1..n maps to bit k-1. cost[mask][k] is the cheapest path
    // 0 -> ... -> k visiting exactly the nodes in mask (k in mask).
    let m = n - 1;
    let full = (1usize << m) - 1;
    let idx = |mask: usize, k: usize| mask * m + (k - 1);
    let mut cost = vec![Weight::MAX; (full + 1) * m];
    let mut pred = vec![usize::MAX; (full + 1) * m];
    for k in 1..n {
        cost[idx(1 << (k - 1), k)] = g.weight(0, k);
        pred[idx(1 << (k - 1), k)] = 0;
    }
    for mask in 1..=full {
        for k in 1..n {
            let bit = 1 << (k - 1);
            if mask & bit == 0 {
                continue;
            }
            let cur = cost[idx(mask, k)];
            if cur == Weight::MAX {
                continue;
            }
            for next in 1..n {
                let nbit = 1 << (next - 1);
                if mask & nbit != 0 {
                    continue;
                }
                let nm = mask | nbit;
                let cand = cur + g.weight(k, next);
                if cand < cost[idx(nm, next)] {
                    cost[idx(nm, next)] = cand;
                    pred[idx(nm, next)] = k;
                }
            }
        }
    }

    let (mut last, mut best) = (1, Weight::MAX);
    for k in 1..n {
        let c = cost[idx(full, k)].saturating_add(g.weight(k, 0));
        if c < best {
            best = c;
            last = k;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut k = last;
    while k != 0 {
        order.push(k);
        let p = pred[idx(mask, k)];
        mask &= !(1 << (k - 1));
        k = p;
    }
    order.push(0);
    order.reverse();
    Ok(Tour {
        order,
        weight: best,
    })
}

/// Polynomial tour. Symmetric graphs: preorder walk of the Prim tree from
/// node 0, at most twice the MST weight. Directed graphs: nearest-neighbour
/// from node 0 (a heuristic with no approximation guarantee).
pub fn tsp_approx(g: &TransitionGraph) -> Tour {
    let n = g.colors();
    if !g.is_directed() {
        let tree = prim_mst(g, 0).expect("symmetric graph with node 0");
        return Tour::from_order(g, tree.preorder());
    }
    let mut visited = vec![false; n];
    let mut order = vec![0];
    visited[0] = true;
    let mut cur = 0;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (g.weight(cur, v), v))
            .expect("unvisited node remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    Tour::from_order(g, order)
}

/// Exact tour when the graph is small enough, otherwise the approximation.
pub fn best_tour(g: &TransitionGraph) -> Tour {
    tsp_exact(g).unwrap_or_else(|_| tsp_approx(g))
}
