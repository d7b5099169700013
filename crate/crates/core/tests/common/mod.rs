//! Reference implementations used to cross-check the library. Each one is
//! written from scratch and shares no code with the crate.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedlab::metric::TransitionGraph;
use schedlab::sched::{Instance, Packet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Minimum closed tour by trying every order of the colors after color 0.
pub fn brute_tsp(g: &TransitionGraph) -> u64 {
    let c = g.colors();
    if c <= 1 {
        return 0;
    }
    let mut rest: Vec<usize> = (1..c).collect();
    let mut best = u64::MAX;
    loop {
        let mut w = g.weight(0, rest[0]) + g.weight(*rest.last().unwrap(), 0);
        for pair in rest.windows(2) {
            w += g.weight(pair[0], pair[1]);
        }
        best = best.min(w);
        if !next_permutation(&mut rest) {
            return best;
        }
    }
}

/// Kruskal with a union-find.
pub fn kruskal(g: &TransitionGraph) -> u64 {
    let c = g.colors();
    let mut edges: Vec<(u64, usize, usize)> = (0..c)
        .flat_map(|i| (i + 1..c).map(move |j| (i, j)))
        .map(|(i, j)| (g.weight(i, j), i, j))
        .collect();
    edges.sort_unstable();
    let mut parent: Vec<usize> = (0..c).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut total = 0;
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += w;
        }
    }
    total
}

/// Dreyfus-Wagner dynamic program over terminal subsets.
pub fn dreyfus_wagner(g: &TransitionGraph, terminals: &[usize]) -> u64 {
    let n = g.colors();
    let mut d = vec![vec![0u64; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = g.weight(i, j);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    let t = terminals.len();
    if t <= 1 {
        return 0;
    }
    let full = 1usize << t;
    let mut dp = vec![vec![u64::MAX / 4; n]; full];
    for (k, &term) in terminals.iter().enumerate() {
        for v in 0..n {
            dp[1 << k][v] = d[term][v];
        }
    }
    for s in 1..full {
        if s.count_ones() < 2 {
            continue;
        }
        for v in 0..n {
            let mut sub = (s - 1) & s;
            while sub > 0 {
                let val = dp[sub][v] + dp[s ^ sub][v];
                if val < dp[s][v] {
                    dp[s][v] = val;
                }
                sub = (sub - 1) & s;
            }
        }
        for v in 0..n {
            let best = (0..n).map(|u| dp[s][u] + d[u][v]).min().unwrap();
            dp[s][v] = dp[s][v].min(best);
        }
    }
    dp[full - 1][terminals[0]]
}

/// Maximum number of packets that fit when switching is free: bipartite
/// matching of packets to slots by augmenting paths.
pub fn matching_opt(packets: &[Packet]) -> u64 {
    let horizon = packets.iter().map(|p| p.d).max().unwrap_or(0) as usize;
    let mut slot_owner: Vec<Option<usize>> = vec![None; horizon + 1];
    fn augment(i: usize, ps: &[Packet], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for t in ps[i].r as usize..=ps[i].d as usize {
            if seen[t] {
                continue;
            }
            seen[t] = true;
            if owner[t].is_none() || augment(owner[t].unwrap(), ps, owner, seen) {
                owner[t] = Some(i);
                return true;
            }
        }
        false
    }
    let mut count = 0;
    for i in 0..packets.len() {
        let mut seen = vec![false; horizon + 1];
        if augment(i, packets, &mut slot_owner, &mut seen) {
            count += 1;
        }
    }
    count
}

/// Random packets with minimum laxity exactly `laxity`, releases in
/// `1..=spread`, colors below `colors`.
pub fn random_packets(
    rng: &mut ChaCha8Rng,
    n: usize,
    laxity: u64,
    spread: u64,
    colors: usize,
) -> Vec<Packet> {
    let mut ps: Vec<Packet> = (0..n)
        .map(|id| {
            let r = rng.gen_range(1..=spread.max(1));
            let d = r + laxity + rng.gen_range(0..=laxity);
            Packet::new(id, r, d, rng.gen_range(0..colors))
        })
        .collect();
    ps[0].d = ps[0].r + laxity;
    ps
}

pub fn instance(g: &TransitionGraph, packets: Vec<Packet>) -> Instance {
    Instance::new(g.clone(), packets, None).unwrap()
}
