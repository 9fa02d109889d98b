//! Rounding a fractional bipartite matching to an integral one without
//! increasing its weight, keeping every vertex of fractional degree one
//! matched and using only edges of the fractional support.

use crate::scalar::Scalar;

/// Edge of a fractional matching with value `x / denom`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracEdge<T> {
    pub left: usize,
    pub right: usize,
    pub weight: T,
    pub x: i64,
}

/// Cancels alternating cycles and maximal paths of fractional edges until
/// every value is `0` or `denom`; returns the ids of the edges at `denom`.
///
/// Requires vertex sums `≤ denom`. Parallel edges are allowed.
pub fn round_fractional_matching<T: Scalar>(n_left: usize, edges: &[FracEdge<T>], denom: i64) -> Vec<usize> {
    let mut x: Vec<i64> = edges.iter().map(|e| e.x).collect();
    let n_right = edges.iter().map(|e| e.right + 1).max().unwrap_or(0);
    let nv = n_left.max(edges.iter().map(|e| e.left + 1).max().unwrap_or(0)) + n_right;
    let offset = nv - n_right;
    let ends = |id: usize| (edges[id].left, offset + edges[id].right);
    loop {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for id in 0..edges.len() {
            if x[id] > 0 && x[id] < denom {
                let (u, v) = ends(id);
                adj[u].push(id);
                adj[v].push(id);
            }
        }
        let Some(start) = (0..nv).find(|&v| !adj[v].is_empty()) else { break };
        let walk = |from: usize| -> (Vec<usize>, Option<usize>, usize) {
            // Returns (edges, index where a cycle starts, last vertex).
            let mut pos = vec![usize::MAX; nv];
            let mut used: Vec<usize> = Vec::new();
            let mut v = from;
            pos[v] = 0;
            loop {
                let next = adj[v].iter().copied().find(|id| !used.contains(id));
                let Some(id) = next else { return (used, None, v) };
                let (a, b) = ends(id);
                let w = if a == v { b } else { a };
                used.push(id);
                if pos[w] != usize::MAX {
                    return (used, Some(pos[w]), w);
                }
                pos[w] = used.len();
                v = w;
            }
        };
        let (mut path, mut cycle_at, last) = walk(start);
        if cycle_at.is_none() {
            let (p2, c2, _) = walk(last);
            path = p2;
            cycle_at = c2;
        }
        let chain: Vec<usize> = match cycle_at {
            Some(i) => path[i..].to_vec(),
            None => path,
        };
        let delta: T = chain
            .iter()
            .enumerate()
            .map(|(i, &id)| if i % 2 == 0 { edges[id].weight } else { -edges[id].weight })
            .sum();
        let up_even = delta <= T::zero();
        let theta = chain
            .iter()
            .enumerate()
            .map(|(i, &id)| if (i % 2 == 0) == up_even { denom - x[id] } else { x[id] })
            .min()
            .expect("non-empty chain");
        for (i, &id) in chain.iter().enumerate() {
            if (i % 2 == 0) == up_even {
                x[id] += theta;
            } else {
                x[id] -= theta;
            }
        }
    }
    (0..edges.len()).filter(|&id| x[id] == denom).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(left: usize, right: usize, weight: f64, x: i64) -> FracEdge<f64> {
        FracEdge { left, right, weight, x }
    }

    fn check(n_left: usize, edges: &[FracEdge<f64>], denom: i64) -> Vec<usize> {
        let m = round_fractional_matching(n_left, edges, denom);
        let frac_w: f64 = edges.iter().map(|e| e.weight * e.x as f64 / denom as f64).sum();
        let w: f64 = m.iter().map(|&i| edges[i].weight).sum();
        assert!(w <= frac_w + 1e-9, "{w} > {frac_w}");
        let mut seen_l = std::collections::HashSet::new();
        let mut seen_r = std::collections::HashSet::new();
        for &i in &m {
            assert!(edges[i].x > 0);
            assert!(seen_l.insert(edges[i].left) && seen_r.insert(edges[i].right));
        }
        let mut deg_l = std::collections::HashMap::new();
        let mut deg_r = std::collections::HashMap::new();
        for ed in edges {
            *deg_l.entry(ed.left).or_insert(0) += ed.x;
            *deg_r.entry(ed.right).or_insert(0) += ed.x;
        }
        for (v, d) in deg_l {
            if d == denom {
                assert!(seen_l.contains(&v), "left {v} unmatched");
            }
        }
        for (v, d) in deg_r {
            if d == denom {
                assert!(seen_r.contains(&v), "right {v} unmatched");
            }
        }
        m
    }

    #[test]
    fn square_cycle_picks_lighter_side() {
        let edges = [e(0, 0, 1.0, 1), e(0, 1, 5.0, 1), e(1, 1, 1.0, 1), e(1, 0, 5.0, 1)];
        assert_eq!(check(2, &edges, 2), vec![0, 2]);
    }

    #[test]
    fn parallel_edges_form_two_cycles() {
        let edges = [e(0, 0, 3.0, 1), e(0, 0, 1.0, 1), e(0, 0, 2.0, 1)];
        assert_eq!(check(1, &edges, 3), vec![1]);
    }

    #[test]
    fn path_endpoints_may_drop() {
        let edges = [e(0, 0, 1.0, 1)];
        assert!(check(1, &edges, 2).is_empty());
    }

    #[test]
    fn random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let denom = rng.random_range(2..6);
            let (nl, nr) = (rng.random_range(1..5), rng.random_range(1..5));
            let mut dl = vec![0i64; nl];
            let mut dr = vec![0i64; nr];
            let mut edges = Vec::new();
            for _ in 0..rng.random_range(1..14) {
                let (u, v) = (rng.random_range(0..nl), rng.random_range(0..nr));
                let room = (denom - dl[u]).min(denom - dr[v]);
                if room == 0 {
                    continue;
                }
                let x = rng.random_range(1..=room);
                dl[u] += x;
                dr[v] += x;
                edges.push(e(u, v, rng.random_range(0.0..10.0), x));
            }
            check(nl, &edges, denom);
        }
    }
}
