//! Min-cost flow by successive shortest paths with node potentials.
//!
//! The engine is generic over the cost type so the same code serves the
//! real-valued assignment problem and the lexicographic demand flow used by
//! the structural harness.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Debug;
use std::ops::{Add, Neg, Sub};

use crate::scalar::Scalar;

/// Cost of a unit of flow on an edge. Must form a totally ordered group.
pub trait FlowCost: Copy + Debug + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    /// Maps values that are negative only by rounding error to zero.
    fn clamp_rounding(self) -> Self;
    fn is_negative(self) -> bool {
        self < Self::zero()
    }
}

impl<T: Scalar> FlowCost for T {
    fn zero() -> Self {
        T::zero()
    }

    fn clamp_rounding(self) -> Self {
        if self < T::zero() {
            T::zero()
        } else {
            self
        }
    }
}

/// Lexicographic cost: first `rank`, then `real`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LexCost<T> {
    pub rank: i64,
    pub real: T,
}

impl<T: Scalar> LexCost<T> {
    pub fn new(rank: i64, real: T) -> Self {
        LexCost { rank, real }
    }
}

impl<T: Scalar> PartialOrd for LexCost<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.rank.cmp(&other.rank) {
            Ordering::Equal => self.real.partial_cmp(&other.real),
            o => Some(o),
        }
    }
}

impl<T: Scalar> Add for LexCost<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LexCost { rank: self.rank + o.rank, real: self.real + o.real }
    }
}

impl<T: Scalar> Sub for LexCost<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LexCost { rank: self.rank - o.rank, real: self.real - o.real }
    }
}

impl<T: Scalar> Neg for LexCost<T> {
    type Output = Self;
    fn neg(self) -> Self {
        LexCost { rank: -self.rank, real: -self.real }
    }
}

impl<T: Scalar> FlowCost for LexCost<T> {
    fn zero() -> Self {
        LexCost { rank: 0, real: T::zero() }
    }

    fn clamp_rounding(self) -> Self {
        if self.rank == 0 && self.real < T::zero() {
            LexCost { rank: 0, real: T::zero() }
        } else {
            self
        }
    }
}

#[derive(Clone, Debug)]
struct Arc<C> {
    to: usize,
    cap: i64,
    cost: C,
}

/// Directed graph with capacities and per-unit costs; arcs are stored in
/// forward/reverse pairs so `2·id` is the forward arc of edge `id`.
#[derive(Clone, Debug)]
pub struct FlowGraph<C> {
    arcs: Vec<Arc<C>>,
    adj: Vec<Vec<usize>>,
    initial_cap: Vec<i64>,
}

/// Result of a flow computation.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowResult<C> {
    pub value: i64,
    pub cost: C,
}

struct HeapItem<C> {
    dist: C,
    node: usize,
}

impl<C: PartialOrd> PartialEq for HeapItem<C> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<C: PartialOrd> Eq for HeapItem<C> {}
impl<C: PartialOrd> PartialOrd for HeapItem<C> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<C: PartialOrd> Ord for HeapItem<C> {
    // Min-heap on (dist, node).
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.node.cmp(&self.node))
    }
}

impl<C: FlowCost> FlowGraph<C> {
    pub fn new(nodes: usize) -> Self {
        FlowGraph { arcs: Vec::new(), adj: vec![Vec::new(); nodes], initial_cap: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds an edge and returns its id.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: C) -> usize {
        let id = self.initial_cap.len();
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.initial_cap.push(cap);
        id
    }

    /// Flow currently routed on edge `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.arcs[2 * id + 1].cap
    }

    pub fn edge_count(&self) -> usize {
        self.initial_cap.len()
    }

    /// Endpoints of edge `id`.
    pub fn endpoints(&self, id: usize) -> (usize, usize) {
        (self.arcs[2 * id + 1].to, self.arcs[2 * id].to)
    }

    /// Bellman-Ford potentials over arcs with residual capacity.
    fn initial_potentials(&self, source: usize) -> Vec<Option<C>> {
        let n = self.adj.len();
        let mut pot: Vec<Option<C>> = vec![None; n];
        pot[source] = Some(C::zero());
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                let Some(du) = pot[u] else { continue };
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 {
                        continue;
                    }
                    let cand = du + arc.cost;
                    if pot[arc.to].is_none_or(|dv| cand < dv) {
                        pot[arc.to] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        pot
    }

    /// Sends up to `limit` units from `source` to `sink` at minimum cost.
    ///
    /// Among flows of maximum value (capped by `limit`) the result has
    /// minimum cost. Ties between equal-cost paths go to lower node indices.
    pub fn min_cost_flow(&mut self, source: usize, sink: usize, limit: i64) -> FlowResult<C> {
        let n = self.adj.len();
        let has_negative = self.arcs.iter().step_by(2).any(|a| a.cost.is_negative());
        let mut pot: Vec<C> = if has_negative {
            self.initial_potentials(source)
                .into_iter()
                .map(|p| p.unwrap_or_else(C::zero))
                .collect()
        } else {
            vec![C::zero(); n]
        };
        let mut value = 0i64;
        let mut cost = C::zero();
        let mut dist: Vec<Option<C>> = vec![None; n];
        let mut prev: Vec<usize> = vec![usize::MAX; n];
        let mut done = vec![false; n];
        while value < limit {
            dist.iter_mut().for_each(|d| *d = None);
            prev.iter_mut().for_each(|p| *p = usize::MAX);
            done.iter_mut().for_each(|d| *d = false);
            dist[source] = Some(C::zero());
            let mut heap = BinaryHeap::new();
            heap.push(HeapItem { dist: C::zero(), node: source });
            while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 || done[arc.to] {
                        continue;
                    }
                    let reduced = (arc.cost + pot[u] - pot[arc.to]).clamp_rounding();
                    let cand = d + reduced;
                    if dist[arc.to].is_none_or(|dv| cand < dv) {
                        dist[arc.to] = Some(cand);
                        prev[arc.to] = a;
                        heap.push(HeapItem { dist: cand, node: arc.to });
                    }
                }
            }
            let Some(_) = dist[sink] else { break };
            for v in 0..n {
                if let Some(dv) = dist[v] {
                    pot[v] = pot[v] + dv;
                }
            }
            let mut push = limit - value;
            let mut v = sink;
            while v != source {
                let a = prev[v];
                push = push.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = prev[v];
                self.arcs[a].cap -= push;
                self.arcs[a ^ 1].cap += push;
                v = self.arcs[a ^ 1].to;
            }
            value += push;
            let path_cost = self.path_cost(source, sink, &prev);
            for _ in 0..push {
                cost = cost + path_cost;
            }
        }
        FlowResult { value, cost }
    }

    fn path_cost(&self, source: usize, sink: usize, prev: &[usize]) -> C {
        let mut c = C::zero();
        let mut v = sink;
        while v != source {
            let a = prev[v];
            c = c + self.arcs[a].cost;
            v = self.arcs[a ^ 1].to;
        }
        c
    }

    /// Total cost of the current flow, recomputed edge by edge.
    pub fn total_cost(&self) -> C {
        let mut c = C::zero();
        for id in 0..self.edge_count() {
            let f = self.flow(id);
            let unit = self.arcs[2 * id].cost;
            for _ in 0..f {
                c = c + unit;
            }
        }
        c
    }
}
