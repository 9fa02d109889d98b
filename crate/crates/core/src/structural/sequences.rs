//! Matching between OPT and L facilities, the edge mapping p, the sequences
//! it induces and the reassignment μ built from them.

use std::collections::HashMap;

use serde::Serialize;

use super::network::{DemandFlow, FlowNetwork};
use super::rounding::{round_fractional_matching, FracEdge};
use crate::instance::Solution;
use crate::scalar::Scalar;

/// Integral matching on the support of the halved flow.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matching<T> {
    /// Φ edge ids used by the matching.
    pub edges: Vec<usize>,
    pub mate_a: Vec<Option<usize>>,
    pub mate_b: Vec<Option<usize>>,
    pub weight: T,
    /// Weight of the fractional matching it was rounded from.
    pub fractional_weight: T,
}

impl<T: Scalar> Matching<T> {
    /// Builds the matching from explicit Φ edge ids, which must be disjoint.
    pub fn from_edges(net: &FlowNetwork<T>, edges: Vec<usize>, fractional_weight: T) -> Self {
        let mut mate_a = vec![None; net.side()];
        let mut mate_b = vec![None; net.side()];
        let mut weight = T::zero();
        for &id in &edges {
            let e = net.edges[id];
            debug_assert!(mate_a[e.a].is_none() && mate_b[e.b].is_none());
            mate_a[e.a] = Some(e.b);
            mate_b[e.b] = Some(e.a);
            weight = weight + e.weight;
        }
        Matching { edges, mate_a, mate_b, weight, fractional_weight }
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mate_a.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b)))
    }
}

/// Rounds the flow scaled by `1/η'` to an integral matching.
pub fn round_matching<T: Scalar>(net: &FlowNetwork<T>, flow: &DemandFlow<T>) -> Matching<T> {
    let denom = (net.eta_prime / 2) as i64;
    let support: Vec<usize> = (0..net.edges.len()).filter(|&i| flow.units[i] > 0).collect();
    let frac: Vec<FracEdge<T>> = support
        .iter()
        .map(|&i| {
            let e = net.edges[i];
            FracEdge { left: e.a, right: e.b, weight: e.weight, x: (flow.units[i] / 2) as i64 }
        })
        .collect();
    let fractional_weight = flow.cost / T::of_usize(net.eta_prime);
    let chosen = round_fractional_matching(net.side(), &frac, denom)
        .into_iter()
        .map(|j| support[j])
        .collect();
    Matching::from_edges(net, chosen, fractional_weight)
}

/// Image of an edge under p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PImage {
    Edge(usize),
    /// The sequence stops at this matched A vertex.
    Terminal(usize),
}

/// The edge mapping p, defined on edges entering matched B vertices from
/// anywhere other than their mate. Saturated edges map to saturated edges
/// and unsaturated to unsaturated, in ascending id order.
pub fn build_p<T: Scalar>(net: &FlowNetwork<T>, flow: &DemandFlow<T>, matching: &Matching<T>) -> Vec<Option<PImage>> {
    let mut p = vec![None; net.edges.len()];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); net.side()];
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); net.side()];
    for (id, e) in net.edges.iter().enumerate() {
        if !e.deleted {
            incoming[e.b].push(id);
            outgoing[e.a].push(id);
        }
    }
    for (fa, lb) in matching.matched_pairs() {
        for saturated in [false, true] {
            let ins: Vec<usize> = incoming[lb]
                .iter()
                .copied()
                .filter(|&id| net.edges[id].a != fa && flow.saturated_edge(id) == saturated)
                .collect();
            let outs: Vec<usize> = outgoing[fa]
                .iter()
                .copied()
                .filter(|&id| net.edges[id].b != lb && flow.saturated_edge(id) == saturated)
                .collect();
            for (i, &id) in ins.iter().enumerate() {
                p[id] = Some(match outs.get(i) {
                    Some(&out) => PImage::Edge(out),
                    None => PImage::Terminal(fa),
                });
            }
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeqEnd {
    /// Stops at a matched A vertex.
    Matched(usize),
    /// Last edge enters an unmatched B vertex.
    Unmatched(usize),
}

/// `S(e) = e, p(e), p(p(e)), …` for an edge `e` leaving an unmatched A vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sequence {
    pub start: usize,
    pub edges: Vec<usize>,
    pub end: SeqEnd,
}

impl Sequence {
    pub fn is_route_to_matched(&self) -> bool {
        matches!(self.end, SeqEnd::Matched(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sequences {
    pub p: Vec<Option<PImage>>,
    pub seqs: Vec<Sequence>,
    /// Edges that occur more than once over all sequences (should be empty).
    pub repeated_edges: Vec<usize>,
}

impl Sequences {
    /// Sequence starting with Φ edge `e`, if any.
    pub fn of_edge(&self, e: usize) -> Option<&Sequence> {
        self.seqs.iter().find(|s| s.edges[0] == e)
    }
}

/// Builds p and every sequence. A sequence that would revisit an edge is cut
/// there and the edge recorded in `repeated_edges`.
pub fn build_sequences<T: Scalar>(net: &FlowNetwork<T>, flow: &DemandFlow<T>, matching: &Matching<T>) -> Sequences {
    let p = build_p(net, flow, matching);
    let mut visits = vec![0usize; net.edges.len()];
    let mut repeated = Vec::new();
    let mut seqs = Vec::new();
    for (id, e) in net.edges.iter().enumerate() {
        if e.deleted || matching.mate_a[e.a].is_some() {
            continue;
        }
        let mut edges = vec![id];
        let mut cur = id;
        let end = loop {
            visits[cur] += 1;
            if visits[cur] == 2 {
                repeated.push(cur);
            }
            let b = net.edges[cur].b;
            match (matching.mate_b[b], p[cur]) {
                (None, _) => break SeqEnd::Unmatched(b),
                (Some(fa), None) => break SeqEnd::Matched(fa),
                (Some(_), Some(PImage::Terminal(fa))) => break SeqEnd::Matched(fa),
                (Some(_), Some(PImage::Edge(next))) => {
                    if edges.contains(&next) {
                        repeated.push(next);
                        break SeqEnd::Matched(net.edges[next].a);
                    }
                    edges.push(next);
                    cur = next;
                }
            }
        };
        seqs.push(Sequence { start: e.a, edges, end });
    }
    repeated.sort_unstable();
    repeated.dedup();
    Sequences { p, seqs, repeated_edges: repeated }
}

/// Heavy unmatched A vertex with too many route-to-unmatched sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeavyViolation {
    pub facility: usize,
    pub count: usize,
    pub bound: usize,
}

/// Every heavy unmatched A vertex starts at most `η'/2 − 1` route-to-unmatched sequences.
pub fn heavy_unmatched_bound_check<T: Scalar>(
    net: &FlowNetwork<T>,
    matching: &Matching<T>,
    seqs: &Sequences,
) -> Vec<HeavyViolation> {
    let bound = (net.eta_prime / 2).saturating_sub(1);
    (0..net.side())
        .filter(|&a| net.is_heavy(a) && matching.mate_a[a].is_none())
        .filter_map(|a| {
            let count = seqs.seqs.iter().filter(|s| s.start == a && !s.is_route_to_matched()).count();
            (count > bound).then_some(HeavyViolation { facility: a, count, bound })
        })
        .collect()
}

/// The reassignment μ (or μ^p when p > 1) and the quantities bounding it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuResult<T> {
    /// Solution on the augmented instance with OPT's centers.
    pub solution: Solution<T>,
    /// Clients whose assignment changed.
    pub moved: Vec<usize>,
    /// Path length of each sequence from a heavy unmatched vertex, by sequence index.
    pub path_lengths: Vec<(usize, T)>,
    pub path_sum: T,
    /// `4` for p = 1, `2^{4p}` otherwise, times `cost(OPT) + cost(L)`.
    pub path_bound: T,
    /// `Σ_{c moved} cost(c, μ(c))`.
    pub moved_cost: T,
    /// Load of every A vertex under μ.
    pub loads: Vec<usize>,
    /// Capacity violations as `(A vertex, load, bound)`.
    pub load_violations: Vec<(usize, usize, usize)>,
}

/// Constant of the path-length bound.
pub fn path_constant<T: Scalar>(p: T) -> T {
    if p.approx_eq(T::one(), 1e-12) {
        T::lit(4.0)
    } else {
        T::lit(2.0).powf(T::lit(4.0) * p)
    }
}

/// Lightest Φ edge between `a` and `b`.
fn min_parallel<T: Scalar>(net: &FlowNetwork<T>) -> HashMap<(usize, usize), T> {
    let mut best: HashMap<(usize, usize), T> = HashMap::new();
    for e in net.live_edges() {
        let w = best.entry((e.a, e.b)).or_insert(e.weight);
        if e.weight < *w {
            *w = e.weight;
        }
    }
    best
}

/// Length of the path associated with a sequence.
pub fn path_length<T: Scalar>(net: &FlowNetwork<T>, matching: &Matching<T>, seq: &Sequence) -> T {
    let p = net.inst.p;
    let linear = p.approx_eq(T::one(), 1e-12);
    let parallel = min_parallel(net);
    let mut total = T::zero();
    for &id in &seq.edges {
        let e = net.edges[id];
        let hop = matching.mate_b[e.b];
        if linear {
            total = total + e.weight;
            if let Some(fa) = hop {
                total = total + parallel.get(&(fa, e.b)).copied().unwrap_or_else(|| net.fac_dist(fa, e.b));
            }
        } else {
            let mut d = net.fac_dist(e.a, e.b);
            if let Some(fa) = hop {
                d = d + net.fac_dist(fa, e.b);
            }
            total = total + d.powp(p);
        }
    }
    total
}

/// Builds μ: clients of route-to-matched sequences from heavy unmatched
/// vertices move to the terminal (p = 1) or shift one step along the chain
/// (p > 1). Every other client keeps its OPT facility.
pub fn assignment_mu<T: Scalar>(net: &FlowNetwork<T>, matching: &Matching<T>, seqs: &Sequences) -> MuResult<T> {
    let p = net.inst.p;
    let linear = p.approx_eq(T::one(), 1e-12);
    let mut assignment = net.opt.assignment.clone();
    let mut moved = Vec::new();
    let mut path_lengths = Vec::new();
    let mut path_sum = T::zero();
    for (si, s) in seqs.seqs.iter().enumerate() {
        if !net.is_heavy(s.start) {
            continue;
        }
        let len = path_length(net, matching, s);
        path_lengths.push((si, len));
        path_sum = path_sum + len;
        let SeqEnd::Matched(term) = s.end else { continue };
        if linear {
            let c = net.edges[s.edges[0]].client;
            assignment[c] = net.a_fac[term];
            moved.push(c);
        } else {
            for (i, &id) in s.edges.iter().enumerate() {
                let target = s.edges.get(i + 1).map_or(term, |&nx| net.edges[nx].a);
                let c = net.edges[id].client;
                assignment[c] = net.a_fac[target];
                moved.push(c);
            }
        }
    }
    moved.sort_unstable();
    moved.dedup();
    let moved_cost = moved.iter().fold(T::zero(), |acc, &c| acc + net.inst.cost(c, assignment[c]));
    let solution = Solution::from_assignment(&net.inst, net.a_fac.clone(), assignment).expect("valid assignment");
    let loads: Vec<usize> = net.a_fac.iter().map(|&f| solution.load_of(f)).collect();
    let half = net.eta / 2;
    let load_violations = loads
        .iter()
        .enumerate()
        .filter_map(|(a, &l)| {
            let bound = if matching.mate_a[a].is_some() { net.eta } else { half };
            (l > bound).then_some((a, l, bound))
        })
        .collect();
    MuResult {
        solution,
        moved,
        path_lengths,
        path_sum,
        path_bound: path_constant(p) * net.total(),
        moved_cost,
        loads,
        load_violations,
    }
}
