//! The bipartite network Φ between the facilities of OPT and of L, its
//! parity preprocessing and the 0/2 demand flow.

use serde::Serialize;

use super::rounding::{round_fractional_matching, FracEdge};
use super::StructError;
use crate::assign::verify_solution;
use crate::flow::{FlowGraph, LexCost};
use crate::instance::{Instance, Solution};
use crate::scalar::Scalar;

/// Edge of Φ for one client unit: from its OPT facility to its L facility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiEdge<T> {
    pub client: usize,
    /// A-side vertex (OPT facility).
    pub a: usize,
    /// B-side vertex (L facility).
    pub b: usize,
    /// `dist(c, f)^p + dist(c, ℓ)^p`.
    pub weight: T,
    /// Removed by the parity preprocessing.
    pub deleted: bool,
}

/// Φ together with the augmented instance it lives in.
///
/// The augmented instance appends a copy of every L facility, so OPT and L
/// centers are always distinct facilities even when they share a location.
/// Both sides are padded with unused facilities to the same size.
#[derive(Clone, Debug)]
pub struct FlowNetwork<T> {
    pub inst: Instance<T>,
    /// Facility of every A vertex.
    pub a_fac: Vec<usize>,
    /// Facility (a copy) of every B vertex.
    pub b_fac: Vec<usize>,
    pub opt: Solution<T>,
    pub local: Solution<T>,
    /// One edge per client unit, indexed by client.
    pub edges: Vec<PhiEdge<T>>,
    pub eta: usize,
    /// η rounded down to even.
    pub eta_prime: usize,
    /// Degrees η(f) after preprocessing.
    pub deg_a: Vec<usize>,
    pub deg_b: Vec<usize>,
    pub cost_opt: T,
    pub cost_local: T,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn side(&self) -> usize {
        self.a_fac.len()
    }

    pub fn live_edges(&self) -> impl Iterator<Item = &PhiEdge<T>> + '_ {
        self.edges.iter().filter(|e| !e.deleted)
    }

    pub fn deleted_clients(&self) -> Vec<usize> {
        self.edges.iter().filter(|e| e.deleted).map(|e| e.client).collect()
    }

    /// `cost(OPT) + cost(L)`.
    pub fn total(&self) -> T {
        self.cost_opt + self.cost_local
    }

    /// Heavy A vertices: `η(f) ≥ η'/2`.
    pub fn is_heavy(&self, a: usize) -> bool {
        2 * self.deg_a[a] >= self.eta_prime
    }

    /// Distance between the facilities of an A and a B vertex.
    pub fn fac_dist(&self, a: usize, b: usize) -> T {
        self.inst.facility_dist(self.a_fac[a], self.b_fac[b])
    }
}

fn pad_centers(centers: &[usize], m: usize, size: usize) -> Vec<usize> {
    let mut out: Vec<usize> = centers.to_vec();
    out.sort_unstable();
    out.dedup();
    let mut f = 0;
    while out.len() < size && f < m {
        if !centers.contains(&f) {
            out.push(f);
        }
        f += 1;
    }
    out
}

/// Builds Φ for `opt` and `local`, including the parity preprocessing when η is odd.
pub fn build_phi<T: Scalar>(
    inst: &Instance<T>,
    opt: &Solution<T>,
    local: &Solution<T>,
) -> Result<FlowNetwork<T>, StructError> {
    if inst.eta < 2 {
        return Err(StructError::CapacityTooSmall(inst.eta));
    }
    for (name, s) in [("OPT", opt), ("L", local)] {
        let rep = verify_solution(inst, s);
        if !rep.is_ok() {
            return Err(StructError::Infeasible(format!("{name}: {:?}", rep.violations)));
        }
    }
    let m = inst.facilities.len();
    let size = opt.centers.len().max(local.centers.len());
    let a_list = pad_centers(&opt.centers, m, size);
    let b_list = pad_centers(&local.centers, m, size);

    let mut aug = inst.clone();
    let b_fac: Vec<usize> = (0..size).map(|j| m + j).collect();
    for &f in &b_list {
        aug.facilities.push(inst.facilities[f]);
    }
    let a_of: Vec<Option<usize>> = (0..m).map(|f| a_list.iter().position(|&x| x == f)).collect();
    let b_of: Vec<Option<usize>> = (0..m).map(|f| b_list.iter().position(|&x| x == f)).collect();

    let n = inst.demand();
    let mut edges = Vec::with_capacity(n);
    for c in 0..n {
        let a = a_of[opt.assignment[c]].expect("OPT center listed");
        let b = b_of[local.assignment[c]].expect("L center listed");
        let weight = inst.cost(c, opt.assignment[c]) + inst.cost(c, local.assignment[c]);
        edges.push(PhiEdge { client: c, a, b, weight, deleted: false });
    }

    let eta = inst.eta;
    let eta_prime = eta - eta % 2;
    let mut deg_a = vec![0usize; size];
    let mut deg_b = vec![0usize; size];
    for e in &edges {
        deg_a[e.a] += 1;
        deg_b[e.b] += 1;
    }
    if eta % 2 == 1 {
        let frac: Vec<FracEdge<T>> = edges
            .iter()
            .map(|e| FracEdge { left: e.a, right: e.b, weight: e.weight, x: 1 })
            .collect();
        for id in round_fractional_matching(size, &frac, eta as i64) {
            let e = edges[id];
            if deg_a[e.a] == eta || deg_b[e.b] == eta {
                edges[id].deleted = true;
            }
        }
        deg_a.iter_mut().for_each(|d| *d = 0);
        deg_b.iter_mut().for_each(|d| *d = 0);
        for e in edges.iter().filter(|e| !e.deleted) {
            deg_a[e.a] += 1;
            deg_b[e.b] += 1;
        }
    }

    let opt_aug = Solution::from_assignment(&aug, a_list.clone(), opt.assignment.clone())?;
    let local_assign: Vec<usize> = local.assignment.iter().map(|&f| b_fac[b_of[f].expect("listed")]).collect();
    let local_aug = Solution::from_assignment(&aug, b_fac.clone(), local_assign)?;
    Ok(FlowNetwork {
        cost_opt: opt_aug.cost,
        cost_local: local_aug.cost,
        inst: aug,
        a_fac: a_list,
        b_fac,
        opt: opt_aug,
        local: local_aug,
        edges,
        eta,
        eta_prime,
        deg_a,
        deg_b,
    })
}

/// An integral flow on Φ: `0` or `2` units per client edge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemandFlow<T> {
    pub units: Vec<u8>,
    /// Flow through every A and B vertex.
    pub through_a: Vec<usize>,
    pub through_b: Vec<usize>,
    /// `Σ_e flow(e)·weight(e)`.
    pub cost: T,
}

impl<T: Scalar> DemandFlow<T> {
    /// Wraps explicit per-edge flows (each `0` or `2`).
    pub fn from_units(net: &FlowNetwork<T>, units: Vec<u8>) -> Self {
        let mut through_a = vec![0usize; net.side()];
        let mut through_b = vec![0usize; net.side()];
        let mut cost = T::zero();
        for (e, &u) in net.edges.iter().zip(&units) {
            through_a[e.a] += u as usize;
            through_b[e.b] += u as usize;
            cost = cost + T::of_usize(u as usize) * e.weight;
        }
        DemandFlow { units, through_a, through_b, cost }
    }

    pub fn saturated_edge(&self, e: usize) -> bool {
        self.units[e] == 2
    }

    pub fn saturated_a(&self, net: &FlowNetwork<T>, a: usize) -> bool {
        self.through_a[a] == net.eta_prime
    }

    pub fn saturated_b(&self, net: &FlowNetwork<T>, b: usize) -> bool {
        self.through_b[b] == net.eta_prime
    }

    /// Every vertex receives at least `2⌊η(f)/2⌋` and at most η'; deleted edges carry nothing.
    pub fn is_feasible(&self, net: &FlowNetwork<T>) -> bool {
        let demand_ok = (0..net.side()).all(|v| {
            self.through_a[v] >= 2 * (net.deg_a[v] / 2)
                && self.through_b[v] >= 2 * (net.deg_b[v] / 2)
                && self.through_a[v] <= net.eta_prime
                && self.through_b[v] <= net.eta_prime
        });
        let edges_ok = net
            .edges
            .iter()
            .zip(&self.units)
            .all(|(e, &u)| (u == 0 || u == 2) && !(e.deleted && u > 0));
        demand_ok && edges_ok
    }
}

/// Maximum 0/2 flow meeting every vertex demand, of minimum cost among those.
///
/// Works on the halved network (capacities divided by two). Demands are
/// encoded as priority arcs so that, among maximum flows, the cheapest one
/// meeting every demand is returned.
pub fn max_demand_flow<T: Scalar>(net: &FlowNetwork<T>) -> Result<DemandFlow<T>, StructError> {
    let k = net.side();
    let s = 0;
    let t = 2 * k + 1;
    let a_node = |a: usize| 1 + a;
    let b_node = |b: usize| 1 + k + b;
    let mut g = FlowGraph::<LexCost<T>>::new(2 * k + 2);
    let half = (net.eta_prime / 2) as i64;
    let mut demand_total = 0i64;
    for v in 0..k {
        let da = (net.deg_a[v] / 2) as i64;
        let db = (net.deg_b[v] / 2) as i64;
        demand_total += da + db;
        g.add_edge(s, a_node(v), da, LexCost::new(-1, T::zero()));
        g.add_edge(s, a_node(v), half - da, LexCost::new(0, T::zero()));
        g.add_edge(b_node(v), t, db, LexCost::new(-1, T::zero()));
        g.add_edge(b_node(v), t, half - db, LexCost::new(0, T::zero()));
    }
    let mut ids = vec![usize::MAX; net.edges.len()];
    for (i, e) in net.edges.iter().enumerate() {
        if !e.deleted {
            ids[i] = g.add_edge(a_node(e.a), b_node(e.b), 1, LexCost::new(0, e.weight));
        }
    }
    let res = g.min_cost_flow(s, t, i64::MAX);
    if -res.cost.rank < demand_total {
        return Err(StructError::DemandInfeasible);
    }
    let units = ids
        .iter()
        .map(|&id| if id == usize::MAX { 0 } else { 2 * g.flow(id) as u8 })
        .collect();
    Ok(DemandFlow::from_units(net, units))
}
