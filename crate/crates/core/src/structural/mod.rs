//! Structural harness: builds the flow and matching argument that relates an
//! optimal solution OPT to a reference solution L, and checks every bound of
//! that argument on concrete instances.
//!
//! The pipeline is [`build_phi`] → [`max_demand_flow`] → [`round_matching`]
//! → [`build_sequences`] → [`assignment_mu`] → [`partition_and_pairs`], then
//! the randomized [`sample_g_star`] and [`sample_swap`]. [`StructureState`]
//! runs all deterministic stages at once and [`verify_structure`] produces a
//! report of named checks.

mod network;
mod pairs;
mod rounding;
mod sequences;
#[cfg(test)]
mod tests;

use serde::Serialize;
use thiserror::Error;

pub use network::{build_phi, max_demand_flow, DemandFlow, FlowNetwork, PhiEdge};
pub use pairs::{partition_and_pairs, sample_g_star, sample_swap, GStar, Partition, SwapOutcome};
pub use rounding::{round_fractional_matching, FracEdge};
pub use sequences::{
    assignment_mu, build_p, build_sequences, heavy_unmatched_bound_check, path_constant, path_length, round_matching,
    HeavyViolation, Matching, MuResult, PImage, SeqEnd, Sequence, Sequences,
};

use crate::instance::{CostError, Instance, Solution};
use crate::scalar::Scalar;

/// Constant pinned for the pair-closing expectation check.
pub const G_STAR_CONSTANT: f64 = 12.0;
/// Constant pinned for the swap success check.
pub const SWAP_CONSTANT: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructError {
    #[error("capacity η = {0} too small; the harness needs η ≥ 2")]
    CapacityTooSmall(usize),
    #[error("input solution infeasible: {0}")]
    Infeasible(String),
    #[error("no flow meets the vertex demands")]
    DemandInfeasible,
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Every deterministic stage of the construction for one (OPT, L) pair.
#[derive(Clone, Debug)]
pub struct StructureState<T> {
    pub net: FlowNetwork<T>,
    pub flow: DemandFlow<T>,
    pub matching: Matching<T>,
    pub seqs: Sequences,
    pub mu: MuResult<T>,
    pub partition: Partition,
}

impl<T: Scalar> StructureState<T> {
    pub fn build(inst: &Instance<T>, opt: &Solution<T>, local: &Solution<T>) -> Result<Self, StructError> {
        let net = build_phi(inst, opt, local)?;
        let flow = max_demand_flow(&net)?;
        let matching = round_matching(&net, &flow);
        let seqs = build_sequences(&net, &flow, &matching);
        let mu = assignment_mu(&net, &matching, &seqs);
        let partition = partition_and_pairs(&net, &matching);
        Ok(StructureState { net, flow, matching, seqs, mu, partition })
    }

    /// Λ: heavy A vertices whose throughput is η'.
    pub fn lambda(&self) -> Vec<usize> {
        (0..self.net.side())
            .filter(|&a| self.net.is_heavy(a) && self.flow.saturated_a(&self.net, a))
            .collect()
    }

    /// ζ: B vertices whose throughput is η'.
    pub fn zeta(&self) -> Vec<usize> {
        (0..self.net.side()).filter(|&b| self.flow.saturated_b(&self.net, b)).collect()
    }

    /// Deterministic checks, one per invariant or bound.
    pub fn checks(&self) -> Vec<Check> {
        let net = &self.net;
        let total = net.total().as_f64();
        let mut out = Vec::new();

        let mut del_a = vec![0usize; net.side()];
        let mut del_b = vec![0usize; net.side()];
        for e in net.edges.iter().filter(|e| e.deleted) {
            del_a[e.a] += 1;
            del_b[e.b] += 1;
        }
        let worst = del_a.iter().chain(&del_b).copied().max().unwrap_or(0);
        out.push(Check::at_most("deleted-per-facility", worst as f64, 1.0));
        let stray = if net.eta % 2 == 0 { net.deleted_clients().len() } else { 0 };
        out.push(Check::at_most("deleted-only-when-odd", stray as f64, 0.0));
        out.push(Check::at_most("eta-prime-even", (net.eta_prime % 2) as f64, 0.0));

        out.push(Check::at_most("flow-feasible", if self.flow.is_feasible(net) { 0.0 } else { 1.0 }, 0.0));
        out.push(Check::at_most("flow-cost", self.flow.cost.as_f64(), 2.0 * total));

        let uncovered = self.lambda().iter().filter(|&&a| self.matching.mate_a[a].is_none()).count()
            + self.zeta().iter().filter(|&&b| self.matching.mate_b[b].is_none()).count();
        out.push(Check::at_most("matching-covers-saturated", uncovered as f64, 0.0));
        out.push(Check::at_most(
            "matching-weight-vs-fractional",
            self.matching.weight.as_f64(),
            self.matching.fractional_weight.as_f64(),
        ));
        out.push(Check::at_most(
            "matching-weight",
            self.matching.weight.as_f64(),
            2.0 * total / net.eta_prime as f64,
        ));
        let zero_flow = self.matching.edges.iter().filter(|&&e| self.flow.units[e] == 0).count();
        out.push(Check::at_most("matched-pairs-carry-flow", zero_flow as f64, 0.0));

        out.push(Check::at_most("sequence-edge-repeats", self.seqs.repeated_edges.len() as f64, 0.0));
        let heavy = heavy_unmatched_bound_check(net, &self.matching, &self.seqs);
        out.push(Check::at_most("heavy-unmatched-route-to-unmatched", heavy.len() as f64, 0.0));
        out.push(Check::at_most("path-length-sum", self.mu.path_sum.as_f64(), self.mu.path_bound.as_f64()));
        out.push(Check::at_most("mu-load-violations", self.mu.load_violations.len() as f64, 0.0));
        out.push(Check::at_most("mu-moved-cost", self.mu.moved_cost.as_f64(), self.mu.path_bound.as_f64()));
        let changed = (0..net.edges.len())
            .filter(|c| self.mu.solution.assignment[*c] != net.opt.assignment[*c] && self.mu.moved.binary_search(c).is_err())
            .count();
        out.push(Check::at_most("mu-unmoved-keep-opt", changed as f64, 0.0));

        let p = &self.partition;
        let card = p.f_hat.len().abs_diff(p.l_hat.len()) + p.f_tilde.len().abs_diff(p.l_tilde.len());
        out.push(Check::at_most("partition-cardinality", card as f64, 0.0));
        out
    }
}

/// Named comparison `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = 1e-9 * rhs.abs().max(1.0);
        Check { name: name.to_string(), lhs, rhs, pass: lhs <= rhs + slack }
    }

    pub fn at_least(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = 1e-9 * rhs.abs().max(1.0);
        Check { name: name.to_string(), lhs, rhs, pass: lhs + slack >= rhs }
    }
}

/// Monte-Carlo parameters for the randomized constructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleParams {
    pub eps: f64,
    pub pi: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams { eps: 0.3, pi: 0.3, samples: 200, seed: 0 }
    }
}

/// Summary of the pair-closing samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GStarSummary {
    pub pairs: usize,
    pub mean_cost: f64,
    pub mean_selected: f64,
    /// `(mean − cost(OPT)) / (ε·(cost(OPT) + cost(L)))`, floored at zero.
    pub fitted_constant: f64,
    pub infeasible_runs: usize,
}

/// Summary of the swap samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapSummary {
    /// Fraction of runs within `(1 + Cπ)cost(OPT) + Cπ(cost(OPT) + cost(L))` for the pinned C.
    pub success_rate: f64,
    pub target_rate: f64,
    /// Smallest C for which the success rate reaches the target.
    pub fitted_constant: f64,
    pub mean_swapped: f64,
    pub displaced: usize,
    pub repairs: usize,
    pub infeasible_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    /// Whether OPT was certified optimal or is the best known solution.
    pub opt_label: String,
    pub cost_opt: f64,
    pub cost_local: f64,
    pub eta: usize,
    pub eta_prime: usize,
    pub path_constant: f64,
    pub params: SampleParams,
    pub checks: Vec<Check>,
    pub g_star: GStarSummary,
    pub swap: SwapSummary,
}

impl StructureReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn feasible<T: Scalar>(inst: &Instance<T>, sol: &Solution<T>) -> bool {
    crate::assign::verify_solution(inst, sol).is_ok()
}

/// Runs every check plus the Monte-Carlo estimates for both randomized constructions.
pub fn verify_structure<T: Scalar>(state: &StructureState<T>, params: SampleParams, opt_label: &str) -> StructureReport {
    let net = &state.net;
    let c_opt = net.cost_opt.as_f64();
    let total = net.total().as_f64();
    let runs = params.samples.max(1);
    let mut checks = state.checks();

    let mut g_costs = Vec::with_capacity(runs);
    let mut g_selected = 0usize;
    let mut g_bad = 0;
    let mut swap_need = Vec::with_capacity(runs);
    let mut swapped = 0usize;
    let mut displaced = 0;
    let mut repairs = 0;
    let mut s_bad = 0;
    for r in 0..runs {
        let seed = params.seed.wrapping_add(r as u64);
        let g = sample_g_star(net, &state.seqs, &state.partition, params.eps, seed);
        if !feasible(&net.inst, &g.solution) {
            g_bad += 1;
        }
        g_costs.push(g.solution.cost.as_f64());
        g_selected += g.selected.len();
        let s = sample_swap(net, &state.partition, &g.solution, params.pi, seed ^ 0x9e37_79b9_7f4a_7c15);
        if !feasible(&net.inst, &s.solution) {
            s_bad += 1;
        }
        swapped += s.swapped.len();
        displaced += s.displaced;
        repairs += s.repairs;
        // Constant this run needs: cost ≤ (1 + Cπ)OPT + Cπ(OPT + L).
        let denom = params.pi * (c_opt + total);
        let excess = s.solution.cost.as_f64() - c_opt;
        swap_need.push(if excess <= 0.0 { 0.0 } else if denom > 0.0 { excess / denom } else { f64::INFINITY });
    }
    let mean_cost = g_costs.iter().sum::<f64>() / runs as f64;
    let g_fit = if params.eps > 0.0 && total > 0.0 { ((mean_cost - c_opt) / (params.eps * total)).max(0.0) } else { 0.0 };
    let g_star = GStarSummary {
        pairs: state.partition.pairs.len(),
        mean_cost,
        mean_selected: g_selected as f64 / runs as f64,
        fitted_constant: g_fit,
        infeasible_runs: g_bad,
    };
    checks.push(Check::at_most("g-star-feasible", g_bad as f64, 0.0));
    checks.push(Check::at_most(
        "g-star-mean-cost",
        mean_cost,
        c_opt + G_STAR_CONSTANT * params.eps * total,
    ));

    let target_rate = (1.0 - params.pi - 0.1).max(0.0);
    let success = swap_need.iter().filter(|&&c| c <= SWAP_CONSTANT).count();
    swap_need.sort_by(|a, b| a.total_cmp(b));
    let needed = ((target_rate * runs as f64).ceil() as usize).clamp(1, runs);
    let swap = SwapSummary {
        success_rate: success as f64 / runs as f64,
        target_rate,
        fitted_constant: swap_need[needed - 1],
        mean_swapped: swapped as f64 / runs as f64,
        displaced,
        repairs,
        infeasible_runs: s_bad,
    };
    checks.push(Check::at_most("swap-feasible", s_bad as f64, 0.0));
    checks.push(Check::at_least("swap-success-rate", swap.success_rate, target_rate));

    StructureReport {
        opt_label: opt_label.to_string(),
        cost_opt: c_opt,
        cost_local: net.cost_local.as_f64(),
        eta: net.eta,
        eta_prime: net.eta_prime,
        path_constant: path_constant(net.inst.p).as_f64(),
        params,
        checks,
        g_star,
        swap,
    }
}
