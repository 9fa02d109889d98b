//! Optimal capacitated assignment for a fixed center set, solution
//! verification, and an exhaustive exact solver for small instances.

use serde::Serialize;
use thiserror::Error;

use crate::flow::FlowGraph;
use crate::instance::{solution_cost, Instance, Solution};
use crate::scalar::{Scalar, TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("infeasible: total capacity {capacity} < demand {demand}")]
    Infeasible { capacity: usize, demand: usize },
    #[error("center set is empty")]
    NoCenters,
    #[error("center {0} is not a candidate facility")]
    UnknownFacility(usize),
}

/// Min-cost assignment of every client unit to `centers`, each with capacity η.
pub fn optimal_assignment<T: Scalar>(
    inst: &Instance<T>,
    centers: &[usize],
) -> Result<Solution<T>, AssignError> {
    let caps = vec![inst.eta; centers.len()];
    optimal_assignment_with_caps(inst, centers, &caps)
}

/// As [`optimal_assignment`] but with an explicit capacity per center.
pub fn optimal_assignment_with_caps<T: Scalar>(
    inst: &Instance<T>,
    centers: &[usize],
    caps: &[usize],
) -> Result<Solution<T>, AssignError> {
    assert_eq!(centers.len(), caps.len(), "one capacity per center");
    if centers.is_empty() {
        return Err(AssignError::NoCenters);
    }
    if let Some(&f) = centers.iter().find(|&&f| f >= inst.facilities.len()) {
        return Err(AssignError::UnknownFacility(f));
    }
    // Merge duplicates, sort by facility index for deterministic ties.
    let mut order: Vec<(usize, usize)> = centers.iter().copied().zip(caps.iter().copied()).collect();
    order.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (f, c) in order {
        match merged.last_mut() {
            Some(last) if last.0 == f => last.1 += c,
            _ => merged.push((f, c)),
        }
    }
    let demand = inst.demand();
    let capacity: usize = merged.iter().map(|&(_, c)| c).sum();
    if capacity < demand {
        return Err(AssignError::Infeasible { capacity, demand });
    }
    let centers_sorted: Vec<usize> = merged.iter().map(|&(f, _)| f).collect();
    if demand == 0 {
        return Ok(Solution { centers: centers_sorted, assignment: Vec::new(), cost: T::zero() });
    }

    let groups = inst.client_groups();
    let g = groups.len();
    let m = merged.len();
    let source = 0;
    let sink = 1 + g + m;
    let mut net = FlowGraph::<T>::new(sink + 1);
    for (gi, (_, units)) in groups.iter().enumerate() {
        net.add_edge(source, 1 + gi, units.len() as i64, T::zero());
    }
    let mut edge_ids = vec![vec![0usize; m]; g];
    for (gi, (point, units)) in groups.iter().enumerate() {
        for (j, &(f, _)) in merged.iter().enumerate() {
            let c = inst.dist(*point, inst.facilities[f]).powp(inst.p);
            edge_ids[gi][j] = net.add_edge(1 + gi, 1 + g + j, units.len() as i64, c);
        }
    }
    for (j, &(_, cap)) in merged.iter().enumerate() {
        net.add_edge(1 + g + j, sink, cap as i64, T::zero());
    }
    let res = net.min_cost_flow(source, sink, demand as i64);
    debug_assert_eq!(res.value as usize, demand);

    let mut assignment = vec![usize::MAX; demand];
    for (gi, (_, units)) in groups.iter().enumerate() {
        let mut it = units.iter();
        for (j, &(f, _)) in merged.iter().enumerate() {
            for _ in 0..net.flow(edge_ids[gi][j]) {
                let &c = it.next().expect("flow matches multiplicity");
                assignment[c] = f;
            }
        }
    }
    let mut sol = Solution { centers: centers_sorted, assignment, cost: T::zero() };
    sol.cost = solution_cost(inst, &sol).expect("assignment uses open centers");
    Ok(sol)
}

/// A single problem found by [`verify_solution`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    TooManyCenters { centers: usize, k: usize },
    OverCapacity { center: usize, load: usize, capacity: usize },
    Unassigned { client: usize },
    NotACenter { client: usize, facility: usize },
    UnknownFacility { facility: usize },
    AssignmentLength { expected: usize, got: usize },
    CostMismatch { stored: f64, actual: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every way `sol` fails to be a feasible solution with a correct cost.
pub fn verify_solution<T: Scalar>(inst: &Instance<T>, sol: &Solution<T>) -> VerifyReport {
    let mut v = Vec::new();
    let mut centers = sol.centers.clone();
    centers.sort_unstable();
    centers.dedup();
    if centers.len() > inst.k {
        v.push(Violation::TooManyCenters { centers: centers.len(), k: inst.k });
    }
    for &f in &centers {
        if f >= inst.facilities.len() {
            v.push(Violation::UnknownFacility { facility: f });
        }
    }
    if sol.assignment.len() != inst.demand() {
        v.push(Violation::AssignmentLength { expected: inst.demand(), got: sol.assignment.len() });
    }
    let mut loads = vec![0usize; inst.facilities.len()];
    let mut consistent = true;
    for c in 0..inst.demand() {
        match sol.assignment.get(c) {
            None => {
                v.push(Violation::Unassigned { client: c });
                consistent = false;
            }
            Some(&f) if centers.binary_search(&f).is_err() || f >= inst.facilities.len() => {
                v.push(Violation::NotACenter { client: c, facility: f });
                consistent = false;
            }
            Some(&f) => loads[f] += 1,
        }
    }
    for &f in &centers {
        if f < loads.len() && loads[f] > inst.eta {
            v.push(Violation::OverCapacity { center: f, load: loads[f], capacity: inst.eta });
        }
    }
    if consistent && sol.assignment.len() == inst.demand() {
        let actual: T = (0..inst.demand()).map(|c| inst.cost(c, sol.assignment[c])).sum();
        if !sol.cost.approx_eq(actual, TOL) {
            v.push(Violation::CostMismatch { stored: sol.cost.as_f64(), actual: actual.as_f64() });
        }
    }
    VerifyReport { violations: v }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteForceError {
    #[error("brute force would enumerate {count} subsets, above the limit {limit}")]
    TooLarge { count: u128, limit: u128 },
    #[error(transparent)]
    Assign(#[from] AssignError),
}

/// Default subset-count guard for [`brute_force_opt`].
pub const BRUTE_FORCE_LIMIT: u128 = 100_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Calls `visit` on every `size`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, size: usize, mut visit: impl FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        visit(&idx);
        let mut i = size;
        while i > 0 && idx[i - 1] == i - 1 + n - size {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        i -= 1;
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact optimum by enumerating center sets of every feasible size up to k.
pub fn brute_force_opt<T: Scalar>(inst: &Instance<T>, limit: u128) -> Result<Solution<T>, BruteForceError> {
    let m = inst.facilities.len();
    let kmax = inst.k.min(m);
    let count = binomial(m, kmax);
    if count > limit {
        return Err(BruteForceError::TooLarge { count, limit });
    }
    let lo = inst.demand().div_ceil(inst.eta).max(1);
    let mut best: Option<Solution<T>> = None;
    for size in lo..=kmax {
        for_each_subset(m, size, |set| {
            if let Ok(sol) = optimal_assignment(inst, set) {
                if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
                    best = Some(sol);
                }
            }
        });
    }
    best.ok_or(BruteForceError::Assign(AssignError::Infeasible {
        capacity: kmax * inst.eta,
        demand: inst.demand(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<[f64; 2]> {
        v.iter().map(|&(x, y)| [x, y]).collect()
    }

    #[test]
    fn assignment_examples() {
        let inst = Instance::plane(&pts(&[(0., 0.), (1., 0.)]), &pts(&[(0., 0.)]), 1, 2, 1.0).unwrap();
        assert_eq!(optimal_assignment(&inst, &[0]).unwrap().cost, 1.0);

        let inst =
            Instance::plane(&pts(&[(0., 0.), (2., 0.)]), &pts(&[(0., 0.), (2., 0.)]), 2, 1, 1.0).unwrap();
        assert_eq!(optimal_assignment(&inst, &[0, 1]).unwrap().cost, 0.0);

        let inst = Instance::plane(
            &pts(&[(0., 0.), (1., 0.), (3., 0.)]),
            &pts(&[(0., 0.), (3., 0.)]),
            2,
            2,
            2.0,
        )
        .unwrap();
        let sol = optimal_assignment(&inst, &[0, 1]).unwrap();
        assert_eq!(sol.cost, 1.0);
        assert_eq!(sol.assignment, vec![0, 0, 1]);
    }

    #[test]
    fn infeasible_capacity() {
        let inst =
            Instance::plane(&pts(&[(0., 0.), (1., 0.), (2., 0.)]), &pts(&[(0., 0.), (1., 0.)]), 2, 2, 1.0)
                .unwrap();
        assert!(matches!(optimal_assignment(&inst, &[0]), Err(AssignError::Infeasible { .. })));
    }

    #[test]
    fn verify_flags_problems() {
        let inst =
            Instance::plane(&pts(&[(0., 0.), (1., 0.), (2., 0.)]), &pts(&[(0., 0.), (2., 0.)]), 2, 2, 1.0)
                .unwrap();
        let good = optimal_assignment(&inst, &[0, 1]).unwrap();
        assert!(verify_solution(&inst, &good).is_ok());

        let over = Solution { centers: vec![0, 1], assignment: vec![0, 0, 0], cost: 3.0 };
        let rep = verify_solution(&inst, &over);
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::OverCapacity { center: 0, load: 3, .. })));

        let stale = Solution { cost: good.cost + 1.0, ..good.clone() };
        let rep = verify_solution(&inst, &stale);
        assert!(matches!(rep.violations[..], [Violation::CostMismatch { .. }]));
    }

    #[test]
    fn subsets_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut empty = 0;
        for_each_subset(3, 0, |_| empty += 1);
        assert_eq!(empty, 1);
        assert_eq!(binomial(5, 2), 10);
    }

    #[test]
    fn brute_force_examples() {
        let inst = Instance::plane(&pts(&[(0., 0.)]), &pts(&[(0., 0.)]), 1, 1, 1.0).unwrap();
        assert_eq!(brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap().cost, 0.0);

        let sq = pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        let inst = Instance::plane(&sq, &sq, 2, 2, 1.0).unwrap();
        // Oracle: every pair of centers, every capacity-respecting assignment.
        let mut best = f64::INFINITY;
        for_each_subset(4, 2, |set| {
            for code in 0..16u32 {
                let assign: Vec<usize> = (0..4).map(|c| set[((code >> c) & 1) as usize]).collect();
                if set.iter().all(|f| assign.iter().filter(|&a| a == f).count() <= 2) {
                    let cost: f64 = (0..4).map(|c| inst.cost(c, assign[c])).sum();
                    best = best.min(cost);
                }
            }
        });
        assert_eq!(best, 2.0);
        assert_eq!(brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap().cost, best);
    }

    #[test]
    fn brute_force_guard() {
        let p: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, 0.0]).collect();
        let inst = Instance::plane(&p[..2], &p, 10, 1, 1.0).unwrap();
        assert!(matches!(brute_force_opt(&inst, BRUTE_FORCE_LIMIT), Err(BruteForceError::TooLarge { .. })));
    }
}
