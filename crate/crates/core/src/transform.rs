//! The transformed instance: badly cut clients move onto their reference
//! center, badly cut reference centers are forced open with their reference
//! clients pinned to them.

use serde::Serialize;
use thiserror::Error;

use crate::assign::{for_each_subset, optimal_assignment_with_caps, AssignError};
use crate::decomp::CutReport;
use crate::instance::{CostError, Instance, Solution};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("reference solution overloads facility {facility} ({load} > {eta})")]
    OverloadedReference { facility: usize, load: usize, eta: usize },
    #[error("reference assignment has {got} entries, expected {expected}")]
    ReferenceLength { expected: usize, got: usize },
    #[error("forced facility {0} is not open")]
    ForcedClosed(usize),
    #[error("facility {facility} serves {load} units, above its residual capacity {cap}")]
    ResidualExceeded { facility: usize, load: usize, cap: usize },
    #[error("solution uses {centers} centers, more than k = {k}")]
    TooManyCenters { centers: usize, k: usize },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Assign(#[from] AssignError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Relocated {
    pub client: usize,
    pub from: usize,
    pub to: usize,
}

/// Transformed instance together with the bookkeeping to lift solutions back.
#[derive(Clone, Debug)]
pub struct TransformedInstance<T> {
    pub original: Instance<T>,
    /// Kept client units at their (possibly relocated) points. Same facilities and k.
    pub reduced: Instance<T>,
    /// Original unit of every reduced unit.
    pub kept: Vec<usize>,
    /// Point of every original unit in the transformed instance.
    pub location: Vec<usize>,
    pub relocations: Vec<Relocated>,
    /// Forced-open facilities, ascending.
    pub forced: Vec<usize>,
    /// Capacity of every facility: the residual for forced ones, η otherwise.
    pub caps: Vec<usize>,
    /// Pinned units and their forced facility.
    pub removed: Vec<(usize, usize)>,
    /// Cost of the pinned units, measured at their transformed locations.
    pub cost_offset: T,
}

/// Builds the transformed instance from a reference solution and a cut report.
pub fn build_id<T: Scalar>(
    inst: &Instance<T>,
    reference: &Solution<T>,
    report: &CutReport,
) -> Result<TransformedInstance<T>, TransformError> {
    let n = inst.demand();
    if reference.assignment.len() != n {
        return Err(TransformError::ReferenceLength { expected: n, got: reference.assignment.len() });
    }
    let mut loads = vec![0usize; inst.facilities.len()];
    for &f in &reference.assignment {
        loads[f] += 1;
    }
    let mut forced: Vec<usize> = reference
        .centers
        .iter()
        .copied()
        .filter(|&f| report.is_badly_cut(inst.facilities[f]))
        .collect();
    forced.sort_unstable();
    forced.dedup();
    let mut caps = vec![inst.eta; inst.facilities.len()];
    for &f in &forced {
        if loads[f] > inst.eta {
            return Err(TransformError::OverloadedReference { facility: f, load: loads[f], eta: inst.eta });
        }
        caps[f] = inst.eta - loads[f];
    }

    let mut location = inst.clients.clone();
    let mut relocations = Vec::new();
    for c in 0..n {
        let home = inst.facilities[reference.assignment[c]];
        if report.is_badly_cut(inst.clients[c]) && inst.clients[c] != home {
            relocations.push(Relocated { client: c, from: inst.clients[c], to: home });
            location[c] = home;
        }
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    let mut cost_offset = T::zero();
    for c in 0..n {
        let f = reference.assignment[c];
        if forced.binary_search(&f).is_ok() {
            removed.push((c, f));
            cost_offset = cost_offset + inst.dist(location[c], inst.facilities[f]).powp(inst.p);
        } else {
            kept.push(c);
        }
    }
    let mut reduced = inst.clone();
    reduced.clients = kept.iter().map(|&c| location[c]).collect();
    Ok(TransformedInstance {
        original: inst.clone(),
        reduced,
        kept,
        location,
        relocations,
        forced,
        caps,
        removed,
        cost_offset,
    })
}

impl<T: Scalar> TransformedInstance<T> {
    /// The transform that moves nothing and forces nothing.
    pub fn identity(inst: &Instance<T>) -> Self {
        let n = inst.demand();
        TransformedInstance {
            original: inst.clone(),
            reduced: inst.clone(),
            kept: (0..n).collect(),
            location: inst.clients.clone(),
            relocations: Vec::new(),
            forced: Vec::new(),
            caps: vec![inst.eta; inst.facilities.len()],
            removed: Vec::new(),
            cost_offset: T::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.relocations.is_empty() && self.forced.is_empty()
    }

    pub fn is_forced(&self, facility: usize) -> bool {
        self.forced.binary_search(&facility).is_ok()
    }

    /// Cost in the transformed instance of a solution of the original instance.
    pub fn cost_in_id(&self, sol: &Solution<T>) -> T {
        sol.assignment
            .iter()
            .enumerate()
            .map(|(c, &f)| self.original.dist(self.location[c], self.original.facilities[f]).powp(self.original.p))
            .sum()
    }

    /// Whether a solution of the original instance opens every forced
    /// facility and keeps its reference clients on it.
    pub fn is_valid(&self, sol: &Solution<T>) -> bool {
        self.forced.iter().all(|&f| sol.is_center(f)) && self.removed.iter().all(|&(c, f)| sol.assignment[c] == f)
    }

    /// Lifts a solution of the reduced instance back to the original one.
    pub fn lift_solution(&self, sol: &Solution<T>) -> Result<Solution<T>, TransformError> {
        if sol.assignment.len() != self.kept.len() {
            return Err(TransformError::ReferenceLength { expected: self.kept.len(), got: sol.assignment.len() });
        }
        for &f in &self.forced {
            if !sol.is_center(f) {
                return Err(TransformError::ForcedClosed(f));
            }
        }
        let mut centers = sol.centers.clone();
        centers.extend_from_slice(&self.forced);
        centers.sort_unstable();
        centers.dedup();
        if centers.len() > self.original.k {
            return Err(TransformError::TooManyCenters { centers: centers.len(), k: self.original.k });
        }
        let mut loads = vec![0usize; self.caps.len()];
        for &f in &sol.assignment {
            loads[f] += 1;
        }
        for (f, &load) in loads.iter().enumerate() {
            if load > self.caps[f] {
                return Err(TransformError::ResidualExceeded { facility: f, load, cap: self.caps[f] });
            }
        }
        let mut assignment = vec![usize::MAX; self.original.demand()];
        for (r, &c) in self.kept.iter().enumerate() {
            assignment[c] = sol.assignment[r];
        }
        for &(c, f) in &self.removed {
            assignment[c] = f;
        }
        Ok(Solution::from_assignment(&self.original, centers, assignment)?)
    }

    /// Optimal assignment of the reduced instance for a center set that
    /// includes every forced facility, respecting residual capacities.
    pub fn assign(&self, centers: &[usize]) -> Result<Solution<T>, AssignError> {
        let mut set: Vec<usize> = centers.to_vec();
        set.extend_from_slice(&self.forced);
        set.sort_unstable();
        set.dedup();
        let caps: Vec<usize> = set.iter().map(|&f| self.caps[f]).collect();
        if self.reduced.demand() == 0 {
            return Ok(Solution { centers: set, assignment: Vec::new(), cost: T::zero() });
        }
        optimal_assignment_with_caps(&self.reduced, &set, &caps)
    }

    /// Cheapest valid solution by exhaustive search, measured in the original
    /// instance (intended for tiny inputs).
    pub fn best_valid_solution(&self) -> Option<Solution<T>> {
        let m = self.original.facilities.len();
        let free: Vec<usize> = (0..m).filter(|f| !self.is_forced(*f)).collect();
        let budget = self.original.k.checked_sub(self.forced.len())?;
        let mut best: Option<Solution<T>> = None;
        for size in 0..=budget.min(free.len()) {
            for_each_subset(free.len(), size, |idx| {
                let centers: Vec<usize> = idx.iter().map(|&i| free[i]).collect();
                if centers.is_empty() && self.forced.is_empty() {
                    return;
                }
                let Ok(sol) = self.assign(&centers) else { return };
                let Ok(lifted) = self.lift_solution(&sol) else { return };
                if best.as_ref().is_none_or(|b| lifted.cost < b.cost) {
                    best = Some(lifted);
                }
            });
        }
        best
    }
}

/// Solution-independent bound on the distortion:
/// `Σ_{badly cut c} dist(c, L(c))^p / (ε/(p+1))^p`.
pub fn distortion_bound<T: Scalar>(inst: &Instance<T>, reference: &Solution<T>, report: &CutReport, eps: T) -> T {
    let denom = (eps / (inst.p + T::one())).powp(inst.p);
    (0..inst.demand())
        .filter(|&c| report.is_badly_cut(inst.clients[c]))
        .map(|c| inst.dist(inst.clients[c], inst.facilities[reference.assignment[c]]).powp(inst.p) / denom)
        .sum()
}

/// Largest distortion `max(cost(S) − (1+3ε)cost_ID(S), (1−3ε)cost_ID(S) − cost(S))`
/// over the given solutions.
pub fn empirical_distortion<T: Scalar>(tid: &TransformedInstance<T>, sols: &[Solution<T>], eps: T) -> T {
    let three = T::lit(3.0);
    let one = T::one();
    sols.iter()
        .map(|s| {
            let id = tid.cost_in_id(s);
            (s.cost - (one + three * eps) * id).max((one - three * eps) * id - s.cost)
        })
        .fold(T::neg_infinity(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::{optimal_assignment, verify_solution};
    use crate::decomp::{build_split_tree, instance_points, CutParams};

    fn pts(v: &[(f64, f64)]) -> Vec<[f64; 2]> {
        v.iter().map(|&(x, y)| [x, y]).collect()
    }

    /// Five clients; facility 0 at the origin serves three, facility 1 serves two.
    fn five_clients() -> (Instance<f64>, Solution<f64>) {
        let clients = pts(&[(0., 0.), (1., 0.), (0., 1.), (10., 0.), (11., 0.)]);
        let facilities = pts(&[(0., 0.), (10., 0.), (5., 0.)]);
        let inst = Instance::plane(&clients, &facilities, 2, 5, 1.0).unwrap();
        let l = Solution::from_assignment(&inst, vec![0, 1], vec![0, 0, 0, 1, 1]).unwrap();
        (inst, l)
    }

    fn report_for(inst: &Instance<f64>, bad_points: &[usize]) -> CutReport {
        let tree = build_split_tree(&inst.metric, &instance_points(inst), 1);
        let sites: Vec<usize> = bad_points.iter().map(|&q| tree.site(q).unwrap()).collect();
        CutReport::empty(&tree, CutParams::new(0.3, 1.0, 2.0)).with_bad_sites(&sites)
    }

    #[test]
    fn nothing_badly_cut_is_identity() {
        let (inst, l) = five_clients();
        let tid = build_id(&inst, &l, &report_for(&inst, &[])).unwrap();
        assert!(tid.is_identity());
        assert_eq!(tid.reduced, inst);
        let sol = optimal_assignment(&inst, &[0, 1]).unwrap();
        assert_eq!(tid.lift_solution(&sol).unwrap(), sol);
        assert_eq!(distortion_bound(&inst, &l, &report_for(&inst, &[]), 0.5), 0.0);
    }

    #[test]
    fn badly_cut_client_moves_to_reference_center() {
        let (inst, l) = five_clients();
        // Client 4 sits at point 4; its reference center is facility 1.
        let tid = build_id(&inst, &l, &report_for(&inst, &[inst.clients[4]])).unwrap();
        assert!(tid.forced.is_empty());
        assert_eq!(tid.relocations, vec![Relocated { client: 4, from: inst.clients[4], to: inst.facilities[1] }]);
        assert_eq!(tid.reduced.clients[4], inst.facilities[1]);
    }

    #[test]
    fn badly_cut_facility_is_forced_with_residual() {
        let (inst, l) = five_clients();
        let tid = build_id(&inst, &l, &report_for(&inst, &[inst.facilities[0]])).unwrap();
        assert_eq!(tid.forced, vec![0]);
        assert_eq!(tid.caps[0], 2);
        assert_eq!(tid.removed.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(tid.reduced.demand(), 2);
        // Facility 0 is also the location of client 0, which is thus badly cut but already in place.
        assert_eq!(tid.cost_offset, 2.0);

        // The DP may send up to two more units to the forced facility.
        let sol = tid.assign(&[]).unwrap();
        let lifted = tid.lift_solution(&sol).unwrap();
        assert_eq!(lifted.load_of(0), 5);
        assert!(verify_solution(&inst, &lifted).is_ok());
        assert!(tid.is_valid(&lifted));
    }

    #[test]
    fn distortion_example() {
        // One badly cut client at distance 2 from its center, p = 1, ε = 0.5.
        let inst = Instance::plane(&pts(&[(2., 0.)]), &pts(&[(0., 0.)]), 1, 1, 1.0).unwrap();
        let l = optimal_assignment(&inst, &[0]).unwrap();
        let rep = report_for(&inst, &[inst.clients[0]]);
        assert_eq!(distortion_bound(&inst, &l, &rep, 0.5), 8.0);
    }

    #[test]
    fn lifted_cost_accounts_for_relocation() {
        let clients = pts(&[(0., 0.), (1., 0.), (2., 1.), (8., 0.), (9., 1.), (10., 0.)]);
        let facilities = pts(&[(0., 0.), (9., 0.), (4., 0.)]);
        let inst = Instance::plane(&clients, &facilities, 2, 3, 1.0).unwrap();
        let l = Solution::from_assignment(&inst, vec![0, 1], vec![0, 0, 0, 1, 1, 1]).unwrap();
        let bad = [inst.clients[2], inst.clients[4]];
        let tid = build_id(&inst, &l, &report_for(&inst, &bad)).unwrap();
        let sol = tid.assign(&[1, 2]).unwrap();
        let lifted = tid.lift_solution(&sol).unwrap();
        let delta: f64 = tid
            .relocations
            .iter()
            .map(|r| {
                let f = inst.facilities[lifted.assignment[r.client]];
                inst.dist(r.from, f) - inst.dist(r.to, f)
            })
            .sum();
        assert!((lifted.cost - (sol.cost + delta)).abs() < 1e-9);
    }

    #[test]
    fn lift_rejects_missing_forced_center() {
        let (inst, l) = five_clients();
        let tid = build_id(&inst, &l, &report_for(&inst, &[inst.facilities[0]])).unwrap();
        let sol = Solution { centers: vec![1], assignment: vec![1, 1], cost: 1.0 };
        assert_eq!(tid.lift_solution(&sol), Err(TransformError::ForcedClosed(0)));
    }

    #[test]
    fn bound_dominates_exhaustive_distortion() {
        let clients = pts(&[(0., 0.), (1., 0.), (3., 1.), (6., 0.), (7., 2.), (9., 0.)]);
        let facilities = pts(&[(0., 0.), (7., 0.), (3., 0.)]);
        let inst = Instance::plane(&clients, &facilities, 2, 3, 1.0).unwrap();
        let l = optimal_assignment(&inst, &[0, 1]).unwrap();
        let eps = 0.3;
        for bad in [vec![2usize], vec![2, 4], vec![1, 3, 5]] {
            let bad_pts: Vec<usize> = bad.iter().map(|&c| inst.clients[c]).collect();
            let rep = report_for(&inst, &bad_pts);
            let tid = build_id(&inst, &l, &rep).unwrap();
            // Every capacity-respecting assignment to every center set.
            let mut sols = Vec::new();
            for size in 1..=2 {
                for_each_subset(3, size, |set| {
                    let mut code = vec![0usize; 6];
                    loop {
                        let a: Vec<usize> = code.iter().map(|&i| set[i]).collect();
                        if set.iter().all(|f| a.iter().filter(|&x| x == f).count() <= 3) {
                            sols.push(Solution::from_assignment(&inst, set.to_vec(), a).unwrap());
                        }
                        let mut i = 0;
                        while i < 6 && code[i] + 1 == set.len() {
                            code[i] = 0;
                            i += 1;
                        }
                        if i == 6 {
                            break;
                        }
                        code[i] += 1;
                    }
                });
            }
            let emp = empirical_distortion(&tid, &sols, eps);
            assert!(emp <= distortion_bound(&inst, &l, &rep, eps) + 1e-9);
        }
    }
}
