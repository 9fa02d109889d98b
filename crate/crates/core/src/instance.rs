//! Instances, solutions, metrics and cost accounting.
//!
//! Clients are stored as one entry per unit of demand, so several entries may
//! share a point (relocation stacks demand at a location). Facilities are
//! candidate center locations; solutions refer to them by facility index.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::scalar::{Scalar, TOL};

/// Tolerance used when checking the triangle inequality of explicit matrices.
pub const TRIANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("infeasible: kη < n ({k}·{eta} < {demand})")]
    Infeasible { k: usize, eta: usize, demand: usize },
    #[error("metric not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("metric has nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("metric has a negative or non-finite entry at ({0}, {1})")]
    BadEntry(usize, usize),
    #[error("metric violates the triangle inequality: d({0},{1}) > d({0},{2}) + d({2},{1})")]
    Triangle(usize, usize, usize),
    #[error("distance matrix is not square")]
    NotSquare,
    #[error("point index {0} out of range")]
    PointOutOfRange(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("assignment has {got} entries but the instance has {expected} client units")]
    Length { expected: usize, got: usize },
    #[error("client {client} is assigned to facility {facility}, which is not an open center")]
    NotACenter { client: usize, facility: usize },
    #[error("center {0} is not a candidate facility")]
    UnknownFacility(usize),
}

/// Distances between the points of an instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric<T> {
    /// Euclidean plane.
    Plane(Vec<[T; 2]>),
    /// Explicit symmetric distance matrix.
    Matrix(Vec<Vec<T>>),
}

impl<T: Scalar> Metric<T> {
    pub fn len(&self) -> usize {
        match self {
            Metric::Plane(pts) => pts.len(),
            Metric::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_plane(&self) -> bool {
        matches!(self, Metric::Plane(_))
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> T {
        match self {
            Metric::Plane(pts) => euclid(pts[a], pts[b]),
            Metric::Matrix(m) => m[a][b],
        }
    }

    pub fn coords(&self, a: usize) -> Option<[T; 2]> {
        match self {
            Metric::Plane(pts) => Some(pts[a]),
            Metric::Matrix(_) => None,
        }
    }

    /// Returns the `(lhs, rhs)` pair of the relaxed triangle inequality for points `a, b, c`.
    pub fn relaxed_triangle(&self, a: usize, b: usize, c: usize, p: T, eps: T) -> (T, T) {
        relaxed_triangle_bound(self.dist(a, b), self.dist(a, c), self.dist(c, b), p, eps)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let Metric::Matrix(m) = self else {
            if let Metric::Plane(pts) = self {
                for (i, q) in pts.iter().enumerate() {
                    if !q[0].is_finite() || !q[1].is_finite() {
                        return Err(InstanceError::BadEntry(i, i));
                    }
                }
            }
            return Ok(());
        };
        let n = m.len();
        if m.iter().any(|row| row.len() != n) {
            return Err(InstanceError::NotSquare);
        }
        for i in 0..n {
            if m[i][i] != T::zero() {
                return Err(InstanceError::NonzeroDiagonal(i));
            }
            for j in 0..n {
                if !m[i][j].is_finite() || m[i][j] < T::zero() {
                    return Err(InstanceError::BadEntry(i, j));
                }
                if !m[i][j].approx_eq(m[j][i], TOL) {
                    return Err(InstanceError::NotSymmetric(i, j));
                }
            }
        }
        let tol = T::lit(TRIANGLE_TOL);
        for i in 0..n {
            for j in 0..n {
                for via in 0..n {
                    let bound = m[i][via] + m[via][j];
                    if m[i][j] > bound + tol * T::one().max(bound) {
                        return Err(InstanceError::Triangle(i, j, via));
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub fn euclid<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// `(d_ab^p, (1+ε)^p d_ac^p + (1+1/ε)^p d_cb^p)`: the relaxed triangle inequality as an oracle pair.
pub fn relaxed_triangle_bound<T: Scalar>(d_ab: T, d_ac: T, d_cb: T, p: T, eps: T) -> (T, T) {
    let one = T::one();
    let lhs = d_ab.powp(p);
    let rhs = (one + eps).powp(p) * d_ac.powp(p) + (one + one / eps).powp(p) * d_cb.powp(p);
    (lhs, rhs)
}

/// A capacitated k-clustering instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub metric: Metric<T>,
    /// Point of each client unit.
    pub clients: Vec<usize>,
    /// Point of each candidate facility.
    pub facilities: Vec<usize>,
    pub k: usize,
    /// Uniform capacity η.
    pub eta: usize,
    /// Cost exponent.
    pub p: T,
}

impl<T: Scalar> Instance<T> {
    /// Builds and validates an instance.
    pub fn new(
        metric: Metric<T>,
        clients: Vec<usize>,
        facilities: Vec<usize>,
        k: usize,
        eta: usize,
        p: T,
    ) -> Result<Self, InstanceError> {
        let inst = Instance { metric, clients, facilities, k, eta, p };
        inst.validate()?;
        Ok(inst)
    }

    /// Plane instance whose clients are the first points and facilities the rest.
    pub fn plane(
        clients: &[[T; 2]],
        facilities: &[[T; 2]],
        k: usize,
        eta: usize,
        p: T,
    ) -> Result<Self, InstanceError> {
        let mut pts = clients.to_vec();
        pts.extend_from_slice(facilities);
        let n = clients.len();
        Self::new(
            Metric::Plane(pts),
            (0..n).collect(),
            (n..n + facilities.len()).collect(),
            k,
            eta,
            p,
        )
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.k == 0 {
            return Err(InstanceError::Parameter("k must be at least 1".into()));
        }
        if self.eta == 0 {
            return Err(InstanceError::Parameter("eta must be at least 1".into()));
        }
        if !(self.p >= T::one()) || !self.p.is_finite() {
            return Err(InstanceError::Parameter("p must be a finite real ≥ 1".into()));
        }
        if self.facilities.is_empty() {
            return Err(InstanceError::Parameter("at least one facility is required".into()));
        }
        let npts = self.metric.len();
        for &q in self.clients.iter().chain(&self.facilities) {
            if q >= npts {
                return Err(InstanceError::PointOutOfRange(q));
            }
        }
        self.metric.validate()?;
        let demand = self.demand();
        if self.k.saturating_mul(self.eta) < demand {
            return Err(InstanceError::Infeasible { k: self.k, eta: self.eta, demand });
        }
        Ok(())
    }

    /// Total client demand n.
    pub fn demand(&self) -> usize {
        self.clients.len()
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> T {
        self.metric.dist(a, b)
    }

    /// `dist(client unit, facility)^p`.
    #[inline]
    pub fn cost(&self, client: usize, facility: usize) -> T {
        self.metric
            .dist(self.clients[client], self.facilities[facility])
            .powp(self.p)
    }

    /// Distance between two candidate facilities.
    #[inline]
    pub fn facility_dist(&self, a: usize, b: usize) -> T {
        self.metric.dist(self.facilities[a], self.facilities[b])
    }

    /// Distance from a client unit to a facility.
    #[inline]
    pub fn client_dist(&self, client: usize, facility: usize) -> T {
        self.metric.dist(self.clients[client], self.facilities[facility])
    }

    /// Client units grouped by point, in order of first appearance.
    pub fn client_groups(&self) -> Vec<(usize, Vec<usize>)> {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, &q) in self.clients.iter().enumerate() {
            groups
                .entry(q)
                .or_insert_with(|| {
                    order.push(q);
                    Vec::new()
                })
                .push(c);
        }
        order
            .into_iter()
            .map(|q| {
                let units = groups.remove(&q).unwrap_or_default();
                (q, units)
            })
            .collect()
    }

    pub fn max_pairwise_dist(&self) -> T {
        let n = self.metric.len();
        let mut best = T::zero();
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(self.metric.dist(a, b));
            }
        }
        best
    }
}

/// Centers, a client → center assignment and its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    /// Facility indices of the open centers, ascending.
    pub centers: Vec<usize>,
    /// Facility index serving each client unit.
    pub assignment: Vec<usize>,
    pub cost: T,
}

impl<T: Scalar> Solution<T> {
    /// Builds a solution and computes its cost.
    pub fn from_assignment(
        inst: &Instance<T>,
        mut centers: Vec<usize>,
        assignment: Vec<usize>,
    ) -> Result<Self, CostError> {
        centers.sort_unstable();
        centers.dedup();
        let mut sol = Solution { centers, assignment, cost: T::zero() };
        sol.cost = solution_cost(inst, &sol)?;
        Ok(sol)
    }

    /// Load of every center, in center order.
    pub fn loads(&self) -> Vec<(usize, usize)> {
        let mut counts: BTreeMap<usize, usize> = self.centers.iter().map(|&c| (c, 0)).collect();
        for &f in &self.assignment {
            *counts.entry(f).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }

    pub fn load_of(&self, facility: usize) -> usize {
        self.assignment.iter().filter(|&&f| f == facility).count()
    }

    pub fn is_center(&self, facility: usize) -> bool {
        self.centers.binary_search(&facility).is_ok()
    }
}

/// `Σ_c dist(c, μ(c))^p`. Capacities are not checked here.
pub fn solution_cost<T: Scalar>(inst: &Instance<T>, sol: &Solution<T>) -> Result<T, CostError> {
    if sol.assignment.len() != inst.demand() {
        return Err(CostError::Length { expected: inst.demand(), got: sol.assignment.len() });
    }
    for &f in &sol.centers {
        if f >= inst.facilities.len() {
            return Err(CostError::UnknownFacility(f));
        }
    }
    let mut total = T::zero();
    for (c, &f) in sol.assignment.iter().enumerate() {
        if !sol.centers.contains(&f) {
            return Err(CostError::NotACenter { client: c, facility: f });
        }
        total = total + inst.cost(c, f);
    }
    Ok(total)
}

/// Output of [`normalize_aspect_ratio`]: where every client unit went.
#[derive(Clone, Debug, PartialEq)]
pub struct Relocation<T> {
    /// Original point of each client unit.
    pub from: Vec<usize>,
    /// Point of each client unit after merging.
    pub to: Vec<usize>,
    /// Merge threshold `eps·reference_cost/n³`.
    pub threshold: T,
}

impl<T: Scalar> Relocation<T> {
    pub fn is_identity(&self) -> bool {
        self.from == self.to
    }

    /// Distance each client unit moved.
    pub fn displacements(&self, metric: &Metric<T>) -> Vec<T> {
        self.from.iter().zip(&self.to).map(|(&a, &b)| metric.dist(a, b)).collect()
    }

    /// Re-evaluates a solution of the merged instance on the original one.
    pub fn lift(&self, original: &Instance<T>, sol: &Solution<T>) -> Result<Solution<T>, CostError> {
        Solution::from_assignment(original, sol.centers.clone(), sol.assignment.clone())
    }
}

/// Merges client locations closer than `eps·reference_cost/n³`.
///
/// Locations are scanned in order of first appearance; each one is merged
/// into the first kept location within the threshold, otherwise kept. Kept
/// locations are pairwise at least the threshold apart and every unit moves
/// by less than the threshold.
pub fn normalize_aspect_ratio<T: Scalar>(
    inst: &Instance<T>,
    reference_cost: T,
    eps: T,
) -> (Instance<T>, Relocation<T>) {
    let n = inst.demand().max(1);
    let n3 = T::of_usize(n).powi(3);
    let threshold = eps * reference_cost / n3;
    let mut kept: Vec<usize> = Vec::new();
    let mut target: BTreeMap<usize, usize> = BTreeMap::new();
    for (q, _) in inst.client_groups() {
        let home = kept.iter().copied().find(|&y| inst.dist(q, y) < threshold);
        match home {
            Some(y) => {
                target.insert(q, y);
            }
            None => {
                kept.push(q);
                target.insert(q, q);
            }
        }
    }
    let to: Vec<usize> = inst.clients.iter().map(|q| target[q]).collect();
    let mut out = inst.clone();
    out.clients = to.clone();
    let reloc = Relocation { from: inst.clients.clone(), to, threshold };
    (out, reloc)
}

// ---------------------------------------------------------------------------
// JSON files

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    p: f64,
    k: usize,
    eta: usize,
    clients: Value,
    facilities: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
}

fn parse_coords(v: &Value, what: &str) -> Result<Vec<[f64; 2]>, InstanceError> {
    let arr = v
        .as_array()
        .ok_or_else(|| InstanceError::Format(format!("{what} must be an array")))?;
    arr.iter()
        .map(|e| {
            let pair = e.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                InstanceError::Format(format!("{what}: expected [x, y] pairs"))
            })?;
            let x = pair[0].as_f64();
            let y = pair[1].as_f64();
            match (x, y) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(InstanceError::Format(format!("{what}: non-numeric coordinate"))),
            }
        })
        .collect()
}

fn parse_indices(v: &Value, what: &str) -> Result<Vec<usize>, InstanceError> {
    let arr = v
        .as_array()
        .ok_or_else(|| InstanceError::Format(format!("{what} must be an array")))?;
    arr.iter()
        .map(|e| {
            e.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| InstanceError::Format(format!("{what}: expected point indices")))
        })
        .collect()
}

impl<T: Scalar> Instance<T> {
    /// Parses the JSON instance format.
    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let p = T::lit(file.p);
        match file.matrix {
            Some(m) => {
                let matrix = m
                    .into_iter()
                    .map(|row| row.into_iter().map(T::lit).collect())
                    .collect();
                let clients = parse_indices(&file.clients, "clients")?;
                let facilities = parse_indices(&file.facilities, "facilities")?;
                Instance::new(Metric::Matrix(matrix), clients, facilities, file.k, file.eta, p)
            }
            None => {
                let conv = |v: Vec<[f64; 2]>| -> Vec<[T; 2]> {
                    v.into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect()
                };
                let clients = conv(parse_coords(&file.clients, "clients")?);
                let facilities = conv(parse_coords(&file.facilities, "facilities")?);
                Instance::plane(&clients, &facilities, file.k, file.eta, p)
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = match &self.metric {
            Metric::Plane(pts) => {
                let coords = |ids: &[usize]| -> Value {
                    Value::Array(
                        ids.iter()
                            .map(|&q| serde_json::json!([pts[q][0].as_f64(), pts[q][1].as_f64()]))
                            .collect(),
                    )
                };
                InstanceFile {
                    p: self.p.as_f64(),
                    k: self.k,
                    eta: self.eta,
                    clients: coords(&self.clients),
                    facilities: coords(&self.facilities),
                    matrix: None,
                }
            }
            Metric::Matrix(m) => InstanceFile {
                p: self.p.as_f64(),
                k: self.k,
                eta: self.eta,
                clients: serde_json::json!(self.clients),
                facilities: serde_json::json!(self.facilities),
                matrix: Some(
                    m.iter()
                        .map(|row| row.iter().map(|x| x.as_f64()).collect())
                        .collect(),
                ),
            },
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Loads and validates an instance file.
pub fn load_instance<T: Scalar>(path: impl AsRef<Path>) -> Result<Instance<T>, InstanceError> {
    Instance::load(path)
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    centers: &'a [usize],
    assignment: &'a [usize],
    cost: f64,
}

impl<T: Scalar> Solution<T> {
    pub fn to_json_string(&self) -> String {
        let file = SolutionFile {
            centers: &self.centers,
            assignment: &self.assignment,
            cost: self.cost.as_f64(),
        };
        serde_json::to_string_pretty(&file).expect("solution serializes")
    }
}
