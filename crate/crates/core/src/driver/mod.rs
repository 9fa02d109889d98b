//! Baseline solution, the improvement loop and run reports.

pub mod bench;
mod cli;

#[cfg(test)]
mod tests;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assign::{optimal_assignment, AssignError, BruteForceError};
use crate::decomp::{
    build_quadtree, build_split_tree, classify_badly_cut, doubling_dim, instance_points, CutParams, DIM_CAP,
};
use crate::dp::{choose_rho, ptas_dp, qptas_dp, DpConfig, DpError, DpReport, ALPHA, RHO_FLOOR};
use crate::instance::{normalize_aspect_ratio, CostError, Instance, InstanceError, Solution};
use crate::scalar::Scalar;
use crate::structural::StructError;
use crate::transform::{build_id, TransformError, TransformedInstance};

pub use cli::run_cli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Baseline,
    Qptas,
    Ptas,
    VerifyStructure,
    Bench,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub eps: f64,
    pub seed: u64,
    /// Repeats per round; `⌈log₂ n⌉` when unset.
    pub boost: Option<usize>,
    /// Bootstrap rounds; `max(1, ⌈log₂ log₂ n⌉)` when unset.
    pub rounds: Option<usize>,
    pub max_portals: Option<usize>,
    pub max_counts: Option<usize>,
    pub max_cells: Option<usize>,
    pub alpha: f64,
    /// Swap probability parameter; defaults to ε.
    pub pi: Option<f64>,
    pub rho_floor: f64,
}

impl RunConfig {
    pub fn new(mode: Mode, eps: f64, seed: u64) -> Self {
        RunConfig {
            mode,
            eps,
            seed,
            boost: None,
            rounds: None,
            max_portals: Some(8),
            max_counts: Some(12),
            max_cells: Some(1_000_000),
            alpha: ALPHA,
            pi: None,
            rho_floor: RHO_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(DriverError::Config(format!("eps must lie in (0, 0.5], got {}", self.eps)));
        }
        if self.rounds == Some(0) || self.boost == Some(0) {
            return Err(DriverError::Config("rounds and boost repeats must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(DriverError::Config("alpha must be positive".into()));
        }
        if self.pi.is_some_and(|pi| !(0.0..=1.0).contains(&pi)) {
            return Err(DriverError::Config("pi must lie in [0, 1]".into()));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor < 1.0) {
            return Err(DriverError::Config("rho floor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn pi(&self) -> f64 {
        self.pi.unwrap_or(self.eps)
    }

    fn dp_config(&self, rho: f64, floored: bool, d: f64) -> DpConfig {
        DpConfig {
            rho,
            rho_floored: floored,
            eps: self.eps,
            d,
            max_portals: self.max_portals,
            max_counts: self.max_counts,
            max_cells: self.max_cells,
            alpha: self.alpha,
        }
    }

    pub fn repeats(&self, n: usize) -> usize {
        self.boost.unwrap_or_else(|| (n.max(2) as f64).log2().ceil() as usize).max(1)
    }

    pub fn round_count(&self, n: usize) -> usize {
        self.rounds.unwrap_or_else(|| {
            let l = (n.max(2) as f64).log2();
            if l <= 1.0 {
                1
            } else {
                (l.log2().ceil() as usize).max(1)
            }
        })
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{0}")]
    Config(String),
    #[error("instance is infeasible: {0}")]
    Infeasible(String),
    #[error("compressed profiles need a plane instance")]
    NotPlane,
    #[error(transparent)]
    Instance(InstanceError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Assign(AssignError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    BruteForce(#[from] BruteForceError),
    #[error(transparent)]
    Structure(#[from] StructError),
    #[error("{0}")]
    Io(String),
}

impl From<InstanceError> for DriverError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::Infeasible { .. } => DriverError::Infeasible(e.to_string()),
            e => DriverError::Instance(e),
        }
    }
}

impl From<AssignError> for DriverError {
    fn from(e: AssignError) -> Self {
        match e {
            AssignError::Infeasible { .. } => DriverError::Infeasible(e.to_string()),
            e => DriverError::Assign(e),
        }
    }
}

impl DriverError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, DriverError::Infeasible(_) | DriverError::Dp(DpError::Infeasible))
    }
}

/// Farthest-first choice of `k` facilities, then the optimal assignment.
fn spread_solution<T: Scalar>(inst: &Instance<T>) -> Result<Solution<T>, DriverError> {
    let m = inst.facilities.len();
    let k = inst.k.min(m);
    let mut chosen = vec![0usize];
    let mut near: Vec<T> = (0..m).map(|f| inst.facility_dist(0, f)).collect();
    while chosen.len() < k {
        let next = (0..m)
            .filter(|f| !chosen.contains(f))
            .max_by(|&a, &b| near[a].partial_cmp(&near[b]).expect("finite").then(b.cmp(&a)))
            .expect("facilities remain");
        chosen.push(next);
        for f in 0..m {
            near[f] = near[f].min(inst.facility_dist(next, f));
        }
    }
    Ok(optimal_assignment(inst, &chosen)?)
}

/// Solves the instance exactly on the tree metric of a one-portal split tree
/// and reassigns clients optimally in the true metric.
pub fn baseline_solution<T: Scalar>(
    inst: &Instance<T>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Solution<T>, Option<DpReport>), DriverError> {
    if inst.k.min(inst.facilities.len()) * inst.eta < inst.demand() {
        return Err(DriverError::Infeasible(format!(
            "{} facilities of capacity {} cannot serve {} units",
            inst.k.min(inst.facilities.len()),
            inst.eta,
            inst.demand()
        )));
    }
    let tree = build_split_tree(&inst.metric, &instance_points(inst), seed);
    let tid = TransformedInstance::identity(inst);
    let mut dp = cfg.dp_config(1.0, false, 2.0);
    dp.max_portals = Some(1);
    match qptas_dp(&tid, &tree, &dp) {
        Ok(out) => Ok((out.solution, Some(out.report))),
        Err(DpError::Infeasible) => Ok((spread_solution(inst)?, None)),
        Err(e) => Err(e.into()),
    }
}

/// What one improvement attempt did.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub merged_locations: usize,
    pub badly_cut_sites: usize,
    pub forced: usize,
    pub relocated: usize,
    pub candidate_cost: Option<f64>,
    pub kept_incumbent: bool,
    /// Why no candidate was produced, if none was.
    pub failure: Option<String>,
    pub dp: Option<DpReport>,
}

/// One randomized improvement step; never returns anything worse than `incumbent`.
pub fn improve_once<T: Scalar>(
    inst: &Instance<T>,
    incumbent: &Solution<T>,
    cfg: &RunConfig,
    seed: u64,
    mode: Mode,
) -> Result<(Solution<T>, Attempt), DriverError> {
    let eps = T::lit(cfg.eps);
    let (norm, reloc) = normalize_aspect_ratio(inst, incumbent.cost, eps);
    let points = instance_points(&norm);
    let d = doubling_dim(&norm.metric, &points, DIM_CAP);
    let tree = if mode == Mode::Ptas {
        if !norm.metric.is_plane() {
            return Err(DriverError::NotPlane);
        }
        build_quadtree(&norm.metric, &points, seed)
    } else {
        build_split_tree(&norm.metric, &points, seed)
    };
    let p = norm.p.as_f64();
    let report = classify_badly_cut(&tree, &points, CutParams::new(cfg.eps, p, d));
    let reference = Solution::from_assignment(&norm, incumbent.centers.clone(), incumbent.assignment.clone())?;
    let tid = build_id(&norm, &reference, &report)?;
    let (rho, floored) = choose_rho(norm.demand(), d, cfg.eps, p, cfg.rho_floor);
    let dp_cfg = cfg.dp_config(rho, floored, d);
    let run = if mode == Mode::Ptas { ptas_dp(&tid, &tree, &dp_cfg) } else { qptas_dp(&tid, &tree, &dp_cfg) };
    let mut attempt = Attempt {
        seed,
        merged_locations: reloc.from.iter().zip(&reloc.to).filter(|(a, b)| a != b).count(),
        badly_cut_sites: report.badly_cut_sites(),
        forced: tid.forced.len(),
        relocated: tid.relocations.len(),
        candidate_cost: None,
        kept_incumbent: true,
        failure: None,
        dp: None,
    };
    let out = match run {
        Ok(out) => out,
        Err(DpError::Infeasible) => {
            attempt.failure = Some("no feasible root cell within the enumeration caps".into());
            return Ok((incumbent.clone(), attempt));
        }
        Err(e) => return Err(e.into()),
    };
    let candidate = reloc.lift(inst, &out.solution)?;
    attempt.candidate_cost = Some(candidate.cost.as_f64());
    attempt.dp = Some(out.report);
    if candidate.cost < incumbent.cost {
        attempt.kept_incumbent = false;
        Ok((candidate, attempt))
    } else {
        Ok((incumbent.clone(), attempt))
    }
}

/// Best of `repeats` independent improvement attempts with seeds `seed..seed+repeats`.
pub fn boost<T: Scalar>(
    inst: &Instance<T>,
    incumbent: &Solution<T>,
    cfg: &RunConfig,
    repeats: usize,
    seed: u64,
    mode: Mode,
) -> Result<(Solution<T>, Vec<Attempt>), DriverError> {
    let runs: Vec<(Solution<T>, Attempt)> = (0..repeats.max(1) as u64)
        .into_par_iter()
        .map(|r| improve_once(inst, incumbent, cfg, seed.wrapping_add(r), mode))
        .collect::<Result<_, _>>()?;
    let mut best = incumbent.clone();
    for (sol, _) in &runs {
        if sol.cost < best.cost {
            best = sol.clone();
        }
    }
    Ok((best, runs.into_iter().map(|(_, a)| a).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Round {
    pub round: usize,
    pub seed: u64,
    pub incumbent_cost: f64,
    pub best_cost: f64,
    pub attempts: Vec<Attempt>,
}

/// Everything a solve run reports besides the solution itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub n: usize,
    pub facilities: usize,
    pub k: usize,
    pub eta: usize,
    pub p: f64,
    pub baseline_cost: Option<f64>,
    pub baseline_dp: Option<DpReport>,
    pub rounds: Vec<Round>,
    pub final_cost: f64,
    /// Whether any DP run left the exact regime (ρ floor or a cap).
    pub heuristic: bool,
    pub verified: bool,
}

impl RunReport {
    fn new<T: Scalar>(inst: &Instance<T>, cfg: &RunConfig) -> Self {
        RunReport {
            config: cfg.clone(),
            n: inst.demand(),
            facilities: inst.facilities.len(),
            k: inst.k,
            eta: inst.eta,
            p: inst.p.as_f64(),
            baseline_cost: None,
            baseline_dp: None,
            rounds: Vec::new(),
            final_cost: 0.0,
            heuristic: false,
            verified: false,
        }
    }

    /// Bootstrap costs per round, starting with the baseline.
    pub fn cost_sequence(&self) -> Vec<f64> {
        self.baseline_cost.into_iter().chain(self.rounds.iter().map(|r| r.best_cost)).collect()
    }

    fn finish<T: Scalar>(&mut self, inst: &Instance<T>, sol: &Solution<T>) {
        self.final_cost = sol.cost.as_f64();
        self.verified = crate::assign::verify_solution(inst, sol).is_ok();
        let dp_heuristic = |d: &DpReport| d.heuristic();
        self.heuristic = self.rounds.iter().flat_map(|r| &r.attempts).filter_map(|a| a.dp.as_ref()).any(dp_heuristic);
    }
}

fn round_seed(seed: u64, round: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Baseline followed by boosted improvement rounds until the round budget
/// runs out or a round stops improving.
pub fn bootstrap<T: Scalar>(
    inst: &Instance<T>,
    cfg: &RunConfig,
    seed: u64,
    mode: Mode,
) -> Result<(Solution<T>, RunReport), DriverError> {
    let mut report = RunReport::new(inst, cfg);
    let (mut current, base_dp) = baseline_solution(inst, cfg, seed)?;
    report.baseline_cost = Some(current.cost.as_f64());
    report.baseline_dp = base_dp;
    let n = inst.demand();
    let repeats = cfg.repeats(n);
    for round in 0..cfg.round_count(n) {
        let rs = round_seed(seed, round);
        let (next, attempts) = boost(inst, &current, cfg, repeats, rs, mode)?;
        let gain = (current.cost - next.cost).as_f64();
        report.rounds.push(Round {
            round,
            seed: rs,
            incumbent_cost: current.cost.as_f64(),
            best_cost: next.cost.as_f64(),
            attempts,
        });
        current = next;
        if gain < 1e-9 {
            break;
        }
    }
    report.finish(inst, &current);
    Ok((current, report))
}

/// Baseline only, with the same report layout.
pub fn baseline_run<T: Scalar>(inst: &Instance<T>, cfg: &RunConfig) -> Result<(Solution<T>, RunReport), DriverError> {
    let mut report = RunReport::new(inst, cfg);
    let (sol, dp) = baseline_solution(inst, cfg, cfg.seed)?;
    report.baseline_cost = Some(sol.cost.as_f64());
    report.baseline_dp = dp;
    report.finish(inst, &sol);
    Ok((sol, report))
}
