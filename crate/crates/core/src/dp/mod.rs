//! Portal dynamic program over a decomposition tree.
//!
//! A cell of box `B` records how many centers are open inside `B` and the
//! signed net flow of client units through each portal of `B` (positive:
//! demand leaving the box). Children are folded one at a time, their portal
//! flows rerouted to the nearest parent portal at `hop^p` per unit.
//!
//! The compressed plane variant keeps out-counts and in-counts per portal
//! separately, since the profile family constrains each of them. A profile
//! outside the family is moved to a nearby admitted one and charged the
//! transport cost of the move; the report compares that charge with the
//! `α·ρ·2^i` crossing budget.

mod engine;
mod portals;
mod profiles;


use serde::Serialize;
use thiserror::Error;

use crate::assign::AssignError;
use crate::transform::TransformError;

pub use engine::{ptas_dp, qptas_dp, DpOutcome, Profile};
pub use portals::{boundary_points, build_portals, portal_dist, portals_for_box, BoxPortals, PortalPoint, PortalSet};
pub use profiles::{ptas_profiles, CompressedProfiles};

/// Default lower clamp on ρ.
pub const RHO_FLOOR: f64 = 0.05;
/// Default budget constant α.
pub const ALPHA: f64 = 32.0;

/// `ε / (16·d·log₂n / (ε/(p+1))^{5p})`, clamped below by `floor`.
/// The flag reports whether the clamp was applied.
pub fn choose_rho(n: usize, d: f64, eps: f64, p: f64, floor: f64) -> (f64, bool) {
    let n = n.max(2) as f64;
    let rho = eps / (16.0 * d * n.log2() / (eps / (p + 1.0)).powf(5.0 * p));
    if rho < floor {
        (floor, true)
    } else {
        (rho, false)
    }
}

/// Per-client rounding allowance at a box of level `i`.
pub fn budget(level: usize, rho: f64, alpha: f64) -> f64 {
    alpha * rho * 2f64.powi(level as i32)
}

/// Per-unit-distance detour factor allowed by the portal analysis.
pub fn detour_factor(n: usize, d: f64, eps: f64, p: f64, rho: f64) -> f64 {
    16.0 * rho * d * (n.max(2) as f64).log2() / (eps / (p + 1.0)).powf(5.0 * p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpConfig {
    pub rho: f64,
    /// Whether `rho` came from the floor rather than the formula.
    pub rho_floored: bool,
    pub eps: f64,
    /// Doubling dimension used in the detour certificate.
    pub d: f64,
    pub max_portals: Option<usize>,
    pub max_counts: Option<usize>,
    pub max_cells: Option<usize>,
    pub alpha: f64,
}

impl DpConfig {
    pub fn new(rho: f64, eps: f64, d: f64) -> Self {
        DpConfig {
            rho,
            rho_floored: false,
            eps,
            d,
            max_portals: Some(8),
            max_counts: Some(12),
            max_cells: Some(1_000_000),
            alpha: ALPHA,
        }
    }

    /// No caps on counts or cells; portals keep their own cap.
    pub fn uncapped(mut self) -> Self {
        self.max_counts = None;
        self.max_cells = None;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CapsHit {
    pub portals: bool,
    pub counts: bool,
    pub cells: bool,
}

impl CapsHit {
    pub fn any(&self) -> bool {
        self.portals || self.counts || self.cells
    }
}

/// Charged portal detour of the output assignment.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DetourCertificate {
    pub clients: usize,
    pub total_detour: f64,
    pub total_bound: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpReport {
    pub rho: f64,
    pub heuristic_rho: bool,
    pub compressed: bool,
    pub boxes: usize,
    pub portals_max: usize,
    pub portals_mean: f64,
    pub cells_enumerated: usize,
    pub cells_largest_table: usize,
    pub profiles_rejected: usize,
    pub caps_hit: CapsHit,
    /// Tree-routing value of the best root cell, in instance units.
    pub dp_value: f64,
    /// `Σ α·ρ·2^i` over the portal crossings of the chosen cells, in instance units.
    pub budget_total: f64,
    /// Cost charged for moving profiles onto the compressed family, in instance units.
    pub rounding_total: f64,
    pub detour: DetourCertificate,
    pub final_cost: f64,
}

impl DpReport {
    /// Whether any approximation knob left the exact regime.
    pub fn heuristic(&self) -> bool {
        self.heuristic_rho || self.caps_hit.any()
    }
}

#[derive(Debug, Error)]
pub enum DpError {
    #[error("no root cell serves every client within k centers")]
    Infeasible,
    #[error("point {0} is not a site of the decomposition")]
    MissingSite(usize),
    #[error("compressed profiles need a quadtree over the plane")]
    NotPlane,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Assign(#[from] AssignError),
}
