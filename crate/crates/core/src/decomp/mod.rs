//! Randomized hierarchical decompositions, nets and cut queries.

mod cut;
mod net;
mod quad;
mod split;
mod tree;

pub use cut::{classify_badly_cut, ring_range, CutParams, CutReport, RingCut};
pub use net::{estimate_doubling_dim, greedy_net};
pub use quad::{build_quadtree, QUAD_MIN_DIST};
pub use split::build_split_tree;
pub use tree::{DecompositionTree, Square, TreeBox, TreeKind};

use crate::instance::{Instance, Metric};
use crate::scalar::Scalar;

/// Default cap on the estimated doubling dimension.
pub const DIM_CAP: f64 = 8.0;

/// Doubling dimension used for cut thresholds: 2 in the plane, estimated otherwise.
pub fn doubling_dim<T: Scalar>(metric: &Metric<T>, points: &[usize], cap: f64) -> f64 {
    if metric.is_plane() {
        2.0
    } else {
        estimate_doubling_dim(points, cap, |a, b| metric.dist(a, b))
    }
}

/// All client and facility points of an instance, ascending and deduplicated.
pub fn instance_points<T: Scalar>(inst: &Instance<T>) -> Vec<usize> {
    let mut pts: Vec<usize> = inst.clients.iter().chain(&inst.facilities).copied().collect();
    pts.sort_unstable();
    pts.dedup();
    pts
}
