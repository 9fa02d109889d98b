//! Randomly shifted quadtree dissection of the plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{dedup_sites, min_and_max_dist, site_metric, DecompositionTree, Square, TreeKind};
use crate::instance::Metric;
use crate::scalar::Scalar;

/// Closest-pair distance after rescaling; above 2√2 so side-2 cells hold one site.
pub const QUAD_MIN_DIST: f64 = 3.0;

type Partition<T> = Vec<(Vec<usize>, Option<usize>, Option<Square<T>>)>;

/// Builds a quadtree over the distinct locations of `points` (plane metrics only).
///
/// Level-`i` cells are squares of side `2^{i+1}` in scaled coordinates.
pub fn build_quadtree<T: Scalar>(metric: &Metric<T>, points: &[usize], seed: u64) -> DecompositionTree<T> {
    assert!(metric.is_plane(), "quadtree needs plane coordinates");
    let (reps, site_of) = dedup_sites(metric, points);
    let n = reps.len();
    let scale = if n <= 1 {
        T::one()
    } else {
        let (lo, _) = min_and_max_dist(metric, &reps);
        T::lit(QUAD_MIN_DIST) / lo
    };
    let sm = site_metric(metric, &reps, scale);
    let Metric::Plane(pts) = &sm else { unreachable!() };
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for q in pts {
        for a in 0..2 {
            min[a] = min[a].min(q[a].as_f64());
            max[a] = max[a].max(q[a].as_f64());
        }
    }
    if n == 0 {
        min = [0.0; 2];
        max = [0.0; 2];
    }
    let extent = (max[0] - min[0]).max(max[1] - min[1]).max(1.0);
    let levels = extent.log2().ceil().max(0.0) as usize;
    let half_root = 2f64.powi(levels as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = [rng.random_range(0.0..half_root), rng.random_range(0.0..half_root)];
    let origin = [min[0] - shift[0], min[1] - shift[1]];

    let root = Square { origin: [T::lit(origin[0]), T::lit(origin[1])], side: T::lit(2.0 * half_root) };
    let mut top_down: Vec<Partition<T>> = vec![vec![((0..n).collect(), None, Some(root))]];
    for level in (0..levels).rev() {
        let side = 2f64.powi(level as i32 + 1);
        let parents = top_down.last().expect("non-empty");
        let mut next: Partition<T> = Vec::new();
        for (pi, (members, _, sq)) in parents.iter().enumerate() {
            let sq = sq.expect("quadtree boxes are squares");
            let (ox, oy) = (sq.origin[0].as_f64(), sq.origin[1].as_f64());
            let mut cells: [Vec<usize>; 4] = Default::default();
            for &s in members {
                let cx = (((pts[s][0].as_f64() - ox) / side).floor() as i64).clamp(0, 1) as usize;
                let cy = (((pts[s][1].as_f64() - oy) / side).floor() as i64).clamp(0, 1) as usize;
                cells[cy * 2 + cx].push(s);
            }
            for (q, cell) in cells.into_iter().enumerate() {
                if cell.is_empty() {
                    continue;
                }
                let o = [ox + side * (q % 2) as f64, oy + side * (q / 2) as f64];
                let square = Square { origin: [T::lit(o[0]), T::lit(o[1])], side: T::lit(side) };
                next.push((cell, Some(pi), Some(square)));
            }
        }
        top_down.push(next);
    }
    top_down.reverse();
    DecompositionTree::from_partitions(TreeKind::Quadtree, seed, scale, reps, site_of, sm, top_down)
}
