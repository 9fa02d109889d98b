//! Portal placement and the routing structure between nested boxes.

use serde::Serialize;

use crate::decomp::{greedy_net, DecompositionTree, TreeKind};
use crate::instance::{euclid, Metric};
use crate::scalar::Scalar;

/// A portal: either a site of the tree or a point on a box boundary (scaled coordinates).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PortalPoint<T> {
    Site(usize),
    Point([T; 2]),
}

/// Portals of one box and the hop from each to its nearest parent portal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxPortals<T> {
    pub points: Vec<PortalPoint<T>>,
    /// Index of the nearest portal of the parent box (empty at the root).
    pub parent_of: Vec<usize>,
    /// Scaled length of that hop.
    pub hop: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortalSet<T> {
    pub rho: f64,
    /// Indexed by box id.
    pub boxes: Vec<BoxPortals<T>>,
    /// Whether a box had to be thinned below its nominal portal count.
    pub capped: bool,
}

fn coords<T: Scalar>(tree: &DecompositionTree<T>, s: usize) -> Option<[T; 2]> {
    match &tree.metric {
        Metric::Plane(pts) => Some(pts[s]),
        Metric::Matrix(_) => None,
    }
}

/// Scaled distance between two portals.
pub fn portal_dist<T: Scalar>(tree: &DecompositionTree<T>, a: PortalPoint<T>, b: PortalPoint<T>) -> T {
    match (a, b) {
        (PortalPoint::Site(x), PortalPoint::Site(y)) => tree.dist(x, y),
        (PortalPoint::Site(x), PortalPoint::Point(q)) | (PortalPoint::Point(q), PortalPoint::Site(x)) => {
            euclid(coords(tree, x).expect("boundary portals need plane coordinates"), q)
        }
        (PortalPoint::Point(q), PortalPoint::Point(r)) => euclid(q, r),
    }
}

/// `count` points per side of a square, clockwise from the top-left corner.
pub fn boundary_points<T: Scalar>(origin: [T; 2], side: T, per_side: usize) -> Vec<[T; 2]> {
    let [x0, y0] = origin;
    let step = side / T::of_usize(per_side);
    let mut out = Vec::with_capacity(4 * per_side);
    for t in 0..per_side {
        out.push([x0 + step * T::of_usize(t), y0 + side]);
    }
    for t in 0..per_side {
        out.push([x0 + side, y0 + side - step * T::of_usize(t)]);
    }
    for t in 0..per_side {
        out.push([x0 + side - step * T::of_usize(t), y0]);
    }
    for t in 0..per_side {
        out.push([x0, y0 + step * T::of_usize(t)]);
    }
    out
}

/// Portals of one box. Returns the portals and whether `max_portals` thinned them.
///
/// Level-0 boxes use their single site. The root uses one portal so that all
/// flow meets there. Other split-tree boxes use a greedy `ρ·2^{i+1}`-net of
/// their sites; quadtree boxes use `4⌈1/ρ⌉` equally spaced boundary points.
pub fn portals_for_box<T: Scalar>(
    tree: &DecompositionTree<T>,
    b: usize,
    rho: f64,
    max_portals: Option<usize>,
) -> (Vec<PortalPoint<T>>, bool) {
    let bx = &tree.boxes[b];
    if bx.level == 0 {
        return (vec![PortalPoint::Site(bx.sites[0])], false);
    }
    let cap = max_portals.unwrap_or(usize::MAX).max(1);
    // The root, and every box in one-portal mode, gets a single central portal.
    if bx.parent.is_none() || cap == 1 {
        let p = match (tree.kind, bx.square) {
            (TreeKind::Quadtree, Some(sq)) => {
                let h = sq.side / T::lit(2.0);
                PortalPoint::Point([sq.origin[0] + h, sq.origin[1] + h])
            }
            _ => PortalPoint::Site(bx.sites[0]),
        };
        return (vec![p], false);
    }
    match (tree.kind, bx.square) {
        (TreeKind::Quadtree, Some(sq)) => {
            let nominal = (1.0 / rho).ceil().max(1.0) as usize;
            let per_side = if 4 * nominal > cap { (cap / 4).max(1) } else { nominal };
            let pts = boundary_points(sq.origin, sq.side, per_side);
            (pts.into_iter().map(PortalPoint::Point).collect(), per_side < nominal)
        }
        _ => {
            let mut delta = T::lit(rho * 2f64.powi(bx.level as i32 + 1));
            let mut net = greedy_net(&bx.sites, delta, |x, y| tree.dist(x, y));
            let mut thinned = false;
            while net.len() > cap {
                delta = delta * T::lit(2.0);
                net = greedy_net(&bx.sites, delta, |x, y| tree.dist(x, y));
                thinned = true;
            }
            (net.into_iter().map(PortalPoint::Site).collect(), thinned)
        }
    }
}

/// Portals of every box with their parent hops.
pub fn build_portals<T: Scalar>(tree: &DecompositionTree<T>, rho: f64, max_portals: Option<usize>) -> PortalSet<T> {
    let mut capped = false;
    let points: Vec<Vec<PortalPoint<T>>> = (0..tree.boxes.len())
        .map(|b| {
            let (pts, thin) = portals_for_box(tree, b, rho, max_portals);
            capped |= thin;
            pts
        })
        .collect();
    let boxes = (0..tree.boxes.len())
        .map(|b| {
            let mut parent_of = Vec::new();
            let mut hop = Vec::new();
            if let Some(par) = tree.boxes[b].parent {
                for &q in &points[b] {
                    let (best, d) = points[par]
                        .iter()
                        .enumerate()
                        .map(|(i, &r)| (i, portal_dist(tree, q, r)))
                        .fold((0, T::infinity()), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
                    parent_of.push(best);
                    hop.push(d);
                }
            }
            BoxPortals { points: points[b].clone(), parent_of, hop }
        })
        .collect();
    PortalSet { rho, boxes, capped }
}

impl<T: Scalar> PortalSet<T> {
    pub fn max_portals(&self) -> usize {
        self.boxes.iter().map(|b| b.points.len()).max().unwrap_or(0)
    }

    pub fn mean_portals(&self) -> f64 {
        if self.boxes.is_empty() {
            return 0.0;
        }
        self.boxes.iter().map(|b| b.points.len()).sum::<usize>() as f64 / self.boxes.len() as f64
    }

    /// Portal index of `site`'s chain at every level, bottom-up.
    pub fn chain(&self, tree: &DecompositionTree<T>, site: usize) -> Vec<usize> {
        let mut out = vec![0usize];
        for level in 0..tree.levels {
            let b = tree.box_at(level, site);
            let cur = *out.last().expect("non-empty");
            out.push(self.boxes[b].parent_of[cur]);
        }
        out
    }

    /// Scaled routing cost of one unit between two sites: hops up both
    /// chains (each raised to `p`) until the two portals are settled against
    /// each other inside a common box, minimized over the settling level.
    pub fn route_cost(&self, tree: &DecompositionTree<T>, a: usize, b: usize, p: T) -> T {
        let ca = self.chain(tree, a);
        let cb = self.chain(tree, b);
        let join = tree.join_level(a, b);
        let mut climbed = T::zero();
        let mut best = T::infinity();
        for level in 0..=tree.levels {
            if level >= join {
                let bx = tree.box_at(level, a);
                let pts = &self.boxes[bx].points;
                let settle = portal_dist(tree, pts[ca[level]], pts[cb[level]]).powp(p);
                best = best.min(climbed + settle);
            }
            if level < tree.levels {
                let (ba, bb) = (tree.box_at(level, a), tree.box_at(level, b));
                climbed = climbed + self.boxes[ba].hop[ca[level]].powp(p) + self.boxes[bb].hop[cb[level]].powp(p);
            }
        }
        best
    }
}
