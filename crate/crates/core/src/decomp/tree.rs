use serde::Serialize;

use crate::instance::Metric;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeKind {
    Quadtree,
    SplitTree,
}

/// Axis-aligned square in scaled coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Square<T> {
    pub origin: [T; 2],
    pub side: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeBox<T> {
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Site ids inside the box, ascending.
    pub sites: Vec<usize>,
    pub square: Option<Square<T>>,
}

/// Hierarchical decomposition over the distinct locations ("sites") of a point set.
///
/// Distances inside the tree are scaled by `scale` so that the closest pair
/// of sites is at distance 1 (split-tree) or 3 (quadtree).
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionTree<T> {
    pub kind: TreeKind,
    pub seed: u64,
    pub scale: T,
    /// Top level ℓ; level ℓ is the whole set and level 0 holds singletons.
    pub levels: usize,
    /// Representative point id of each site.
    pub site_points: Vec<usize>,
    /// Site of every point id of the source metric (`usize::MAX` if absent).
    #[serde(skip)]
    pub site_of: Vec<usize>,
    #[serde(skip)]
    pub metric: Metric<T>,
    pub boxes: Vec<TreeBox<T>>,
    /// Box ids per level.
    pub by_level: Vec<Vec<usize>>,
    /// `box_of[level][site]`.
    #[serde(skip)]
    pub box_of: Vec<Vec<usize>>,
}

/// Groups `points` into distinct locations. Returns representatives and the point → site map.
pub(crate) fn dedup_sites<T: Scalar>(metric: &Metric<T>, points: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut reps: Vec<usize> = Vec::new();
    let mut site_of = vec![usize::MAX; metric.len()];
    for &q in points {
        if site_of[q] != usize::MAX {
            continue;
        }
        match reps.iter().position(|&r| metric.dist(q, r) <= T::zero()) {
            Some(s) => site_of[q] = s,
            None => {
                site_of[q] = reps.len();
                reps.push(q);
            }
        }
    }
    (reps, site_of)
}

/// Scaled copy of the metric restricted to `reps`.
pub(crate) fn site_metric<T: Scalar>(metric: &Metric<T>, reps: &[usize], scale: T) -> Metric<T> {
    match metric {
        Metric::Plane(pts) => Metric::Plane(reps.iter().map(|&r| [pts[r][0] * scale, pts[r][1] * scale]).collect()),
        Metric::Matrix(_) => Metric::Matrix(
            reps.iter()
                .map(|&a| reps.iter().map(|&b| metric.dist(a, b) * scale).collect())
                .collect(),
        ),
    }
}

pub(crate) fn min_and_max_dist<T: Scalar>(metric: &Metric<T>, reps: &[usize]) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for (i, &a) in reps.iter().enumerate() {
        for &b in &reps[i + 1..] {
            let d = metric.dist(a, b);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

impl<T: Scalar> DecompositionTree<T> {
    /// Assembles a tree from per-level partitions, given top-down as lists of
    /// site groups with the index of their parent group one level up.
    pub(crate) fn from_partitions(
        kind: TreeKind,
        seed: u64,
        scale: T,
        site_points: Vec<usize>,
        site_of: Vec<usize>,
        metric: Metric<T>,
        // partitions[level] = (sites, parent index within partitions[level+1], square)
        partitions: Vec<Vec<(Vec<usize>, Option<usize>, Option<Square<T>>)>>,
    ) -> Self {
        let levels = partitions.len() - 1;
        let nsites = site_points.len();
        let mut boxes: Vec<TreeBox<T>> = Vec::new();
        let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); levels + 1];
        let mut box_of = vec![vec![usize::MAX; nsites]; levels + 1];
        for level in (0..=levels).rev() {
            for (sites, parent_idx, square) in &partitions[level] {
                let id = boxes.len();
                let parent = parent_idx.map(|pi| by_level[level + 1][pi]);
                if let Some(pid) = parent {
                    boxes[pid].children.push(id);
                }
                let mut sites = sites.clone();
                sites.sort_unstable();
                for &s in &sites {
                    box_of[level][s] = id;
                }
                boxes.push(TreeBox { level, parent, children: Vec::new(), sites, square: *square });
                by_level[level].push(id);
            }
        }
        DecompositionTree { kind, seed, scale, levels, site_points, site_of, metric, boxes, by_level, box_of }
    }

    pub fn site_count(&self) -> usize {
        self.site_points.len()
    }

    /// Scaled distance between two sites.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> T {
        self.metric.dist(a, b)
    }

    /// Site of a point of the source metric.
    pub fn site(&self, point: usize) -> Option<usize> {
        self.site_of.get(point).copied().filter(|&s| s != usize::MAX)
    }

    /// Box containing `site` at `level`.
    pub fn box_at(&self, level: usize, site: usize) -> usize {
        self.box_of[level][site]
    }

    pub fn root(&self) -> usize {
        self.by_level[self.levels][0]
    }

    /// Upper bound on the scaled diameter of a level-`i` box.
    pub fn diameter_bound(&self, level: usize) -> T {
        let base = T::lit(2f64.powi(level as i32 + 1));
        match self.kind {
            TreeKind::SplitTree => base,
            TreeKind::Quadtree => base * T::lit(std::f64::consts::SQRT_2),
        }
    }

    /// Largest scaled distance between two sites of a box.
    pub fn box_diameter(&self, b: usize) -> T {
        let s = &self.boxes[b].sites;
        let mut d = T::zero();
        for (i, &x) in s.iter().enumerate() {
            for &y in &s[i + 1..] {
                d = d.max(self.dist(x, y));
            }
        }
        d
    }

    /// Lowest level at which `a` and `b` share a box.
    pub fn join_level(&self, a: usize, b: usize) -> usize {
        (0..=self.levels)
            .find(|&l| self.box_of[l][a] == self.box_of[l][b])
            .unwrap_or(self.levels)
    }

    /// Whether two sites fall in different level-`i` boxes.
    pub fn separated_at(&self, level: usize, a: usize, b: usize) -> bool {
        self.box_of[level][a] != self.box_of[level][b]
    }

    /// Sites within scaled distance `x` of `center`.
    pub fn ball(&self, center: usize, x: T) -> Vec<usize> {
        (0..self.site_count()).filter(|&s| self.dist(center, s) <= x).collect()
    }

    /// The definition of a ball cut at level `i`, evaluated directly: at
    /// least two level-`i` boxes meet `B(center, x)` and one level-`(i+1)`
    /// box contains it.
    pub fn is_ball_cut_at_level(&self, center: usize, x: T, level: usize) -> bool {
        if level >= self.levels {
            return false;
        }
        let ball = self.ball(center, x);
        let mut lower: Vec<usize> = ball.iter().map(|&s| self.box_of[level][s]).collect();
        lower.sort_unstable();
        lower.dedup();
        let upper = self.box_of[level + 1][center];
        lower.len() >= 2 && ball.iter().all(|&s| self.box_of[level + 1][s] == upper)
    }

    /// The unique level at which `B(center, x)` is cut, if any.
    pub fn cut_level(&self, center: usize, x: T) -> Option<usize> {
        let top = self
            .ball(center, x)
            .into_iter()
            .map(|s| self.join_level(center, s))
            .max()
            .unwrap_or(0);
        top.checked_sub(1)
    }

    /// Checks the structural invariants; returns a description of each failure.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.site_count();
        if self.by_level[self.levels].len() != 1 || self.boxes[self.root()].sites.len() != n {
            errs.push("top level is not the whole set".into());
        }
        for &b in &self.by_level[0] {
            if self.boxes[b].sites.len() != 1 {
                errs.push(format!("level-0 box {b} is not a singleton"));
            }
        }
        let fanout = match self.kind {
            TreeKind::Quadtree => 4,
            TreeKind::SplitTree => usize::MAX,
        };
        for (id, bx) in self.boxes.iter().enumerate() {
            let slack = T::lit(1e-9) * T::one().max(self.diameter_bound(bx.level));
            if self.box_diameter(id) > self.diameter_bound(bx.level) + slack {
                errs.push(format!("box {id} at level {} exceeds its diameter bound", bx.level));
            }
            if let Some(p) = bx.parent {
                let parent = &self.boxes[p];
                if parent.level != bx.level + 1 || !bx.sites.iter().all(|s| parent.sites.binary_search(s).is_ok()) {
                    errs.push(format!("box {id} is not refined by its parent"));
                }
            } else if bx.level != self.levels {
                errs.push(format!("box {id} has no parent"));
            }
            if bx.children.len() > fanout {
                errs.push(format!("box {id} has {} children", bx.children.len()));
            }
            if bx.level > 0 {
                let covered: usize = bx.children.iter().map(|&c| self.boxes[c].sites.len()).sum();
                if covered != bx.sites.len() {
                    errs.push(format!("children of box {id} do not partition it"));
                }
            }
        }
        for level in 0..=self.levels {
            if self.box_of[level].contains(&usize::MAX) {
                errs.push(format!("level {level} does not cover every site"));
            }
        }
        errs
    }

    /// Largest number of children of any box.
    pub fn max_fanout(&self) -> usize {
        self.boxes.iter().map(|b| b.children.len()).max().unwrap_or(0)
    }

    /// JSON dump of levels, boxes and memberships.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }
}
