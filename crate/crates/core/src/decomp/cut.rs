//! Rings, bad cuts and the badly-cut classification.

use serde::Serialize;

use super::tree::DecompositionTree;
use crate::scalar::Scalar;

/// Inputs of the bad-cut threshold `t(j) = ⌈log₂(d·log₂n·F)⌉ + j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutParams {
    pub eps: f64,
    pub p: f64,
    /// Doubling dimension used in the threshold.
    pub d: f64,
    /// Replaces the factor `F = (ε/(p+1))^{-5p}` when set.
    pub factor_override: Option<f64>,
}

impl CutParams {
    pub fn new(eps: f64, p: f64, d: f64) -> Self {
        CutParams { eps, p, d, factor_override: None }
    }

    /// `(ε/(p+1))^{5p}`, the per-point bad-cut probability scale.
    pub fn bad_cut_scale(&self) -> f64 {
        (self.eps / (self.p + 1.0)).powf(5.0 * self.p)
    }

    /// `⌈log₂(d·log₂n·F)⌉`, so that `t(j) = offset + j`.
    pub fn threshold_offset(&self, n_sites: usize) -> i64 {
        let log_n = (n_sites.max(2) as f64).log2();
        let factor = self.factor_override.unwrap_or_else(|| 1.0 / self.bad_cut_scale());
        (self.d * log_n * factor).log2().ceil() as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RingCut {
    /// Ring index: distances in `(2^j, 2^{j+1}]` (scaled).
    pub j: i64,
    /// Level at which `B(c, 2^j)` is cut, if it is cut at all.
    pub cut_level: Option<usize>,
    pub bad: bool,
}

/// Ring flags of every classified site.
#[derive(Clone, Debug, Serialize)]
pub struct CutReport {
    pub params: CutParams,
    pub offset: i64,
    /// `None` for sites that were not classified.
    pub rings: Vec<Option<Vec<RingCut>>>,
    pub site_bad: Vec<bool>,
    #[serde(skip)]
    site_of: Vec<usize>,
}

impl CutReport {
    /// Whether the location of `point` is badly cut.
    pub fn is_badly_cut(&self, point: usize) -> bool {
        self.site_of
            .get(point)
            .and_then(|&s| self.site_bad.get(s))
            .copied()
            .unwrap_or(false)
    }

    pub fn badly_cut_sites(&self) -> usize {
        self.site_bad.iter().filter(|&&b| b).count()
    }

    /// Largest ring count over classified sites.
    pub fn max_rings(&self) -> usize {
        self.rings.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }

    /// Total number of evaluated rings and how many suffered a bad cut.
    pub fn ring_totals(&self) -> (usize, usize) {
        let all = self.rings.iter().flatten().flatten();
        let (mut total, mut bad) = (0, 0);
        for r in all {
            total += 1;
            bad += r.bad as usize;
        }
        (total, bad)
    }

    /// A report that flags nothing.
    pub fn empty<T: Scalar>(tree: &DecompositionTree<T>, params: CutParams) -> Self {
        let n = tree.site_count();
        CutReport {
            params,
            offset: params.threshold_offset(n),
            rings: vec![None; n],
            site_bad: vec![false; n],
            site_of: tree.site_of.clone(),
        }
    }

    /// Flags the given sites as badly cut (for hand-built scenarios).
    pub fn with_bad_sites(mut self, sites: &[usize]) -> Self {
        for &s in sites {
            self.site_bad[s] = true;
        }
        self
    }
}

/// Dyadic ring indices `⌈log₂ min⌉ ..= ⌈log₂ diam⌉` of a tree's scaled metric.
pub fn ring_range<T: Scalar>(tree: &DecompositionTree<T>) -> Option<(i64, i64)> {
    let n = tree.site_count();
    if n < 2 {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            let d = tree.dist(a, b).as_f64();
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Some((lo.log2().ceil() as i64, hi.log2().ceil() as i64))
}

/// Evaluates every ring of the sites of `points` and flags bad cuts.
pub fn classify_badly_cut<T: Scalar>(tree: &DecompositionTree<T>, points: &[usize], params: CutParams) -> CutReport {
    let mut report = CutReport::empty(tree, params);
    let Some((j_lo, j_hi)) = ring_range(tree) else {
        return report;
    };
    let n = tree.site_count();
    let mut wanted = vec![false; n];
    for &q in points {
        if let Some(s) = tree.site(q) {
            wanted[s] = true;
        }
    }
    for c in (0..n).filter(|&c| wanted[c]) {
        let mut by_dist: Vec<(f64, usize)> = (0..n)
            .filter(|&s| s != c)
            .map(|s| (tree.dist(c, s).as_f64(), tree.join_level(c, s)))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rings = Vec::new();
        let mut idx = 0;
        let mut top = 0usize;
        for j in j_lo..=j_hi {
            let radius = 2f64.powi(j as i32);
            while idx < by_dist.len() && by_dist[idx].0 <= radius {
                top = top.max(by_dist[idx].1);
                idx += 1;
            }
            let cut_level = top.checked_sub(1);
            let bad = cut_level.is_some_and(|l| l as i64 > report.offset + j);
            rings.push(RingCut { j, cut_level, bad });
        }
        report.site_bad[c] = rings.iter().any(|r| r.bad);
        report.rings[c] = Some(rings);
    }
    report
}
