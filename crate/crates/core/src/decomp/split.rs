//! Randomized split-trees: per level, a shared random radius and a random
//! permutation of a net carve every parent box into balls.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::greedy_net;
use super::tree::{dedup_sites, min_and_max_dist, site_metric, DecompositionTree, Square, TreeKind};
use crate::instance::Metric;
use crate::scalar::Scalar;

type Partition<T> = Vec<(Vec<usize>, Option<usize>, Option<Square<T>>)>;

/// Builds a split-tree over the distinct locations of `points`.
pub fn build_split_tree<T: Scalar>(metric: &Metric<T>, points: &[usize], seed: u64) -> DecompositionTree<T> {
    let (reps, site_of) = dedup_sites(metric, points);
    let n = reps.len();
    if n <= 1 {
        let sm = site_metric(metric, &reps, T::one());
        let parts: Vec<Partition<T>> = vec![vec![((0..n).collect(), None, None)]];
        return DecompositionTree::from_partitions(TreeKind::SplitTree, seed, T::one(), reps, site_of, sm, parts);
    }
    let (lo, hi) = min_and_max_dist(metric, &reps);
    let scale = T::one() / lo;
    let sm = site_metric(metric, &reps, scale);
    let diam = (hi * scale).as_f64();
    let levels = (diam.log2().ceil().max(1.0)) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    // partitions are collected top-down and reversed at the end.
    let mut top_down: Vec<Partition<T>> = vec![vec![(all.clone(), None, None)]];
    for level in (0..levels).rev() {
        let r_lo = 2f64.powi(level as i32 - 1);
        let radius = T::lit(rng.random_range(r_lo..2.0 * r_lo));
        let delta = T::lit(2f64.powi(level as i32 - 2));
        let mut centers = greedy_net(&all, delta, |a, b| sm.dist(a, b));
        centers.shuffle(&mut rng);
        let parents = top_down.last().expect("non-empty");
        let mut next: Partition<T> = Vec::new();
        for (pi, (members, _, _)) in parents.iter().enumerate() {
            // Group by the first center (in permutation order) within the radius.
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            for &x in members {
                let rank = centers
                    .iter()
                    .position(|&c| sm.dist(c, x) <= radius)
                    .expect("net covers every site");
                match groups.iter_mut().find(|(r, _)| *r == rank) {
                    Some((_, g)) => g.push(x),
                    None => groups.push((rank, vec![x])),
                }
            }
            groups.sort_by_key(|(r, _)| *r);
            for (_, g) in groups {
                next.push((g, Some(pi), None));
            }
        }
        top_down.push(next);
    }
    top_down.reverse();
    DecompositionTree::from_partitions(TreeKind::SplitTree, seed, scale, reps, site_of, sm, top_down)
}
