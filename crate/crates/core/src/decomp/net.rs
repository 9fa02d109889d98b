//! Greedy δ-nets.

use crate::scalar::Scalar;

/// Greedy δ-net of `items`, scanned in the given order.
///
/// Every item lies within `delta` of a returned item and returned items are
/// pairwise more than `delta` apart.
pub fn greedy_net<T: Scalar>(items: &[usize], delta: T, dist: impl Fn(usize, usize) -> T) -> Vec<usize> {
    let mut net: Vec<usize> = Vec::new();
    for &x in items {
        if net.iter().all(|&y| dist(x, y) > delta) {
            net.push(x);
        }
    }
    net
}

/// Doubling-dimension estimate: the largest `log₂(|net(δ)| / |net(2δ)|)`
/// over the dyadic net hierarchy, clamped to `[1, cap]`.
pub fn estimate_doubling_dim<T: Scalar>(items: &[usize], cap: f64, dist: impl Fn(usize, usize) -> T) -> f64 {
    if items.len() < 2 {
        return 1.0;
    }
    let mut min_d = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    for (a, &x) in items.iter().enumerate() {
        for &y in &items[a + 1..] {
            let d = dist(x, y).as_f64();
            if d > 0.0 {
                min_d = min_d.min(d);
            }
            max_d = max_d.max(d);
        }
    }
    if !min_d.is_finite() {
        return 1.0;
    }
    let mut best: f64 = 1.0;
    let mut delta = min_d / 2.0;
    let mut prev = greedy_net(items, T::lit(delta), &dist).len();
    while delta < max_d {
        let next = greedy_net(items, T::lit(2.0 * delta), &dist).len();
        if next > 0 {
            best = best.max((prev as f64 / next as f64).log2());
        }
        prev = next;
        delta *= 2.0;
    }
    best.min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> (Vec<usize>, impl Fn(usize, usize) -> f64) {
        ((0..n).collect(), |a: usize, b: usize| (a as f64 - b as f64).abs())
    }

    #[test]
    fn small_delta_keeps_everything() {
        let (items, d) = line(6);
        assert_eq!(greedy_net(&items, 0.5, d), items);
    }

    #[test]
    fn collinear_delta_four() {
        let (items, d) = line(16);
        let net = greedy_net(&items, 4.0, d);
        assert_eq!(net, vec![0, 5, 10, 15]);
        // covering bound 2^{⌈log₂(15/4)⌉} = 4 and the packing lower bound ⌈16/9⌉.
        assert!(net.len() <= 4 && net.len() >= 2);
    }

    #[test]
    fn huge_delta_single_point() {
        let (items, d) = line(10);
        assert_eq!(greedy_net(&items, 100.0, d).len(), 1);
    }

    #[test]
    fn line_dimension_is_about_one() {
        let (items, d) = line(64);
        let dim = estimate_doubling_dim(&items, 8.0, d);
        assert!((1.0..=2.0).contains(&dim), "{dim}");
    }
}
