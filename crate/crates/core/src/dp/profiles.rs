//! Compressed portal profiles for the plane.
//!
//! A profile is admitted when, read clockwise from its largest entry, every
//! other entry is a rounded power of `1+ε⁵` and neighbouring entries stay
//! within a factor `ε²` of each other (with integer rounding). In-flow and
//! out-flow are filtered separately.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressedProfiles {
    pub eps: f64,
    /// Admitted non-distinguished counts up to the demand bound, ascending.
    pub values: Vec<u64>,
}

/// Profile filter for `eps` and counts up to `n`.
pub fn ptas_profiles(eps: f64, n: usize) -> CompressedProfiles {
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    let base = 1.0 + eps.powi(5);
    let mut values = vec![0u64];
    let mut x = 1.0f64;
    while x.floor() <= n as f64 {
        let v = x.floor() as u64;
        if values.last() != Some(&v) {
            values.push(v);
        }
        x *= base;
    }
    CompressedProfiles { eps, values }
}

impl CompressedProfiles {
    pub fn is_power(&self, v: u64) -> bool {
        self.values.binary_search(&v).is_ok()
    }

    /// `⌈log_{1+ε⁵}(1/ε⁴)⌉ + 1`, the nominal per-portal choice count.
    pub fn choices_bound(&self) -> usize {
        ((1.0 / self.eps.powi(4)).ln() / (1.0 + self.eps.powi(5)).ln()).ceil() as usize + 1
    }

    /// Index of the distinguished portal: the largest count, first on ties.
    pub fn distinguished(counts: &[u64]) -> usize {
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    /// Whether one nonnegative count vector (in clockwise portal order) is admitted.
    pub fn admits_counts(&self, counts: &[u64]) -> bool {
        if counts.iter().all(|&c| c == 0) {
            return true;
        }
        let sq = self.eps * self.eps;
        let star = Self::distinguished(counts);
        let np = counts.len();
        let order: Vec<u64> = (0..np).map(|t| counts[(star + t) % np]).collect();
        if !order[1..].iter().all(|&c| self.is_power(c)) {
            return false;
        }
        order.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            (sq * a as f64).floor() <= b as f64 && (sq * b as f64).floor() <= a as f64
        })
    }

    /// Splits a signed net-flow vector into out-counts and in-counts and admits both.
    pub fn admits(&self, flow: &[i32]) -> bool {
        let out: Vec<u64> = flow.iter().map(|&v| v.max(0) as u64).collect();
        let inn: Vec<u64> = flow.iter().map(|&v| (-v).max(0) as u64).collect();
        self.admits_counts(&out) && self.admits_counts(&inn)
    }

    /// Nearest admitted vector with the same total: the non-distinguished
    /// entries are snapped clockwise to the closest power that respects the
    /// ratio rule with their predecessor, and the remainder sits on the
    /// distinguished portal. `None` when no such vector is found.
    pub fn repair(&self, counts: &[u64]) -> Option<Vec<u64>> {
        if self.admits_counts(counts) {
            return Some(counts.to_vec());
        }
        let np = counts.len();
        let total: u64 = counts.iter().sum();
        let star = Self::distinguished(counts);
        let sq = self.eps * self.eps;
        let mut head = counts[star];
        for _ in 0..16 {
            let mut t = vec![0u64; np];
            let mut prev = head;
            let mut rest = 0u64;
            for s in 1..np {
                let i = (star + s) % np;
                let lo = (sq * prev as f64).floor() as u64;
                let hi = ((prev + 1) as f64 / sq).ceil() as u64 - 1;
                let v = self.nearest_power(counts[i], lo, hi)?;
                t[i] = v;
                rest += v;
                prev = v;
            }
            if rest > total {
                return None;
            }
            t[star] = total - rest;
            if self.admits_counts(&t) {
                return Some(t);
            }
            if t[star] == head {
                return None;
            }
            head = t[star];
        }
        None
    }

    /// Power in `[lo, hi]` closest to `c`, the smaller one on ties.
    fn nearest_power(&self, c: u64, lo: u64, hi: u64) -> Option<u64> {
        self.values
            .iter()
            .copied()
            .filter(|&v| v >= lo && v <= hi)
            .min_by_key(|&v| (v.abs_diff(c), v))
    }

    /// Every admitted count vector over `portals` portals with total at most `n`.
    pub fn enumerate(&self, portals: usize, n: usize) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        let mut cur = vec![0u64; portals];
        self.enumerate_rec(0, n as u64, &mut cur, &mut out);
        out
    }

    fn enumerate_rec(&self, at: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if at == cur.len() {
            if self.admits_counts(cur) {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur[at] = v;
            self.enumerate_rec(at + 1, left - v, cur, out);
        }
        cur[at] = 0;
    }
}
