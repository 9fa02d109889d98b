//! The partition of OPT and L facilities, the pairing of unmatched OPT
//! facilities and the two randomized constructions built on them: closing
//! one facility per selected pair, then swapping OPT facilities for their
//! L partners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::FlowNetwork;
use super::sequences::{Matching, SeqEnd, Sequences};
use crate::instance::Solution;
use crate::scalar::Scalar;

/// Partition of A into F̃ ∪ F̂ and of B into L̃ ∪ L̂, with φ and ξ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    /// Nearest unmatched B vertex of every unmatched A vertex.
    pub xi: Vec<Option<usize>>,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    pub f_tilde: Vec<usize>,
    pub l_tilde: Vec<usize>,
    pub f_hat: Vec<usize>,
    pub l_hat: Vec<usize>,
    /// One-to-one map F̃ → L̃ as `(a, b)` pairs.
    pub phi: Vec<(usize, usize)>,
    /// `(f_i, g_i, ℓ)`: `f_i` is the one farther from the shared target ℓ.
    pub pairs: Vec<(usize, usize, usize)>,
}

pub fn partition_and_pairs<T: Scalar>(net: &FlowNetwork<T>, matching: &Matching<T>) -> Partition {
    let k = net.side();
    let unmatched_a: Vec<usize> = (0..k).filter(|&a| matching.mate_a[a].is_none()).collect();
    let unmatched_b: Vec<usize> = (0..k).filter(|&b| matching.mate_b[b].is_none()).collect();
    let mut xi = vec![None; k];
    for &a in &unmatched_a {
        xi[a] = unmatched_b.iter().copied().min_by(|&x, &y| {
            net.fac_dist(a, x)
                .partial_cmp(&net.fac_dist(a, y))
                .expect("finite distances")
                .then(x.cmp(&y))
        });
    }
    let shared = |a: usize| unmatched_a.iter().filter(|&&o| xi[o] == xi[a]).count() > 1;
    let (u1, u2): (Vec<usize>, Vec<usize>) = unmatched_a.iter().partition(|&&a| !shared(a));

    let mut phi: Vec<(usize, usize)> = matching.matched_pairs().collect();
    phi.extend(u1.iter().map(|&a| (a, xi[a].expect("unmatched B exists"))));
    phi.sort_unstable();
    let mut f_tilde: Vec<usize> = phi.iter().map(|&(a, _)| a).collect();
    f_tilde.sort_unstable();
    let mut l_tilde: Vec<usize> = phi.iter().map(|&(_, b)| b).collect();
    l_tilde.sort_unstable();
    let l_hat: Vec<usize> = (0..k).filter(|b| l_tilde.binary_search(b).is_err()).collect();

    let mut pairs = Vec::new();
    let mut targets: Vec<usize> = u2.iter().filter_map(|&a| xi[a]).collect();
    targets.sort_unstable();
    targets.dedup();
    for l in targets {
        let mut chi: Vec<usize> = u2.iter().copied().filter(|&a| xi[a] == Some(l)).collect();
        chi.sort_by(|&x, &y| {
            net.fac_dist(x, l)
                .partial_cmp(&net.fac_dist(y, l))
                .expect("finite distances")
                .then(x.cmp(&y))
        });
        for two in chi.chunks_exact(2) {
            pairs.push((two[1], two[0], l));
        }
    }
    Partition { xi, f_hat: u2.clone(), u1, u2, f_tilde, l_tilde, l_hat, phi, pairs }
}

/// Moves the clients of route-to-matched sequences starting at `a`: to the
/// terminal when p = 1, one step along the chain otherwise.
fn reroute_matched<T: Scalar>(net: &FlowNetwork<T>, seqs: &Sequences, a: usize, assignment: &mut [usize]) {
    let linear = net.inst.p.approx_eq(T::one(), 1e-12);
    for s in seqs.seqs.iter().filter(|s| s.start == a) {
        let SeqEnd::Matched(term) = s.end else { continue };
        if linear {
            assignment[net.edges[s.edges[0]].client] = net.a_fac[term];
        } else {
            for (i, &id) in s.edges.iter().enumerate() {
                let target = s.edges.get(i + 1).map_or(term, |&nx| net.edges[nx].a);
                assignment[net.edges[id].client] = net.a_fac[target];
            }
        }
    }
}

/// Outcome of closing one facility per selected pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GStar<T> {
    /// Solution on the augmented instance.
    pub solution: Solution<T>,
    /// Indices into `Partition::pairs`.
    pub selected: Vec<usize>,
}

/// Selects each pair with probability `eps` and closes its farther facility.
///
/// For a selected pair `(f, g)` the route-to-matched clients of both follow
/// μ and whatever remains at `f` moves to `g`. Everyone else keeps OPT.
pub fn sample_g_star<T: Scalar>(
    net: &FlowNetwork<T>,
    seqs: &Sequences,
    part: &Partition,
    eps: f64,
    seed: u64,
) -> GStar<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected: Vec<usize> = (0..part.pairs.len()).filter(|_| rng.random_bool(eps.clamp(0.0, 1.0))).collect();
    let mut assignment = net.opt.assignment.clone();
    let mut closed = Vec::new();
    for &i in &selected {
        let (f, g, _) = part.pairs[i];
        reroute_matched(net, seqs, f, &mut assignment);
        reroute_matched(net, seqs, g, &mut assignment);
        for slot in assignment.iter_mut() {
            if *slot == net.a_fac[f] {
                *slot = net.a_fac[g];
            }
        }
        closed.push(net.a_fac[f]);
    }
    let centers: Vec<usize> = net.a_fac.iter().copied().filter(|c| !closed.contains(c)).collect();
    let solution = Solution::from_assignment(&net.inst, centers, assignment).expect("valid assignment");
    GStar { solution, selected }
}

/// Outcome of the randomized swap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapOutcome<T> {
    pub solution: Solution<T>,
    /// Swapped `(a, b)` pairs of φ.
    pub swapped: Vec<(usize, usize)>,
    /// Clients moved by the B/B′ displacement rule.
    pub displaced: usize,
    /// Clients that needed the greedy fallback (expected zero).
    pub repairs: usize,
}

/// Replaces each F̃ facility by its φ partner with probability `π²`, pins the
/// L-clients of every opened partner and repairs overflow by displacement.
pub fn sample_swap<T: Scalar>(
    net: &FlowNetwork<T>,
    part: &Partition,
    g_star: &Solution<T>,
    pi: f64,
    seed: u64,
) -> SwapOutcome<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prob = (pi * pi).clamp(0.0, 1.0);
    let swapped: Vec<(usize, usize)> = part.phi.iter().copied().filter(|_| rng.random_bool(prob)).collect();
    let eta = net.eta;
    let n = g_star.assignment.len();
    let mut assignment = g_star.assignment.clone();
    let mut centers = g_star.centers.clone();
    let mut displaced = 0;
    let mut repairs = 0;
    for &(a, b) in &swapped {
        let (f, l) = (net.a_fac[a], net.b_fac[b]);
        if !centers.contains(&f) {
            continue;
        }
        centers.retain(|&c| c != f);
        centers.push(l);
        let n_f: Vec<usize> = (0..n).filter(|&c| assignment[c] == f).collect();
        let n_l: Vec<usize> = (0..n).filter(|&c| net.local.assignment[c] == l).collect();
        let before = assignment.clone();
        for &c in n_f.iter().chain(&n_l) {
            assignment[c] = l;
        }
        let load = n_f.len() + n_l.iter().filter(|c| !n_f.contains(c)).count();
        if load > eta {
            let over = load - eta;
            let movers: Vec<usize> = n_f.iter().copied().filter(|c| !n_l.contains(c)).take(over).collect();
            let vacated: Vec<usize> = n_l.iter().copied().filter(|c| !n_f.contains(c)).take(over).collect();
            for (&c, &v) in movers.iter().zip(&vacated) {
                assignment[c] = before[v];
                displaced += 1;
            }
            let paired = movers.len().min(vacated.len());
            let stuck: Vec<usize> = n_f.iter().copied().filter(|&c| assignment[c] == l).take(over - paired).collect();
            for c in stuck {
                assignment[c] = nearest_with_room(net, &centers, &assignment, c, l);
                repairs += 1;
            }
        }
    }
    centers.sort_unstable();
    let solution = Solution::from_assignment(&net.inst, centers, assignment).expect("valid assignment");
    SwapOutcome { solution, swapped, displaced, repairs }
}

fn nearest_with_room<T: Scalar>(
    net: &FlowNetwork<T>,
    centers: &[usize],
    assignment: &[usize],
    c: usize,
    fallback: usize,
) -> usize {
    centers
        .iter()
        .copied()
        .filter(|&f| assignment.iter().filter(|&&x| x == f).count() < net.eta)
        .min_by(|&x, &y| net.inst.cost(c, x).partial_cmp(&net.inst.cost(c, y)).expect("finite"))
        .unwrap_or(fallback)
}
