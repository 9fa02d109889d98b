use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assign::{brute_force_opt, optimal_assignment, verify_solution, BRUTE_FORCE_LIMIT};
use crate::instance::Instance;

fn line(clients: &[f64], facilities: &[f64], k: usize, eta: usize) -> Instance<f64> {
    let c: Vec<[f64; 2]> = clients.iter().map(|&x| [x, 0.0]).collect();
    let f: Vec<[f64; 2]> = facilities.iter().map(|&x| [x, 0.0]).collect();
    Instance::plane(&c, &f, k, eta, 1.0).unwrap()
}

fn sol(inst: &Instance<f64>, centers: &[usize], assignment: &[usize]) -> Solution<f64> {
    Solution::from_assignment(inst, centers.to_vec(), assignment.to_vec()).unwrap()
}

/// Random tiny instance with its exact optimum and a random local solution.
fn random_case(seed: u64, p: f64) -> (Instance<f64>, Solution<f64>, Solution<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.random_range(4..=10);
    let eta = rng.random_range(2..=4);
    let k = n.div_ceil(eta) + rng.random_range(0..=1);
    let m = k + rng.random_range(1..=2);
    let mut pt = || [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)];
    let clients: Vec<[f64; 2]> = (0..n).map(|_| pt()).collect();
    let facilities: Vec<[f64; 2]> = (0..m).map(|_| pt()).collect();
    let inst = Instance::plane(&clients, &facilities, k, eta, p).unwrap();
    let opt = brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap();
    let mut centers: Vec<usize> = (0..m).collect();
    rand::seq::SliceRandom::shuffle(centers.as_mut_slice(), &mut rng);
    centers.truncate(k);
    let local = optimal_assignment(&inst, &centers).unwrap();
    (inst, opt, local)
}

#[test]
fn identical_solutions_pair_each_client_with_its_copy() {
    let inst = line(&[0.0, 1.0, 9.0, 10.0], &[0.5, 9.5], 2, 4);
    let s = sol(&inst, &[0, 1], &[0, 0, 1, 1]);
    let net = build_phi(&inst, &s, &s).unwrap();
    for e in &net.edges {
        assert_eq!(e.a, e.b);
        assert!((e.weight - 2.0 * 0.5).abs() < 1e-12);
    }
    assert!(net.deleted_clients().is_empty());
    assert_eq!(net.inst.facilities.len(), 4);
}

#[test]
fn odd_capacity_deletes_one_client() {
    // One OPT facility at 0, one L facility at 10, three clients.
    let inst = line(&[1.0, 4.0, 6.0], &[0.0, 10.0], 1, 3);
    let opt = sol(&inst, &[0], &[0, 0, 0]);
    let local = sol(&inst, &[1], &[1, 1, 1]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    assert_eq!(net.eta_prime, 2);
    assert_eq!(net.deleted_clients().len(), 1);
    assert_eq!(net.deg_a[0], 2);
    assert_eq!(net.deg_b[0], 2);
    // All three weights equal 10, so the rounding keeps the edge it reaches first.
    assert!(net.edges.iter().all(|e| (e.weight - 10.0).abs() < 1e-12));
}

#[test]
fn odd_capacity_deletes_lightest_parallel_edge() {
    let inst = line(&[1.0, 4.0, 6.0], &[0.0, 4.0], 1, 3);
    let opt = sol(&inst, &[0], &[0, 0, 0]);
    let local = sol(&inst, &[1], &[1, 1, 1]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    // Weights 1+3, 4+0, 6+2: the client at 1 is the cheapest.
    assert_eq!(net.deleted_clients(), vec![0]);
}

#[test]
fn identical_light_solutions_saturate_every_edge() {
    // Each facility serves two clients with η = 4, so every edge can carry 2.
    let inst = line(&[0.0, 1.0, 9.0, 10.0], &[0.5, 9.5], 2, 4);
    let s = sol(&inst, &[0, 1], &[0, 0, 1, 1]);
    let net = build_phi(&inst, &s, &s).unwrap();
    let flow = max_demand_flow(&net).unwrap();
    assert!(flow.units.iter().all(|&u| u == 2));
    assert!(flow.is_feasible(&net));
    let canonical: f64 = [0.5, 0.5, 0.5, 0.5].iter().map(|d| 2.0 * (2.0 * d)).sum();
    assert!((flow.cost - canonical).abs() < 1e-12);
    assert!(flow.cost <= 2.0 * net.total() + 1e-12);
}

#[test]
fn single_client_has_zero_demand() {
    let inst = line(&[0.0], &[1.0, 2.0], 1, 2);
    let opt = sol(&inst, &[0], &[0]);
    let local = sol(&inst, &[1], &[1]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    assert_eq!(net.deg_a[0] / 2, 0);
    let empty = DemandFlow::from_units(&net, vec![0]);
    assert!(empty.is_feasible(&net));
    assert!(max_demand_flow(&net).unwrap().is_feasible(&net));
}

#[test]
fn capacity_one_is_rejected() {
    let inst = line(&[0.0], &[1.0], 1, 1);
    let s = sol(&inst, &[0], &[0]);
    assert_eq!(build_phi(&inst, &s, &s).unwrap_err(), StructError::CapacityTooSmall(1));
}

#[test]
fn perfect_matching_when_every_facility_is_full() {
    let inst = line(&[0.0, 1.0, 9.0, 10.0], &[0.5, 9.5], 2, 2);
    let s = sol(&inst, &[0, 1], &[0, 0, 1, 1]);
    let net = build_phi(&inst, &s, &s).unwrap();
    let flow = max_demand_flow(&net).unwrap();
    let m = round_matching(&net, &flow);
    assert_eq!(m.mate_a, vec![Some(0), Some(1)]);
    // Enumerated by hand: the lightest perfect matching uses one unit edge per facility.
    assert!((m.weight - 2.0).abs() < 1e-12);
    assert!(m.weight <= m.fractional_weight + 1e-12);
}

#[test]
fn empty_matching_gives_unit_route_to_unmatched_sequences() {
    let inst = line(&[0.0, 3.0], &[0.0, 3.0, 1.0, 100.0], 2, 2);
    let opt = sol(&inst, &[0, 1], &[0, 1]);
    let local = sol(&inst, &[2, 3], &[2, 3]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    let flow = DemandFlow::from_units(&net, vec![0, 0]);
    let m = Matching::from_edges(&net, vec![], 0.0);
    let seqs = build_sequences(&net, &flow, &m);
    assert_eq!(seqs.seqs.len(), 2);
    assert!(seqs.seqs.iter().all(|s| s.edges.len() == 1 && !s.is_route_to_matched()));

    let part = partition_and_pairs(&net, &m);
    // Both OPT facilities have ℓ at 1 as nearest; the one at 3 is farther.
    assert_eq!(part.xi, vec![Some(0), Some(0)]);
    assert_eq!(part.pairs, vec![(1, 0, 0)]);
    assert_eq!(part.f_hat.len(), part.l_hat.len());
    assert!(part.f_tilde.is_empty() && part.l_tilde.is_empty());
}

/// OPT: f0 = {c0, c1}, f1 = {c2, c3, c4}. L: ℓ1 = {c0..c3}, ℓ2 = {c4}. η = 4.
fn chain() -> (FlowNetwork<f64>, DemandFlow<f64>, Matching<f64>) {
    let inst = line(&[1.0, 2.0, 9.0, 8.0, 15.0], &[0.0, 10.0, 5.0, 20.0], 2, 4);
    let opt = sol(&inst, &[0, 1], &[0, 0, 1, 1, 1]);
    let local = sol(&inst, &[2, 3], &[2, 2, 2, 2, 3]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    let flow = DemandFlow::from_units(&net, vec![0, 2, 2, 0, 2]);
    let m = Matching::from_edges(&net, vec![2], 0.0);
    (net, flow, m)
}

#[test]
fn chain_through_a_matched_pair() {
    let inst = line(&[1.0, 9.0, 15.0], &[0.0, 10.0, 5.0, 20.0], 2, 4);
    let opt = sol(&inst, &[0, 1], &[0, 1, 1]);
    let local = sol(&inst, &[2, 3], &[2, 2, 3]);
    let net = build_phi(&inst, &opt, &local).unwrap();
    let flow = DemandFlow::from_units(&net, vec![0, 2, 0]);
    let m = Matching::from_edges(&net, vec![1], 0.0);
    let seqs = build_sequences(&net, &flow, &m);
    let s = seqs.of_edge(0).unwrap();
    assert_eq!(s.edges, vec![0, 2]);
    assert_eq!(s.end, SeqEnd::Unmatched(1));
}

#[test]
fn chain_mu_and_load_bookkeeping() {
    let (net, flow, m) = chain();
    assert!(flow.is_feasible(&net));
    let seqs = build_sequences(&net, &flow, &m);
    assert_eq!(seqs.p[0], Some(PImage::Terminal(1)));
    assert_eq!(seqs.p[1], Some(PImage::Edge(4)));
    assert_eq!(seqs.of_edge(0).unwrap().end, SeqEnd::Matched(1));
    assert_eq!(seqs.of_edge(1).unwrap().end, SeqEnd::Unmatched(1));
    assert!(heavy_unmatched_bound_check(&net, &m, &seqs).is_empty());

    let mu = assignment_mu(&net, &m, &seqs);
    assert_eq!(mu.moved, vec![0]);
    assert_eq!(mu.solution.assignment[0], net.a_fac[1]);
    assert_eq!(mu.loads, vec![1, 4]);
    assert!(mu.load_violations.is_empty());

    // t, t̄, s, s̄, m, m̄ for the pair (ℓ1, f1), evaluated by hand.
    let (t, tb, s, sb, ml, mlb) = (1usize, 1usize, 0usize, 1usize, 1usize, 1usize);
    let count = |pred: &dyn Fn(&PhiEdge<f64>, bool) -> bool| {
        net.edges.iter().enumerate().filter(|(i, e)| pred(e, flow.saturated_edge(*i))).count()
    };
    assert_eq!(count(&|e, sat| e.b == 0 && e.a != 1 && !sat), t);
    assert_eq!(count(&|e, sat| e.b == 0 && e.a != 1 && sat), tb);
    assert_eq!(count(&|e, sat| e.a == 1 && e.b != 0 && !sat), s);
    assert_eq!(count(&|e, sat| e.a == 1 && e.b != 0 && sat), sb);
    assert_eq!(count(&|e, sat| e.a == 1 && e.b == 0 && !sat), ml);
    assert_eq!(count(&|e, sat| e.a == 1 && e.b == 0 && sat), mlb);
    let eta_p = net.eta_prime;
    assert!(sb + s + ml + mlb <= eta_p);
    assert!(tb + t + ml + mlb <= eta_p);
    assert!(2 * ((tb + t + ml + mlb) / 2) <= 2 * tb + 2 * mlb && 2 * tb + 2 * mlb <= eta_p);
    assert!(2 * ((sb + s + ml + mlb) / 2) <= 2 * sb + 2 * mlb && 2 * sb + 2 * mlb <= eta_p);
    let nu = sb + s + ml + mlb + tb.saturating_sub(sb) + t.saturating_sub(s);
    assert_eq!(nu, 4);
    assert_eq!(nu, mu.loads[1]);
}

#[test]
fn truncated_flow_breaks_the_heavy_bound() {
    // η = 4: f0 serves two clients, both on ℓ0. The maximal flow saturates f0.
    let inst = line(&[1.0, 2.0], &[0.0, 4.0], 1, 4);
    let opt = sol(&inst, &[0], &[0, 0]);
    let local = sol(&inst, &[1], &[1, 1]);
    let net = build_phi(&inst, &opt, &local).unwrap();

    let full = max_demand_flow(&net).unwrap();
    let m = round_matching(&net, &full);
    let seqs = build_sequences(&net, &full, &m);
    assert!(heavy_unmatched_bound_check(&net, &m, &seqs).is_empty());

    let cut = DemandFlow::from_units(&net, vec![2, 0]);
    assert!(cut.is_feasible(&net));
    let m = round_matching(&net, &cut);
    assert!(m.edges.is_empty());
    let seqs = build_sequences(&net, &cut, &m);
    let v = heavy_unmatched_bound_check(&net, &m, &seqs);
    assert_eq!(v, vec![HeavyViolation { facility: 0, count: 2, bound: 1 }]);
}

#[test]
fn identical_solutions_leave_opt_untouched() {
    let (inst, opt, _) = random_case(3, 1.0);
    let st = StructureState::build(&inst, &opt, &opt).unwrap();
    assert!(st.mu.moved.is_empty());
    assert_eq!(st.mu.solution.assignment, st.net.opt.assignment);
}

#[test]
fn random_instances_pass_every_check() {
    for seed in 0..60 {
        for p in [1.0, 2.0] {
            let (inst, opt, local) = random_case(seed, p);
            let st = StructureState::build(&inst, &opt, &local).unwrap();
            let bad: Vec<_> = st.checks().into_iter().filter(|c| !c.pass).collect();
            assert!(bad.is_empty(), "seed {seed} p {p}: {bad:?}");
        }
    }
}

#[test]
fn no_selection_keeps_opt() {
    let (inst, opt, local) = random_case(11, 1.0);
    let st = StructureState::build(&inst, &opt, &local).unwrap();
    let g = sample_g_star(&st.net, &st.seqs, &st.partition, 0.0, 5);
    assert!(g.selected.is_empty());
    assert_eq!(g.solution.assignment, st.net.opt.assignment);
    let s = sample_swap(&st.net, &st.partition, &g.solution, 0.0, 5);
    assert_eq!(s.solution, g.solution);
}

#[test]
fn closing_every_pair_respects_the_per_client_bound() {
    let mut seen = 0;
    for seed in 0..200 {
        let (inst, opt, local) = random_case(seed, 1.0);
        let st = StructureState::build(&inst, &opt, &local).unwrap();
        if st.partition.pairs.is_empty() {
            continue;
        }
        seen += 1;
        let net = &st.net;
        let g = sample_g_star(net, &st.seqs, &st.partition, 1.0, 0);
        assert_eq!(g.selected.len(), st.partition.pairs.len());
        assert!(verify_solution(&net.inst, &g.solution).is_ok(), "seed {seed}");
        for &(f, _, l) in &st.partition.pairs {
            for e in net.edges.iter().filter(|e| e.a == f) {
                let routed = st.seqs.of_edge(e.client).is_some_and(|s| s.is_route_to_matched());
                if e.deleted || routed {
                    continue;
                }
                let c = e.client;
                let lf = net.b_fac[l];
                let bound = 2.0 * net.inst.client_dist(c, lf) + net.inst.client_dist(c, net.a_fac[f]);
                assert!(net.inst.client_dist(c, g.solution.assignment[c]) <= bound + 1e-9, "seed {seed}");
            }
        }
    }
    assert!(seen > 0);
}

#[test]
fn single_swap_without_overflow() {
    // f0 at 1 and ℓ at 3 both serve the clients at 0 and 2; η = 4.
    let inst = line(&[0.0, 2.0], &[1.0, 3.0], 1, 4);
    let opt = sol(&inst, &[0], &[0, 0]);
    let local = sol(&inst, &[1], &[1, 1]);
    let st = StructureState::build(&inst, &opt, &local).unwrap();
    assert_eq!(st.partition.phi, vec![(0, 0)]);
    let g = sample_g_star(&st.net, &st.seqs, &st.partition, 0.3, 1);
    let s = sample_swap(&st.net, &st.partition, &g.solution, 1.0, 1);
    assert_eq!(s.swapped, vec![(0, 0)]);
    assert_eq!(s.displaced, 0);
    assert!((s.solution.cost - g.solution.cost - 2.0).abs() < 1e-12);
}

#[test]
fn samplers_are_reproducible() {
    let (inst, opt, local) = random_case(21, 1.0);
    let st = StructureState::build(&inst, &opt, &local).unwrap();
    let a = sample_g_star(&st.net, &st.seqs, &st.partition, 0.5, 9);
    let b = sample_g_star(&st.net, &st.seqs, &st.partition, 0.5, 9);
    assert_eq!(a, b);
    assert_eq!(
        sample_swap(&st.net, &st.partition, &a.solution, 0.5, 4),
        sample_swap(&st.net, &st.partition, &a.solution, 0.5, 4)
    );
}

#[test]
fn report_on_a_random_case() {
    let (inst, opt, local) = random_case(2, 1.0);
    let st = StructureState::build(&inst, &opt, &local).unwrap();
    let rep = verify_structure(&st, SampleParams { samples: 50, ..Default::default() }, "exact");
    assert!(rep.all_pass(), "{:?}", rep.failures());
    assert!(serde_json::to_string(&rep).unwrap().contains("path-length-sum"));
}
