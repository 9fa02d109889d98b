use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assign::{brute_force_opt, verify_solution, BRUTE_FORCE_LIMIT};

fn tiny(seed: u64) -> Instance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.random_range(2..=8);
    let k: usize = rng.random_range(1..=3);
    let eta = n.div_ceil(k) + rng.random_range(0..=1);
    let m = rng.random_range(k..=5);
    let mut pt = || [rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)];
    let clients: Vec<[f64; 2]> = (0..n).map(|_| pt()).collect();
    let facilities: Vec<[f64; 2]> = (0..m).map(|_| pt()).collect();
    Instance::plane(&clients, &facilities, k, eta, 1.0).unwrap()
}

fn cfg() -> RunConfig {
    let mut c = RunConfig::new(Mode::Qptas, 0.5, 0);
    c.max_portals = Some(4);
    c.max_counts = None;
    c.max_cells = None;
    c
}

#[test]
fn baseline_finds_zero_cost_placement() {
    let pts = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let clients = [pts[0], pts[0], pts[1], pts[2]];
    let inst = Instance::plane(&clients, &pts, 3, 2, 1.0).unwrap();
    let (sol, _) = baseline_solution(&inst, &cfg(), 0).unwrap();
    assert_eq!(sol.cost, 0.0);
}

#[test]
fn baseline_is_feasible_and_above_the_optimum() {
    let mut worst: f64 = 1.0;
    for seed in 0..50 {
        let inst = tiny(seed);
        let (sol, _) = baseline_solution(&inst, &cfg(), seed).unwrap();
        assert!(verify_solution(&inst, &sol).is_ok(), "seed {seed}");
        let opt = brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap();
        assert!(sol.cost >= opt.cost - 1e-9);
        if opt.cost > 0.0 {
            worst = worst.max(sol.cost / opt.cost);
        }
    }
    println!("baseline worst ratio {worst:.3}");
}

#[test]
fn improvement_never_loses_to_the_incumbent() {
    for seed in 0..20 {
        let inst = tiny(seed);
        let opt = brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap();
        let (out, _) = improve_once(&inst, &opt, &cfg(), seed, Mode::Qptas).unwrap();
        assert!((out.cost - opt.cost).abs() < 1e-9, "optimal incumbent is kept");
        let (base, _) = baseline_solution(&inst, &cfg(), seed).unwrap();
        for mode in [Mode::Qptas, Mode::Ptas] {
            let (out, _) = improve_once(&inst, &base, &cfg(), seed, mode).unwrap();
            assert!(out.cost <= base.cost + 1e-12);
            assert!(verify_solution(&inst, &out).is_ok());
        }
    }
}

#[test]
fn single_repeat_boost_matches_one_attempt() {
    let inst = tiny(4);
    let (base, _) = baseline_solution(&inst, &cfg(), 4).unwrap();
    let (a, _) = improve_once(&inst, &base, &cfg(), 9, Mode::Qptas).unwrap();
    let (b, attempts) = boost(&inst, &base, &cfg(), 1, 9, Mode::Qptas).unwrap();
    assert_eq!(a, b);
    assert_eq!(attempts.len(), 1);
    let (c, _) = boost(&inst, &base, &cfg(), 4, 9, Mode::Qptas).unwrap();
    assert!(c.cost <= b.cost);
}

#[test]
fn bootstrap_costs_never_increase() {
    for seed in 0..10 {
        let inst = tiny(seed);
        let (sol, report) = bootstrap(&inst, &cfg(), seed, Mode::Qptas).unwrap();
        let seq = report.cost_sequence();
        assert!(seq.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{seq:?}");
        assert_eq!(report.final_cost, sol.cost);
        assert!(report.verified);
    }
}

#[test]
fn optimal_baseline_is_a_one_round_fixed_point() {
    let pts = [[0.0, 0.0], [10.0, 0.0]];
    let inst = Instance::plane(&[pts[0], pts[1]], &pts, 2, 1, 1.0).unwrap();
    let mut c = cfg();
    c.rounds = Some(5);
    let (sol, report) = bootstrap(&inst, &c, 0, Mode::Qptas).unwrap();
    assert_eq!(sol.cost, 0.0);
    assert_eq!(report.rounds.len(), 1);
}

#[test]
fn default_repeat_and_round_counts() {
    let c = RunConfig::new(Mode::Qptas, 0.3, 0);
    assert_eq!(c.repeats(10), 4);
    assert_eq!(c.round_count(10), 2);
    assert_eq!(c.round_count(2), 1);
    assert_eq!(c.round_count(1 << 16), 4);
}

#[test]
fn config_validation() {
    assert!(RunConfig::new(Mode::Qptas, 0.5, 0).validate().is_ok());
    assert!(RunConfig::new(Mode::Qptas, 0.7, 0).validate().is_err());
    let mut c = RunConfig::new(Mode::Qptas, 0.3, 0);
    c.rounds = Some(0);
    assert!(c.validate().is_err());
}

mod cli {
    use super::*;
    use std::fs;

    fn run(args: &[&str]) -> i32 {
        let mut argv = vec!["capclust"];
        argv.extend_from_slice(args);
        run_cli(argv)
    }

    #[test]
    fn bad_flags_exit_64() {
        assert_eq!(run(&["solve", "--mode", "nonsense"]), 64);
        assert_eq!(run(&["frobnicate"]), 64);
    }

    #[test]
    fn solve_is_deterministic_and_writes_a_report() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.json");
        tiny(3).save(&input).unwrap();
        let mut outputs = Vec::new();
        for tag in ["a", "b"] {
            let out = dir.path().join(format!("{tag}.json"));
            let code = run(&[
                "solve", "--mode", "qptas", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap(),
                "--seed", "7", "--eps", "0.5", "--max-portals", "4",
            ]);
            assert_eq!(code, 0);
            assert!(dir.path().join(format!("{tag}.json.report.json")).exists());
            outputs.push(fs::read(&out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn exact_mode_matches_the_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.json");
        let inst = tiny(5);
        inst.save(&input).unwrap();
        let out = dir.path().join("out.json");
        assert_eq!(run(&["solve", "--mode", "exact", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
        let sol: Solution<f64> = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
        let opt = brute_force_opt(&inst, BRUTE_FORCE_LIMIT).unwrap();
        assert!((sol.cost - opt.cost).abs() < 1e-9);
    }

    #[test]
    fn infeasible_input_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.json");
        fs::write(&input, r#"{"p":1,"k":1,"eta":1,"clients":[[0,0],[1,1]],"facilities":[[0,0]]}"#).unwrap();
        assert_eq!(run(&["solve", "--mode", "baseline", "--in", input.to_str().unwrap()]), 2);
    }

    #[test]
    fn verify_structure_passes_on_a_tiny_instance() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.json");
        let clients = [[0.0, 0.0], [1.0, 0.0], [9.0, 0.0], [10.0, 1.0], [5.0, 5.0]];
        let facilities = [[0.0, 1.0], [10.0, 0.0], [5.0, 4.0], [2.0, 2.0]];
        Instance::plane(&clients, &facilities, 3, 2, 1.0).unwrap().save(&input).unwrap();
        let out = dir.path().join("report.json");
        let code = run(&[
            "solve", "--mode", "verify-structure", "--in", input.to_str().unwrap(), "--seed", "7",
            "--out", out.to_str().unwrap(),
        ]);
        let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
        assert_eq!(code, 0, "{report:#}");
        assert_eq!(report["opt_label"], "exact");
        assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    }
}
