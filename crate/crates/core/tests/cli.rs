use std::path::Path;
use std::process::{Command, Output};

use capclust::assign::verify_solution;
use capclust::driver::bench::{grid, HEADER};
use capclust::instance::{Instance, Solution};

fn capclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capclust")).args(args).output().expect("binary runs")
}

fn generate(dir: &Path, n: usize, k: usize, eta: usize, seed: u64) -> String {
    let path = dir.join(format!("inst-{seed}.json"));
    let out = path.to_str().unwrap().to_string();
    let (n, k, eta, seed) = (n.to_string(), k.to_string(), eta.to_string(), seed.to_string());
    let status = capclust(&["generate", "--n", &n, "--m", "5", "--k", &k, "--eta", &eta, "--seed", &seed, "--out", &out]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out
}

#[test]
fn every_solve_mode_emits_a_feasible_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate(dir.path(), 7, 3, 3, 11);
    let inst = Instance::<f64>::load(&input).unwrap();
    for mode in ["exact", "baseline", "qptas", "ptas"] {
        let out = dir.path().join(format!("{mode}.json"));
        let out = out.to_str().unwrap();
        let run = capclust(&["solve", "--mode", mode, "--in", &input, "--out", out, "--seed", "3"]);
        assert!(run.status.success(), "{mode}: {}", String::from_utf8_lossy(&run.stderr));
        let sol: Solution<f64> = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        assert!(verify_solution(&inst, &sol).is_ok(), "{mode}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(format!("{out}.report.json")).unwrap()).unwrap();
        assert_eq!(report["final_cost"].as_f64().unwrap(), sol.cost, "{mode}");
    }
}

#[test]
fn exact_mode_is_never_beaten() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let input = generate(dir.path(), 6, 2, 4, seed);
        let cost = |mode: &str| {
            let run = capclust(&["solve", "--mode", mode, "--in", &input, "--seed", "1"]);
            assert!(run.status.success());
            serde_json::from_slice::<Solution<f64>>(&run.stdout).unwrap().cost
        };
        let exact = cost("exact");
        for mode in ["baseline", "qptas", "ptas"] {
            assert!(cost(mode) >= exact - 1e-9, "seed {seed} {mode}");
        }
    }
}

#[test]
fn bench_writes_one_row_per_grid_point() {
    let run = capclust(&["solve", "--mode", "bench", "--eps", "0.5", "--boost", "1", "--rounds", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), grid(0.5).len() + 1);
    let width = HEADER.split(',').count();
    assert!(lines[1..].iter().all(|l| l.split(',').count() == width));
}

#[test]
fn plane_only_mode_rejects_matrix_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("matrix.json");
    let path = path.to_str().unwrap();
    let made = capclust(&[
        "generate", "--kind", "matrix-random", "--n", "5", "--m", "4", "--k", "2", "--eta", "3", "--out", path,
    ]);
    assert!(made.status.success());
    let run = capclust(&["solve", "--mode", "ptas", "--in", path]);
    assert_eq!(run.status.code(), Some(1));
    let run = capclust(&["solve", "--mode", "qptas", "--in", path]);
    assert_eq!(run.status.code(), Some(0));
}

#[test]
fn out_of_range_eps_is_a_flag_error() {
    let run = capclust(&["solve", "--mode", "qptas", "--eps", "0.8", "--in", "missing.json"]);
    assert_ne!(run.status.code(), Some(0));
}
