//! Benchmark sweep over small generated instances, emitted as CSV.

use std::fmt::Write as _;
use std::time::Instant;

use super::{baseline_solution, bootstrap, DriverError, Mode, RunConfig};
use crate::assign::{brute_force_opt, BRUTE_FORCE_LIMIT};
use crate::generate::{generate_instance, GenParams, Kind};
use crate::instance::Instance;

pub const HEADER: &str =
    "n,m,k,eta,eps,p,seed,oracle,baseline,qptas,ptas,ms_baseline,ms_qptas,ms_ptas,heuristic_qptas,heuristic_ptas";

/// Points of the sweep: `(n, k, eta, eps)`.
pub fn grid(eps: f64) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for n in [6usize, 8, 10, 12] {
        for k in [2, 3] {
            let eta = n.div_ceil(k) + 1;
            for e in [eps, eps / 2.0] {
                out.push((n, k, eta, e));
            }
        }
    }
    out
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the grid with the caps and seed of `cfg`.
pub fn run(cfg: &RunConfig, p: f64) -> Result<String, DriverError> {
    let mut csv = String::from(HEADER);
    csv.push('\n');
    for (i, (n, k, eta, eps)) in grid(cfg.eps).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let g = GenParams { kind: Kind::UniformSquare, n, m: k + 3, k, eta, p, seed };
        let inst: Instance<f64> = generate_instance(&g)?;
        let run_cfg = RunConfig { eps, ..cfg.clone() };
        let oracle = brute_force_opt(&inst, BRUTE_FORCE_LIMIT).ok().map(|s| s.cost);
        let t = Instant::now();
        let (base, _) = baseline_solution(&inst, &run_cfg, seed)?;
        let t_base = ms(t);
        let t = Instant::now();
        let (q, q_rep) = bootstrap(&inst, &run_cfg, seed, Mode::Qptas)?;
        let t_q = ms(t);
        let t = Instant::now();
        let (pt, p_rep) = bootstrap(&inst, &run_cfg, seed, Mode::Ptas)?;
        let t_p = ms(t);
        let oracle = oracle.map_or(String::new(), |c| format!("{c:.6}"));
        writeln!(
            csv,
            "{n},{},{k},{eta},{eps},{p},{seed},{oracle},{:.6},{:.6},{:.6},{t_base:.1},{t_q:.1},{t_p:.1},{},{}",
            g.m, base.cost, q.cost, pt.cost, q_rep.heuristic, p_rep.heuristic
        )
        .expect("string write");
    }
    Ok(csv)
}
