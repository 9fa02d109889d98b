use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::{baseline_run, bench, bootstrap, DriverError, Mode, RunConfig, RunReport};
use crate::assign::{brute_force_opt, BRUTE_FORCE_LIMIT};
use crate::generate::{generate_instance, GenParams, Kind};
use crate::instance::Instance;
use crate::structural::{verify_structure, SampleParams, StructureState};

#[derive(Parser, Debug)]
#[command(name = "capclust", version, about = "Capacitated k-median / k-means approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance file (or sweep the benchmark grid with --mode bench).
    Solve(SolveArgs),
    /// Write a random instance file.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Mode::Qptas)]
    mode: Mode,
    /// Instance JSON.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; the run report goes next to it as `<out>.report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Overrides the exponent stored in the instance.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeats per bootstrap round (default ⌈log₂ n⌉).
    #[arg(long)]
    boost: Option<usize>,
    /// Bootstrap rounds (default max(1, ⌈log₂ log₂ n⌉)).
    #[arg(long)]
    rounds: Option<usize>,
    /// Portals per box; 0 disables the cap.
    #[arg(long, default_value_t = 8)]
    max_portals: usize,
    /// Distinct counts per portal; 0 disables the cap.
    #[arg(long, default_value_t = 12)]
    max_counts: usize,
    /// Cells per box; 0 disables the cap.
    #[arg(long, default_value_t = 1_000_000)]
    max_cells: usize,
    #[arg(long, default_value_t = crate::dp::ALPHA)]
    alpha: f64,
    /// Swap probability parameter (default: eps).
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long, default_value_t = crate::dp::RHO_FLOOR)]
    rho_floor: f64,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value = "uniform-square")]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eta: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cap(v: usize) -> Option<usize> {
    (v > 0).then_some(v)
}

impl SolveArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            mode: self.mode,
            eps: self.eps,
            seed: self.seed,
            boost: self.boost,
            rounds: self.rounds,
            max_portals: cap(self.max_portals),
            max_counts: cap(self.max_counts),
            max_cells: cap(self.max_cells),
            alpha: self.alpha,
            pi: self.pi,
            rho_floor: self.rho_floor,
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 error, 2 infeasible, 64 bad flags.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Generate(args) => generate(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                2
            } else {
                1
            }
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), DriverError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| DriverError::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn report_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}

fn to_json<S: serde::Serialize>(v: &S) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn generate(args: &GenerateArgs) -> Result<i32, DriverError> {
    let g = GenParams { kind: args.kind, n: args.n, m: args.m, k: args.k, eta: args.eta, p: args.p, seed: args.seed };
    let inst: Instance<f64> = generate_instance(&g)?;
    write_out(args.out.as_deref(), &inst.to_json_string())?;
    Ok(0)
}

fn solve(args: &SolveArgs) -> Result<i32, DriverError> {
    let cfg = args.config();
    cfg.validate()?;
    if cfg.mode == Mode::Bench {
        let csv = bench::run(&cfg, args.p.unwrap_or(1.0))?;
        write_out(args.out.as_deref(), &csv)?;
        return Ok(0);
    }
    let path = args.input.as_ref().ok_or_else(|| DriverError::Config("--in is required".into()))?;
    let mut inst = Instance::<f64>::load(path)?;
    if let Some(p) = args.p {
        inst.p = p;
        inst.validate()?;
    }
    if cfg.mode == Mode::VerifyStructure {
        return verify(&inst, &cfg, args.out.as_deref());
    }
    let (sol, report) = match cfg.mode {
        Mode::Exact => {
            let sol = brute_force_opt(&inst, BRUTE_FORCE_LIMIT)?;
            let mut report = RunReport::new(&inst, &cfg);
            report.finish(&inst, &sol);
            (sol, report)
        }
        Mode::Baseline => baseline_run(&inst, &cfg)?,
        mode => bootstrap(&inst, &cfg, cfg.seed, mode)?,
    };
    write_out(args.out.as_deref(), &to_json(&sol))?;
    if let Some(out) = &args.out {
        write_out(Some(&report_path(out)), &to_json(&report))?;
    }
    Ok(0)
}

/// Builds the structural harness against the exact optimum when it is
/// cheap, otherwise against the best solution found, with the baseline as L.
fn verify(inst: &Instance<f64>, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, DriverError> {
    let (opt, label) = match brute_force_opt(inst, BRUTE_FORCE_LIMIT) {
        Ok(sol) => (sol, "exact"),
        Err(_) => (bootstrap(inst, cfg, cfg.seed, Mode::Qptas)?.0, "surrogate"),
    };
    let (local, _) = super::baseline_solution(inst, cfg, cfg.seed)?;
    let state = StructureState::build(inst, &opt, &local)?;
    let params = SampleParams { eps: cfg.eps, pi: cfg.pi(), samples: 200, seed: cfg.seed };
    let report = verify_structure(&state, params, label);
    write_out(out, &to_json(&report))?;
    Ok(if report.all_pass() { 0 } else { 1 })
}
