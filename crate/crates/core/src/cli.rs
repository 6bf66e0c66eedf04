//! Command-line front end. Exit codes: 0 success, 1 configuration or solver
//! error, 2 invariant or assumption violation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::coefficients::check_assumptions_h;
use crate::config::RunConfig;
use crate::diagnostics::{check_trajectory, ode_compare, InvariantReport, CHECK_CUMULATIVE, CHECK_ENTROPY_DECAY, CHECK_ENTROPY_STEP};
use crate::duality::{duality_norm, trajectory_chains};
use crate::error::{Error, Result};
use crate::output::emit_outputs;
use crate::study::convergence_study;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crossdiff", version, about = "Two-species cross-diffusion solver with entropy and duality diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (flat TOML key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for run files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a trajectory, check invariants and write run files
    Simulate,
    /// Validate the coefficient assumptions
    CheckAssumptions,
    /// Run a trajectory and report the entropy estimates
    VerifyEntropy,
    /// Run a trajectory and verify it with the backward dual chains
    VerifyDuality,
    /// Refine (tau, eps, n) over `study_levels` levels
    ConvergenceStudy,
    /// Compare a spatially constant run with an RK4 reference
    OdeCompare,
}

enum Outcome {
    Ok,
    Violation,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn status(ok: bool) -> Outcome {
    if ok {
        Outcome::Ok
    } else {
        Outcome::Violation
    }
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from))
}

fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let problem = cfg.build_problem()?;
    let u0 = cfg.initial_data(problem.space())?;
    let traj = problem.run_trajectory(u0).map_err(|f| f.error)?;
    let report = if cfg.check_invariants {
        check_trajectory(&problem, &traj)
    } else {
        InvariantReport::default()
    };
    let assumptions = check_assumptions_h(problem.regularized().base());
    let text = format!("{report}\n{assumptions}");
    if let Some(dir) = out {
        emit_outputs(cfg, problem.space(), &traj, &text, dir)?;
    }
    print!("{report}");
    if let Some(r) = traj.records.last() {
        println!("final entropy {:.10e}, masses {:.10e} {:.10e}", r.entropy, r.mass[0], r.mass[1]);
    }
    Ok(status(report.all_passed()))
}

fn verify_entropy(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.build_problem()?;
    let u0 = cfg.initial_data(problem.space())?;
    let traj = problem.run_trajectory(u0).map_err(|f| f.error)?;
    let report = check_trajectory(&problem, &traj);
    let rc = problem.reaction_constant();
    println!("K = {:.6e} (constant part {:.6e}, entropy parts {:.6e} {:.6e})", rc.k, rc.constant_part, rc.entropy_parts[0], rc.entropy_parts[1]);
    println!("K_T = {:.6e}", problem.k_t());
    let mut ok = true;
    for name in [CHECK_ENTROPY_STEP, CHECK_ENTROPY_DECAY, CHECK_CUMULATIVE] {
        if let Some(c) = report.get(name) {
            println!("{:?} {}: {}", c.status, c.name, c.detail);
            ok &= c.status != crate::diagnostics::CheckStatus::Fail;
        }
    }
    Ok(status(ok))
}

fn verify_duality(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.build_problem()?;
    let u0 = cfg.initial_data(problem.space())?;
    let traj = problem.run_trajectory(u0).map_err(|f| f.error)?;
    let grid = Arc::new(cfg.fd_grid()?);
    let chains = trajectory_chains(&problem, &traj, grid)?;
    let mut ok = true;
    for (i, chain) in chains.iter().enumerate() {
        let b = chain.check_dual_bounds();
        let l = chain.check_dual_linf();
        let nonneg = b.min_phi >= -1e-12;
        ok &= nonneg && b.all_hold();
        println!("species {}: min phi {:.3e} ({})", i + 1, b.min_phi, if nonneg { "pass" } else { "FAIL" });
        for (name, c) in [("gradient", b.bound1), ("weighted laplacian", b.bound2), ("H1", b.bound3)] {
            println!(
                "  {name} bound: {:.6e} <= {:.6e} ({})",
                c.lhs,
                c.rhs,
                if c.holds { "pass" } else { "FAIL" }
            );
        }
        println!(
            "  max |phi| {:.6e}, max |lap phi| {:.6e}, ratios {:.6e} {:.6e}",
            l.phi_inf, l.lap_inf, l.phi_ratio, l.lap_ratio
        );
    }
    let d = duality_norm(&problem, &traj);
    println!("duality norms {:.10e} {:.10e}", d[0], d[1]);
    Ok(status(ok))
}

fn study(cfg: &RunConfig) -> Result<Outcome> {
    let table = convergence_study(cfg, cfg.study_levels)?;
    print!("{table}");
    let band = table.duality_band();
    let trend = table.duality_trend();
    let ratio = table.weak_min_ratio();
    println!("duality band {:.4} {:.4}, trend {:.4} {:.4}", band[0], band[1], trend[0], trend[1]);
    println!("smallest weak defect reduction per level {ratio:.4}");
    let ok = table.levels.iter().all(|l| l.invariants_passed)
        && band.iter().all(|&b| b <= 0.2)
        && trend.iter().all(|&t| t <= 0.2);
    Ok(status(ok))
}

fn ode(cfg: &RunConfig) -> Result<Outcome> {
    let u0 = cfg
        .constant_u0()
        .ok_or_else(|| Error::Config("ode-compare needs u0_kind = \"constant\"".into()))?;
    let problem = cfg.build_problem()?;
    let c = ode_compare(&problem, u0)?;
    println!(
        "max relative deviation {:.6e}; final scheme {:.12e} {:.12e}; reference {:.12e} {:.12e}",
        c.max_rel_dev, c.final_scheme[0], c.final_scheme[1], c.final_reference[0], c.final_reference[1]
    );
    Ok(Outcome::Ok)
}

fn check(cfg: &RunConfig) -> Outcome {
    let rep = check_assumptions_h(&cfg.coefficients());
    print!("{rep}");
    status(rep.all_pass())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = load(&cli).and_then(|cfg| match cli.command {
        Command::Simulate => simulate(&cfg, out_dir(&cli, &cfg).as_deref()),
        Command::CheckAssumptions => Ok(check(&cfg)),
        Command::VerifyEntropy => verify_entropy(&cfg),
        Command::VerifyDuality => verify_duality(&cfg),
        Command::ConvergenceStudy => study(&cfg),
        Command::OdeCompare => ode(&cfg),
    });
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Violation) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
