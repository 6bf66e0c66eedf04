use std::fs;
use std::sync::Arc;

use crossdiff::cli::{run, EXIT_ERROR, EXIT_OK, EXIT_VIOLATION};
use crossdiff::coefficients::{regularize, CoefficientSet, PowerLawCoefficients};
use crossdiff::config::{RunConfig, U0Kind};
use crossdiff::diagnostics::{ode_compare, weak_residual, TestFunction};
use crossdiff::output::{series_csv, SERIES_HEADER};
use crossdiff::spatial::SpatialSpace;
use crossdiff::stepper::{Problem, SolveConfig, Trajectory};
use crossdiff::study::convergence_study;

fn problem(p: PowerLawCoefficients, n: usize, t: f64, steps: usize, eps: f64) -> Problem {
    let reg = Arc::new(regularize(&CoefficientSet::PowerLaw(p), eps).unwrap());
    let space = Arc::new(SpatialSpace::new_1d(1.0, n).unwrap());
    Problem::new(SolveConfig::new(t, steps, eps), space, reg).unwrap()
}

fn competition() -> PowerLawCoefficients {
    let mut p = PowerLawCoefficients::sqrt_cross();
    p.r = [1.0, 1.0];
    p.s = [[0.0, 1.0], [1.0, 0.0]];
    p.sigma = [[1.0, 1.0], [1.0, 1.0]];
    p
}

#[test]
fn weak_residual_of_a_stationary_state() {
    let pb = problem(PowerLawCoefficients::sqrt_cross(), 6, 0.2, 5, 1e-3);
    let nq = pb.space().num_nodes();
    let traj = pb.run_trajectory([vec![1.0; nq], vec![1.0; nq]]).unwrap();
    for tf in TestFunction::standard_family() {
        let r = weak_residual(&pb, &traj, &tf).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "{tf:?}: {r:?}");
    }
}

#[test]
fn weak_residual_of_a_constant_reaction_run_is_order_tau() {
    let tf = TestFunction::new(vec![1.0, -1.0], 0).unwrap();
    let defect = |steps: usize| {
        let pb = problem(competition(), 4, 0.5, steps, 1e-8);
        let nq = pb.space().num_nodes();
        let traj = pb.run_trajectory([vec![0.3; nq], vec![0.6; nq]]).unwrap();
        let r = weak_residual(&pb, &traj, &tf).unwrap();
        r[0].abs().max(r[1].abs())
    };
    let (a, b) = (defect(20), defect(40));
    assert!(a > 0.0 && b < 0.6 * a, "{a} {b}");
}

#[test]
fn test_function_must_vanish_at_final_time() {
    assert!(TestFunction::new(vec![1.0, -0.5], 0).is_err());
    assert!(TestFunction::new(vec![1.0, -2.0, 1.0], 3).is_ok());
    let pb = problem(PowerLawCoefficients::sqrt_cross(), 4, 0.1, 2, 1e-3);
    let nq = pb.space().num_nodes();
    let traj = pb.run_trajectory([vec![1.0; nq], vec![1.0; nq]]).unwrap();
    let outside = TestFunction::new(vec![1.0, -1.0], 4).unwrap();
    assert!(weak_residual(&pb, &traj, &outside).is_err());
}

#[test]
fn ode_compare_without_reactions() {
    let pb = problem(PowerLawCoefficients::sqrt_cross(), 4, 0.5, 10, 1e-8);
    let c = ode_compare(&pb, [0.4, 1.7]).unwrap();
    assert!(c.max_rel_dev < 1e-6, "{c:?}");
    assert!(c.spatial_spread < 1e-12);
    assert_eq!(c.final_reference, [0.4, 1.7]);
    assert!(ode_compare(&pb, [0.0, 1.0]).is_err());
}

#[test]
fn ode_compare_competition_is_first_order() {
    // frozen from a reference run: max deviation / (τ + ε) stays below this
    const C: f64 = 0.27;
    let mut ratios = Vec::new();
    for (steps, eps) in [(40, 1e-3), (80, 5e-4), (160, 2.5e-4)] {
        let pb = problem(competition(), 4, 1.0, steps, eps);
        let c = ode_compare(&pb, [0.3, 0.6]).unwrap();
        assert!(c.spatial_spread < 1e-12);
        let ratio = c.max_rel_dev / (pb.tau() + eps);
        ratios.push(ratio);
    }
    assert!(ratios.iter().all(|&r| r <= C), "{ratios:?}");
}

#[test]
fn series_csv_rows() {
    let pb = problem(PowerLawCoefficients::sqrt_cross(), 4, 0.1, 2, 1e-3);
    let nq = pb.space().num_nodes();
    let traj = pb.run_trajectory([vec![1.0; nq], vec![1.2; nq]]).unwrap();
    let csv = series_csv(&traj);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SERIES_HEADER);
    assert_eq!(lines.len(), 4);
    for (k, l) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), SERIES_HEADER.split(',').count());
        assert_eq!(cols[0], k.to_string());
    }
    let empty = Trajectory { u0: traj.u0.clone(), states: vec![], records: vec![] };
    assert_eq!(series_csv(&empty), format!("{SERIES_HEADER}\n"));
}

#[test]
fn config_round_trip() {
    let cfg = RunConfig {
        r1: 0.75,
        a12: 2.0,
        u0_kind: U0Kind::Random,
        snapshots: Some(vec![0, 3]),
        ..RunConfig::default()
    };
    let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert!(RunConfig::from_toml_str("no_such_key = 1").is_err());
    let partial = RunConfig::from_toml_str("N = 7\nL = 2.0").unwrap();
    assert_eq!((partial.steps, partial.l), (7, 2.0));
}

fn write_config(dir: &std::path::Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let steady = write_config(dir.path(), "steady.toml", "n = 4\nT = 0.1\nN = 2\nu0_kind = \"constant\"\nu0_params = [1.0, 1.0]\n");
    let linear = write_config(dir.path(), "linear.toml", "alpha12 = 1.0\n");
    assert_eq!(run(["crossdiff", "check-assumptions", "--config", &steady]), EXIT_OK);
    assert_eq!(run(["crossdiff", "check-assumptions", "--config", &linear]), EXIT_VIOLATION);
    assert_eq!(run(["crossdiff", "simulate", "--no-such-flag"]), EXIT_ERROR);
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(["crossdiff", "simulate", "--config", missing.to_str().unwrap()]), EXIT_ERROR);

    let out = dir.path().join("run");
    assert_eq!(run(["crossdiff", "simulate", "--config", &steady, "--out", out.to_str().unwrap()]), EXIT_OK);
    for f in ["series.csv", "fields.csv", "report.txt", "config.echo"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let rows: Vec<&str> = series.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let entropy: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(entropy, 0.0);
    }
    let echo = RunConfig::load(&out.join("config.echo")).unwrap();
    assert_eq!(echo.steps, 2);
}

#[test]
fn convergence_study_needs_two_levels() {
    let cfg = RunConfig::from_toml_str("n = 4\nT = 0.1\nN = 2\nu0_kind = \"constant\"\nu0_params = [1.0, 1.0]\n").unwrap();
    assert!(convergence_study(&cfg, 1).is_err());
    let table = convergence_study(&cfg, 2).unwrap();
    assert_eq!(table.levels.len(), 2);
    assert!(table.levels[1].tau < table.levels[0].tau);
}
