//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::sync::Arc;

use crossdiff::coefficients::{
    check_assumptions_h, regularize, CoefficientSet, GeneralCoefficients, PowerLawCoefficients, ScalarFn,
    CLAUSE_CROSS_EXPONENT, CLAUSE_CROSS_REACTION, CLAUSE_SELF_REACTION,
};
use crossdiff::config::{RunConfig, U0Kind};
use crossdiff::diagnostics::{check_trajectory, ode_compare, CHECK_CUMULATIVE, CHECK_ENTROPY_DECAY, CHECK_MASS_BALANCE};
use crossdiff::duality::solve_dual_chain;
use crossdiff::entropy::{quadratic_form, EntropyMap};
use crossdiff::spatial::FdGrid;
use crossdiff::stepper::{discrete_gronwall_bound, gronwall_constant_closed, Trajectory};
use crossdiff::study::convergence_study;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Minimum nodal value seen across every trajectory the suite runs.
struct Runs {
    min_u: f64,
    mass_ok: bool,
    mass_detail: Vec<String>,
}

impl Runs {
    fn record(&mut self, name: &str, problem: &crossdiff::stepper::Problem, traj: &Trajectory) {
        let rep = check_trajectory(problem, traj);
        let m = rep.get(CHECK_MASS_BALANCE).expect("mass balance check present");
        self.mass_ok &= m.status == crossdiff::diagnostics::CheckStatus::Pass;
        self.mass_detail.push(format!("{name}: {}", m.detail));
        for r in &traj.records {
            self.min_u = self.min_u.min(r.min_u);
        }
    }
}

fn random_power_law(rng: &mut ChaCha8Rng, cross_alpha: f64) -> PowerLawCoefficients {
    let mut p = PowerLawCoefficients::sqrt_cross();
    for i in 0..2 {
        // d_ii >= 1 is the normalization under which the lower bounds on Q are stated
        p.d[i] = rng.gen_range(1.0..3.0);
        if rng.gen_bool(0.5) {
            p.a[i][i] = rng.gen_range(0.1..2.0);
            p.alpha[i][i] = rng.gen_range(1.0..2.5);
        }
        let j = 1 - i;
        p.a[i][j] = rng.gen_range(0.1..2.0);
        p.alpha[i][j] = cross_alpha;
    }
    p
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo.log10()..hi.log10()))
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0usize;
    let mut samples = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let per_set = 1000;
    let sets_per_case = 100_000 / (3 * 2 * per_set) + 1;
    for &alpha in &[0.3, 0.5, 0.9] {
        for &eps in &[0.0, 1e-3] {
            for _ in 0..sets_per_case {
                let p = random_power_law(&mut rng, alpha);
                let reg = regularize(&CoefficientSet::PowerLaw(p), eps).expect("admissible");
                for _ in 0..per_set {
                    let u = [log_uniform(&mut rng, 1e-3, 1e3), log_uniform(&mut rng, 1e-3, 1e3)];
                    let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
                    let g0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let g1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let qf = quadratic_form(&reg, u, [&g0, &g1]);
                    for b in [qf.bound1, qf.bound2] {
                        let gap = (b - qf.q) / qf.q.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                        worst = worst.max(gap);
                        if gap > 1e-9 {
                            violations += 1;
                        }
                    }
                    samples += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && samples >= 100_000,
        format!("{samples} samples, {violations} violations, worst relative excess {worst:.2e}"),
    )
}

fn general_equivalent(p: &PowerLawCoefficients) -> CoefficientSet {
    let cross = [0, 1].map(|i| ScalarFn::power(p.a[i][1 - i], p.alpha[i][1 - i]));
    let self_rate = [0, 1].map(|i| {
        let (d, a, e) = (p.d[i], p.a[i][i], p.alpha[i][i] - 1.0);
        ScalarFn::new(move |x| d + a * x.powf(e), move |x| a * e * x.powf(e - 1.0))
    });
    CoefficientSet::General(GeneralCoefficients {
        r: p.r,
        cross,
        self_rate,
        s: [
            [ScalarFn::constant(0.0), ScalarFn::constant(0.0)],
            [ScalarFn::constant(0.0), ScalarFn::constant(0.0)],
        ],
    })
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_psi0 = 0.0f64;
    for _ in 0..20 {
        let alpha = rng.gen_range(0.05..0.95);
        let p = random_power_law(&mut rng, alpha);
        let closed = Arc::new(regularize(&CoefficientSet::PowerLaw(p), 0.0).unwrap());
        let general = Arc::new(regularize(&general_equivalent(&p), 0.0).unwrap());
        for i in 0..2 {
            let a1 = p.a[1 - i][i];
            let mc = EntropyMap::new(closed.clone(), i).unwrap();
            let mg = EntropyMap::new(general.clone(), i).unwrap();
            // both routes evaluated off the x = 0 special case, where x^alpha is below rounding
            let vc = mc.psi(1e-300).unwrap();
            let vg = mg.psi(1e-300).unwrap();
            worst_psi0 = worst_psi0.max((vc - a1).abs()).max((vg - a1).abs());
        }
    }

    let mut worst_rt = 0.0f64;
    let mut points = 0;
    for (k, &(alpha, eps)) in [(0.3, 1e-1), (0.5, 1e-2), (0.9, 1e-3), (0.5, 1e-4)].iter().enumerate() {
        let p = random_power_law(&mut ChaCha8Rng::seed_from_u64(20 + k as u64), alpha);
        let reg = Arc::new(regularize(&CoefficientSet::PowerLaw(p), eps).unwrap());
        let maps = EntropyMap::pair(&reg).unwrap();
        for _ in 0..1250 {
            for m in &maps {
                let x = log_uniform(&mut rng, 1e-8, 1e8);
                let y = m.phi(x).unwrap();
                let back = m.phi(m.phi_inverse(y).unwrap()).unwrap();
                worst_rt = worst_rt.max((back - y).abs() / (1.0 + y.abs()));
                points += 1;
            }
        }
    }

    let mut worst_convex = f64::INFINITY;
    for &(alpha, eps) in &[(0.3, 0.0), (0.5, 1e-3), (0.9, 1e-1)] {
        let p = random_power_law(&mut rng, alpha);
        let reg = Arc::new(regularize(&CoefficientSet::PowerLaw(p), eps).unwrap());
        for m in EntropyMap::pair(&reg).unwrap() {
            for k in 0..=400 {
                let x = 10f64.powf(-3.0 + 6.0 * k as f64 / 400.0);
                let h = 0.05 * x;
                let d2 = (m.psi(x + h).unwrap() - 2.0 * m.psi(x).unwrap() + m.psi(x - h).unwrap()) / (h * h);
                worst_convex = worst_convex.min(d2);
            }
        }
    }
    outcome(
        worst_psi0 <= 1e-12 && worst_rt <= 1e-12 && worst_convex >= -1e-9 && points >= 10_000,
        format!(
            "psi(0) error {worst_psi0:.2e}, round trip {worst_rt:.2e} over {points} points, min FD second derivative {worst_convex:.2e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut exceed = 0usize;
    for _ in 0..10_000 {
        let theta = rng.gen_range(0.001..0.9);
        let len = rng.gen_range(1..50);
        let v0 = rng.gen_range(0.0..10.0);
        let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..5.0)).collect();
        let bound = discrete_gronwall_bound(v0, theta, &w).unwrap();
        let mut v = v0;
        for (n, wn) in w.iter().enumerate() {
            // largest admissible value times a random fraction
            v = rng.gen_range(0.0..=1.0) * (v + wn) / (1.0 - theta);
            if v > bound[n + 1] * (1.0 + 1e-12) {
                exceed += 1;
            }
        }
    }
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let theta = rng.gen_range(0.001..0.9);
        let n = rng.gen_range(0..60);
        let (v0, c) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..5.0));
        let general = *discrete_gronwall_bound(v0, theta, &vec![c; n]).unwrap().last().unwrap();
        let closed = gronwall_constant_closed(v0, theta, c, n).unwrap();
        if general > 0.0 {
            worst_rel = worst_rel.max((general - closed).abs() / general);
        }
    }
    outcome(
        exceed == 0 && worst_rel <= 1e-12,
        format!("{exceed} exceedances in 10000 recursions, closed form relative error {worst_rel:.2e}"),
    )
}

fn cross_diffusion_config() -> RunConfig {
    RunConfig {
        eps: 1e-4,
        n: 16,
        steps: 100,
        t: 0.1,
        u0_kind: U0Kind::CosineBump,
        ..Default::default()
    }
}

fn criterion_4_5(runs: &mut Runs) -> (Outcome, f64) {
    let cfg = cross_diffusion_config();
    let problem = cfg.build_problem().unwrap();
    let u0 = cfg.initial_data(problem.space()).unwrap();
    let traj = match problem.run_trajectory(u0) {
        Ok(t) => t,
        Err(f) => return (outcome(false, format!("run failed: {}", f.error)), f64::INFINITY),
    };
    runs.record("cross diffusion", &problem, &traj);
    let rep = check_trajectory(&problem, &traj);
    let decay = rep.get(CHECK_ENTROPY_DECAY).unwrap();
    let cum = rep.get(CHECK_CUMULATIVE).unwrap();
    let pass = |c: &crossdiff::diagnostics::CheckOutcome| c.status == crossdiff::diagnostics::CheckStatus::Pass;
    let strict = traj.records.windows(2).all(|w| w[1].entropy <= w[0].entropy);
    // total discrepancy of the balance with the ε-term accounted
    let tau = problem.tau();
    let eps = cfg.eps;
    let mut total = 0.0f64;
    for i in 0..2 {
        let last = traj.records.last().unwrap();
        let eps_term: f64 = traj.records.iter().skip(1).map(|r| eps * tau * r.w_integral[i]).sum();
        total += (last.mass[i] - traj.records[0].mass[i] + eps_term).abs();
    }
    (
        outcome(
            pass(decay) && pass(cum) && strict,
            format!("monotone without slack: {strict}; {}; {}", decay.detail, cum.detail),
        ),
        total,
    )
}

fn logistic(steps: usize, eps: f64) -> RunConfig {
    RunConfig {
        r1: 1.0,
        s11: 1.0,
        sigma11: 1.0,
        eps,
        n: 4,
        t: 1.0,
        steps,
        u0_kind: U0Kind::Constant,
        u0_params: vec![0.5, 1.0],
        ..Default::default()
    }
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let exact = 1.0 / (1.0 + (-1.0f64).exp());
    let mut errs = Vec::new();
    let mut rk = Vec::new();
    for (steps, eps) in [(200, 1e-6), (400, 2.5e-7)] {
        let cfg = logistic(steps, eps);
        let problem = cfg.build_problem().unwrap();
        let c = match ode_compare(&problem, cfg.constant_u0().unwrap()) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("run failed: {e}")),
        };
        let nq = problem.space().num_nodes();
        let traj = problem.run_trajectory([vec![0.5; nq], vec![1.0; nq]]).unwrap();
        runs.record("logistic", &problem, &traj);
        errs.push((c.final_scheme[0] - exact).abs() / exact);
        rk.push(c.max_rel_dev);
    }
    let ratio = errs[0] / errs[1];
    outcome(
        errs[0] <= 1e-3 && ratio >= 1.8,
        format!(
            "relative error {:.3e} then {:.3e} (ratio {ratio:.3}); max deviation from RK4 {:.3e}, {:.3e}",
            errs[0], errs[1], rk[0], rk[1]
        ),
    )
}

fn smooth_field(rng: &mut ChaCha8Rng, pts: &[Vec<f64>], base: f64, amp: f64) -> Vec<f64> {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0) * amp / 4.0).collect();
    let phase = rng.gen_range(0.0..1.0);
    pts.iter()
        .map(|x| {
            base + c
                .iter()
                .enumerate()
                .map(|(m, a)| a * ((m + 1) as f64 * std::f64::consts::PI * (x[0] + phase)).cos())
                .sum::<f64>()
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let grid = Arc::new(FdGrid::new(&[1.0], &[64]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut min_phi = f64::INFINITY;
    let mut failures = 0usize;
    for _ in 0..1000 {
        let tau = log_uniform(&mut rng, 1e-3, 0.2);
        let r = rng.gen_range(0.0..0.49) / tau.max(1e-12) * rng.gen_range(0.0..1.0f64).min(1.0);
        let r = r.min(0.45 / tau).min(5.0);
        let steps = rng.gen_range(1..=20);
        let pts = grid.points().to_vec();
        let b: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                let amp = rng.gen_range(0.0..5.0);
                smooth_field(&mut rng, &pts, 1.0 + amp, amp).iter().map(|v| v.max(1.0)).collect()
            })
            .collect();
        let f: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                let amp = rng.gen_range(0.0..3.0);
                smooth_field(&mut rng, &pts, amp, amp).iter().map(|v| -v.max(0.0)).collect()
            })
            .collect();
        let chain = solve_dual_chain(grid.clone(), b, f, r, tau).unwrap();
        let rep = chain.check_dual_bounds();
        min_phi = min_phi.min(rep.min_phi);
        if !rep.all_hold() || rep.min_phi < -1e-12 {
            failures += 1;
        }
    }
    let zero = solve_dual_chain(grid.clone(), vec![vec![2.0; 64]; 5], vec![vec![0.0; 64]; 5], 1.0, 0.1).unwrap();
    let zero_ok = zero.phi.iter().flatten().all(|&v| v == 0.0);
    outcome(
        failures == 0 && zero_ok,
        format!("{failures} failing chains of 1000, min phi {min_phi:.3e}, zero data gives zero: {zero_ok}"),
    )
}

pub fn skt_config() -> RunConfig {
    RunConfig {
        r1: 1.0,
        r2: 1.0,
        s11: 1.0,
        s12: 1.0,
        s21: 1.0,
        s22: 1.0,
        eps: 1e-3,
        n: 8,
        t: 0.5,
        steps: 20,
        u0_kind: U0Kind::CosineBump,
        u0_params: vec![1.0, 0.5, 0.5, -0.25],
        ..Default::default()
    }
}

fn criterion_8_9(runs: &mut Runs) -> (Outcome, Outcome) {
    let base = skt_config();
    let table = match convergence_study(&base, 3) {
        Ok(t) => t,
        Err(e) => {
            let o = || outcome(false, format!("study failed: {e}"));
            return (o(), o());
        }
    };
    for l in 0..3 {
        let cfg = base.refined(l, crossdiff::study::N_CAP);
        let problem = cfg.build_problem().unwrap();
        let traj = problem.run_trajectory(cfg.initial_data(problem.space()).unwrap()).unwrap();
        runs.record("competition", &problem, &traj);
    }
    let band = table.duality_band();
    let trend = table.duality_trend();
    let d: Vec<String> = table
        .levels
        .iter()
        .map(|l| format!("({:.6}, {:.6})", l.duality[0], l.duality[1]))
        .collect();
    let c8 = outcome(
        band.iter().all(|&b| b <= 0.2) && trend.iter().all(|&t| t <= 0.2),
        format!("norms {}, band {:.4} {:.4}, trend {:.4} {:.4}", d.join(" "), band[0], band[1], trend[0], trend[1]),
    );
    let ratio = table.weak_min_ratio();
    let count = table.levels[0].weak.len();
    let c9 = outcome(
        ratio >= 1.5 && count == 6,
        format!("{count} test functions, smallest reduction per level {ratio:.3}"),
    );
    (c8, c9)
}

fn criterion_10(runs: &Runs) -> Outcome {
    // admissible: superlinear self diffusion dominating the reaction exponents
    let mut good = PowerLawCoefficients::sqrt_cross();
    good.r = [1.0, 1.0];
    good.a[0][0] = 1.0;
    good.a[1][1] = 1.0;
    good.alpha = [[2.0, 0.5], [0.3, 2.0]];
    good.s = [[1.0, 1.0], [1.0, 1.0]];
    good.sigma = [[1.5, 1.0], [1.0, 1.5]];
    let accepted = check_assumptions_h(&CoefficientSet::PowerLaw(good)).all_pass();

    let mut lim = good;
    lim.alpha[0][1] = 1.0;
    let rep = check_assumptions_h(&CoefficientSet::PowerLaw(lim));
    let rejects_alpha = rep.clause(CLAUSE_CROSS_EXPONENT).any(|c| c.status.failed());

    let mut self_bad = good;
    self_bad.sigma[0][0] = 2.0;
    let rejects_self = check_assumptions_h(&CoefficientSet::PowerLaw(self_bad))
        .clause(CLAUSE_SELF_REACTION)
        .any(|c| c.status.failed());

    let mut cross_bad = good;
    cross_bad.sigma[0][1] = 2.0;
    let rejects_cross = check_assumptions_h(&CoefficientSet::PowerLaw(cross_bad))
        .clause(CLAUSE_CROSS_REACTION)
        .any(|c| c.status.failed());

    outcome(
        runs.min_u > 0.0 && accepted && rejects_alpha && rejects_self && rejects_cross,
        format!(
            "min u over runs {:.3e}; admissible accepted {accepted}; rejected: cross exponent {rejects_alpha}, self reaction {rejects_self}, cross reaction {rejects_cross}",
            runs.min_u
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    let cfg = RunConfig {
        u0_kind: U0Kind::Random,
        u0_params: vec![1.0, 0.6, 1.0, 0.6],
        steps: 20,
        t: 0.05,
        n: 12,
        ..Default::default()
    };
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let code = crossdiff::cli::run([
            "crossdiff",
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            return outcome(false, format!("simulate exited with {code}"));
        }
        bytes.push(std::fs::read(out.join("series.csv")).unwrap());
    }
    outcome(
        bytes[0] == bytes[1] && !bytes[0].is_empty(),
        format!("{} bytes, identical: {}", bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn main() {
    let mut runs = Runs {
        min_u: f64::INFINITY,
        mass_ok: true,
        mass_detail: Vec::new(),
    };
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "quadratic form lower bounds", criterion_1()));
    results.push((2, "entropy map identities", criterion_2()));
    results.push((3, "discrete Gronwall bound", criterion_3()));
    let (c4, total_disc) = criterion_4_5(&mut runs);
    results.push((4, "pure cross-diffusion entropy decay", c4));
    let c6 = criterion_6(&mut runs);
    results.push((7, "dual chain sign and bounds", criterion_7()));
    let (c8, c9) = criterion_8_9(&mut runs);
    let c5 = outcome(
        runs.mass_ok && total_disc <= 1e-9,
        format!("reaction-free total discrepancy {total_disc:.3e}; {}", runs.mass_detail.join("; ")),
    );
    results.push((5, "mass balance", c5));
    results.push((6, "logistic ODE oracle", c6));
    results.push((8, "duality norm uniformity", c8));
    results.push((9, "weak formulation residual", c9));
    results.push((10, "positivity and assumption validator", criterion_10(&runs)));
    results.push((11, "determinism", criterion_11()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n:>2} {}: {name} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
