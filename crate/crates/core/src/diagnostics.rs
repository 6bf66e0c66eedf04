//! Per-step records, trajectory invariant checks, the weak-formulation defect and
//! the constant-state ODE reference.

use std::fmt;

use serde::Serialize;

use crate::coefficients::CoefficientSet;
use crate::entropy::{entropy_functional, quadratic_form};
use crate::error::{invalid, Result};
use crate::stepper::{Problem, StepSolution, Trajectory};

/// Time integrals over the whole trajectory of the nodal gradient quantities
/// (each entry is `τ Σ_k ∫ ·`, accumulated by the caller).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GradientTerms {
    /// `∫ |∇√a_21^ε(u_1)|²`
    pub sqrt_a21: f64,
    /// `∫ |∇√a_12^ε(u_2)|²`
    pub sqrt_a12: f64,
    /// `∫ |∇√(a_21^ε(u_1) a_12^ε(u_2))|²`
    pub sqrt_prod: f64,
    /// `∫ (a_ji^ε)'(u_i)/u_i |∇u_i|²`
    pub bound1: [f64; 2],
    /// `∫ |(1/u_i)(a_ji^ε)'(u_i)∇u_i|²`
    pub inv_grad: [f64; 2],
    /// `∫ |∇β_{α_i}(u_i)|²` with `α_i = 1 − α_ji`; power-law data only.
    pub beta: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub entropy: f64,
    /// `∫ Q^ε(u^k)(∇w^k)`
    pub dissipation: f64,
    pub mass: [f64; 2],
    pub reaction_neg: [f64; 2],
    pub reaction_pos: [f64; 2],
    pub w_integral: [f64; 2],
    /// `‖w_1‖²_{H¹} + ‖w_2‖²_{H¹}`
    pub w_h1_sq: f64,
    /// `Σ |c|` over both species
    pub coeff_l1: f64,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub grad: GradientTerms,
    pub min_u: f64,
}

impl StepRecord {
    pub fn l1_reaction_neg(&self) -> f64 {
        self.reaction_neg[0] + self.reaction_neg[1]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass[0] + self.mass[1]
    }
}

/// Integrals of the gradient quantities at one step.
fn gradient_terms(problem: &Problem, sol: &StepSolution) -> GradientTerms {
    let reg = problem.regularized();
    let space = problem.space();
    let st = &sol.state;
    let wts = space.weights();
    let exps = reg.base().power_law().map(|p| [p.alpha[1][0], p.alpha[0][1]]);
    let mut g = GradientTerms {
        beta: exps.map(|_| [0.0; 2]),
        ..Default::default()
    };
    for (q, &wq) in wts.iter().enumerate() {
        let u = [st.u[0][q], st.u[1][q]];
        // ∇u_i = (du_i/dw_i) ∇w_i
        let gu: [Vec<f64>; 2] = [0, 1].map(|i| st.gw[i].iter().map(|d| d[q] * st.dudw[i][q]).collect());
        let n = [0, 1].map(|i| gu[i].iter().map(|x| x * x).sum::<f64>());
        let a21 = reg.a(1, 0, u[0]);
        let a12 = reg.a(0, 1, u[1]);
        let a21d = reg.a_d1(1, 0, u[0]);
        let a12d = reg.a_d1(0, 1, u[1]);
        g.sqrt_a21 += wq * a21d * a21d * n[0] / (4.0 * a21);
        g.sqrt_a12 += wq * a12d * a12d * n[1] / (4.0 * a12);
        let mixed: f64 = gu[0]
            .iter()
            .zip(&gu[1])
            .map(|(g1, g2)| {
                let v = a21d * a12 * g1 + a21 * a12d * g2;
                v * v
            })
            .sum();
        g.sqrt_prod += wq * mixed / (4.0 * a21 * a12);
        let ad = [a21d, a12d];
        for i in 0..2 {
            g.bound1[i] += wq * ad[i] / u[i] * n[i];
            g.inv_grad[i] += wq * (ad[i] / u[i]).powi(2) * n[i];
        }
        if let (Some(b), Some(e)) = (g.beta.as_mut(), exps) {
            for i in 0..2 {
                // β = x^{(1−α)/2}, α = 1 − e: |∇β|² = (e/2)² u^{e−2} |∇u|²
                b[i] += wq * 0.25 * e[i] * e[i] * u[i].powf(e[i] - 2.0) * n[i];
            }
        }
    }
    g
}

/// Record for step `k`; with `sol = None` (only for `k = 0`) the initial data
/// `u_prev` is described and the step-dependent columns are zero.
pub fn step_record(problem: &Problem, k: usize, u_prev: &[Vec<f64>; 2], sol: Option<&StepSolution>) -> Result<StepRecord> {
    let space = problem.space();
    let reg = problem.regularized();
    let t = k as f64 * problem.tau();
    let u: &[Vec<f64>; 2] = match sol {
        Some(s) => &s.state.u,
        None if k == 0 => u_prev,
        None => return Err(invalid("step record without a solution requires k = 0")),
    };
    let entropy = entropy_functional(problem.maps(), [&u[0], &u[1]], space)?;
    let nq = space.num_nodes();
    let mut mass = [0.0; 2];
    let mut neg = [0.0; 2];
    let mut pos = [0.0; 2];
    let wts = space.weights();
    for q in 0..nq {
        let uq = [u[0][q], u[1][q]];
        for i in 0..2 {
            mass[i] += wts[q] * uq[i];
            neg[i] += wts[q] * reg.reaction_neg(i, uq);
            pos[i] += wts[q] * reg.reaction_pos(i, uq);
        }
    }
    let min_u = u.iter().flatten().fold(f64::INFINITY, |m, &x| m.min(x));
    let mut rec = StepRecord {
        k,
        t,
        entropy,
        dissipation: 0.0,
        mass,
        reaction_neg: neg,
        reaction_pos: pos,
        w_integral: [0.0; 2],
        w_h1_sq: 0.0,
        coeff_l1: 0.0,
        newton_iters: 0,
        residual_norm: 0.0,
        grad: GradientTerms::default(),
        min_u,
    };
    if let Some(s) = sol {
        let st = &s.state;
        let dim = space.dim();
        let mut diss = 0.0;
        let mut g0 = vec![0.0; dim];
        let mut g1 = vec![0.0; dim];
        for q in 0..nq {
            for d in 0..dim {
                g0[d] = st.gw[0][d][q];
                g1[d] = st.gw[1][d][q];
            }
            diss += wts[q] * quadratic_form(reg, [st.u[0][q], st.u[1][q]], [&g0, &g1]).q;
        }
        rec.dissipation = diss;
        rec.w_integral = [space.integrate(&st.w[0]), space.integrate(&st.w[1])];
        rec.w_h1_sq = space.h1_norm_sq(&s.c);
        rec.coeff_l1 = s.c.iter().map(|x| x.abs()).sum();
        rec.newton_iters = s.report.newton_iters;
        rec.residual_norm = s.report.residual_norm;
        rec.grad = gradient_terms(problem, s);
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Informational quantity, not an assertion.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub checks: Vec<CheckOutcome>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        });
    }

    fn info(&mut self, name: &str, detail: String) {
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            status: CheckStatus::Info,
            detail,
        });
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Info => "INFO",
            };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

pub const CHECK_POSITIVITY: &str = "positivity";
pub const CHECK_NEWTON: &str = "newton convergence";
pub const CHECK_MASS_BALANCE: &str = "mass balance";
pub const CHECK_ENTROPY_STEP: &str = "entropy inequality";
pub const CHECK_ENTROPY_DECAY: &str = "entropy decay";
pub const CHECK_CUMULATIVE: &str = "cumulative entropy bound";
pub const CHECK_SQRT_CHAIN: &str = "square-root gradient chain";
pub const CHECK_BOUND1_CHAIN: &str = "inverse gradient chain";
pub const CHECK_BETA_CHAIN: &str = "beta gradient chain";
pub const CHECK_MASS_BOUND: &str = "mass bound";

fn is_reaction_free(c: &CoefficientSet) -> bool {
    match c {
        CoefficientSet::PowerLaw(p) => p.r == [0.0; 2] && p.s.iter().flatten().all(|&s| s == 0.0),
        CoefficientSet::General(g) => {
            g.r == [0.0; 2]
                && g.s
                    .iter()
                    .flatten()
                    .all(|s| [0.0, 0.5, 1.0, 2.0, 10.0].iter().all(|&x| s.value(x) == 0.0))
        }
    }
}

/// Cumulative sums `τ Σ_{k≤j}` of per-step record columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Cumulative {
    pub dissipation: f64,
    pub eps_w_h1: f64,
    pub grad: GradientTerms,
}

pub fn cumulative(problem: &Problem, traj: &Trajectory) -> Cumulative {
    let tau = problem.tau();
    let eps = problem.config().eps;
    let mut c = Cumulative::default();
    let mut beta = [0.0; 2];
    let mut has_beta = false;
    for r in traj.records.iter().skip(1) {
        c.dissipation += tau * r.dissipation;
        c.eps_w_h1 += tau * eps * r.w_h1_sq;
        c.grad.sqrt_a21 += tau * r.grad.sqrt_a21;
        c.grad.sqrt_a12 += tau * r.grad.sqrt_a12;
        c.grad.sqrt_prod += tau * r.grad.sqrt_prod;
        for i in 0..2 {
            c.grad.bound1[i] += tau * r.grad.bound1[i];
            c.grad.inv_grad[i] += tau * r.grad.inv_grad[i];
        }
        if let Some(b) = r.grad.beta {
            has_beta = true;
            for i in 0..2 {
                beta[i] += tau * b[i];
            }
        }
    }
    c.grad.beta = has_beta.then_some(beta);
    c
}

/// Runs every invariant assertion on a complete trajectory.
pub fn check_trajectory(problem: &Problem, traj: &Trajectory) -> InvariantReport {
    let mut rep = InvariantReport::default();
    let cfg = problem.config();
    let tol = cfg.newton_tol;
    let slack = 10.0 * tol;
    let tau = problem.tau();
    let eps = cfg.eps;
    let mu = problem.space().measure();
    let recs = &traj.records;
    if recs.is_empty() {
        rep.push(CHECK_POSITIVITY, true, "empty trajectory".into());
        return rep;
    }

    let min_u = recs.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min);
    rep.push(CHECK_POSITIVITY, min_u > 0.0, format!("min u = {min_u:.6e}"));

    let worst_res = recs.iter().skip(1).map(|r| r.residual_norm).fold(0.0, f64::max);
    rep.push(
        CHECK_NEWTON,
        worst_res <= tol,
        format!("max final residual {worst_res:.3e} (tolerance {tol:.1e})"),
    );

    // Testing with the constant basis function: the discrepancy is τ√μ times the
    // residual's constant component.
    let mut worst_mass = 0.0f64;
    let mut total_disc = [0.0f64; 2];
    for w in recs.windows(2) {
        let (p, c) = (&w[0], &w[1]);
        for i in 0..2 {
            let d = c.mass[i] - p.mass[i] + eps * tau * c.w_integral[i] + tau * c.reaction_neg[i]
                - tau * c.reaction_pos[i];
            total_disc[i] += d;
            worst_mass = worst_mass.max(d.abs());
        }
    }
    let mass_tol = slack * tau * mu.sqrt();
    rep.push(
        CHECK_MASS_BALANCE,
        worst_mass <= mass_tol,
        format!(
            "max per-step discrepancy {worst_mass:.3e} (allowed {mass_tol:.3e}), total {:.3e}, {:.3e}",
            total_disc[0], total_disc[1]
        ),
    );

    // Σ_m c_m F_m = (E^j − E^{j−1})/τ-type identity: the per-step inequality holds
    // up to |Σ c F| ≤ ‖c‖₁ ‖F‖_∞.
    let k_const = problem.k_const();
    let mut worst_step = f64::NEG_INFINITY;
    for w in recs.windows(2) {
        let (p, c) = (&w[0], &w[1]);
        let lhs = (c.entropy - p.entropy) / tau + c.dissipation + eps * c.w_h1_sq;
        let rhs = k_const * (1.0 + c.entropy) + slack * c.coeff_l1.max(1.0);
        worst_step = worst_step.max(lhs - rhs);
    }
    rep.push(
        CHECK_ENTROPY_STEP,
        recs.len() < 2 || worst_step <= 0.0,
        format!("K = {k_const:.6e}, max(lhs - rhs) = {worst_step:.3e}"),
    );

    if is_reaction_free(problem.regularized().base()) {
        let mut worst = f64::NEG_INFINITY;
        for w in recs.windows(2) {
            let allowed = slack * tau * w[1].coeff_l1.max(1.0);
            worst = worst.max(w[1].entropy - w[0].entropy - allowed);
        }
        rep.push(
            CHECK_ENTROPY_DECAY,
            recs.len() < 2 || worst <= 0.0,
            format!("max(E^k - E^(k-1) - slack) = {worst:.3e}"),
        );
    }

    let e0 = recs[0].entropy;
    let bound = problem.k_t() * (e0 + 1.0);
    let mut run = Cumulative::default();
    let mut worst_cum = f64::NEG_INFINITY;
    let mut worst_val = 0.0f64;
    for r in recs.iter().skip(1) {
        run.dissipation += tau * r.dissipation;
        run.eps_w_h1 += tau * eps * r.w_h1_sq;
        let v = r.entropy + run.dissipation + run.eps_w_h1;
        worst_val = worst_val.max(v);
        worst_cum = worst_cum.max(v - bound - slack * r.coeff_l1.max(1.0));
    }
    let empirical = worst_val / (e0 + 1.0);
    rep.push(
        CHECK_CUMULATIVE,
        worst_cum <= 0.0 || recs.len() < 2,
        format!(
            "K_T = {:.6e}, max lhs = {worst_val:.6e}, bound = {bound:.6e}, empirical constant {empirical:.6e}",
            problem.k_t()
        ),
    );

    let cum = cumulative(problem, traj);
    let qsum = cum.dissipation;
    let rel = 1e-9;
    let abs = slack;
    let quarter = 0.25 * qsum * (1.0 + rel) + abs;
    let g = &cum.grad;
    rep.push(
        CHECK_SQRT_CHAIN,
        g.sqrt_a21 <= quarter && g.sqrt_a12 <= quarter && g.sqrt_prod <= quarter,
        format!(
            "{:.6e}, {:.6e}, {:.6e} vs Q/4 = {:.6e}",
            g.sqrt_a21,
            g.sqrt_a12,
            g.sqrt_prod,
            0.25 * qsum
        ),
    );
    let b1 = g.bound1[0] + g.bound1[1];
    rep.push(
        CHECK_BOUND1_CHAIN,
        b1 <= qsum * (1.0 + rel) + abs,
        format!("{b1:.6e} vs Q = {qsum:.6e}"),
    );
    rep.info(
        "inverse gradient norm",
        format!("{:.6e}, {:.6e}", g.inv_grad[0], g.inv_grad[1]),
    );

    if let (Some(beta), Some(p)) = (g.beta, problem.regularized().base().power_law()) {
        let mut lhs = 0.0;
        for (i, b) in beta.iter().enumerate() {
            let j = 1 - i;
            let a = p.alpha[j][i];
            let c = p.a[j][i] * a;
            // α_i = 1 − α_ji, so 4C/(1 − α_i)² = 4C/α_ji²
            lhs += 4.0 * c / (a * a) * b;
        }
        rep.push(
            CHECK_BETA_CHAIN,
            lhs <= qsum * (1.0 + rel) + abs && qsum <= bound,
            format!("{lhs:.6e} <= Q = {qsum:.6e} <= K_T(E0+1) = {bound:.6e}"),
        );
    }

    let reg = problem.regularized();
    let r = reg.r(0).max(reg.r(1));
    let t = cfg.t_final;
    if tau * r < 1.0 {
        let r_tau = r / (1.0 - tau * r);
        let m0 = recs[0].total_mass();
        let mb = (m0 + eps.sqrt() * (t * mu + bound)) * (r_tau * t).exp();
        let worst = recs.iter().map(|r| r.total_mass()).fold(0.0, f64::max);
        rep.push(
            CHECK_MASS_BOUND,
            worst <= mb * (1.0 + 1e-12),
            format!("max ||u||_1 = {worst:.6e}, bound {mb:.6e}"),
        );
    }

    let steps = traj.states.iter();
    let fallbacks: usize = steps.clone().map(|s| s.report.fallbacks).sum();
    let bisections: usize = steps.map(|s| s.report.bisections).sum();
    rep.info(
        "solver",
        format!("{fallbacks} Jacobian fallbacks, {bisections} sigma bisections"),
    );
    rep
}

/// Polynomial `p(t) = Σ_j coeffs[j] (t/T)^j` with `p(T) = 0`, times the basis
/// function `χ_mode`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub coeffs: Vec<f64>,
    pub mode: usize,
}

impl TestFunction {
    pub fn new(coeffs: Vec<f64>, mode: usize) -> Result<Self> {
        let at_t: f64 = coeffs.iter().sum();
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
        if at_t.abs() > 1e-14 * scale {
            return Err(invalid(format!("test function does not vanish at T (p(T) = {at_t})")));
        }
        Ok(Self { coeffs, mode })
    }

    /// `(1 − s)` and `(1 − s)²` against modes 0, 1, 2.
    pub fn standard_family() -> Vec<TestFunction> {
        let mut out = Vec::new();
        for p in [vec![1.0, -1.0], vec![1.0, -2.0, 1.0]] {
            for m in 0..3 {
                out.push(TestFunction { coeffs: p.clone(), mode: m });
            }
        }
        out
    }

    fn p(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// `∫_a^b p(t) dt` exactly.
    fn integral(&self, a: f64, b: f64, t_final: f64) -> f64 {
        let prim = |s: f64| {
            self.coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, c)| acc * s + c / (j as f64 + 1.0))
                * s
        };
        t_final * (prim(b / t_final) - prim(a / t_final))
    }
}

/// Defect of the limit weak formulation for `θ = p(t) χ_m(x)`:
///
/// `−∫u⁰θ(0) − ∫∫u ∂_tθ − ∫∫Δθ [a_ii(u_i) + u_i a_ij(u_j)] − ∫∫R_i θ`
///
/// with unregularized coefficients and piecewise-constant `u`. Since `Δχ_m =
/// −λ_m χ_m`, the time integrals of `p` and `∂_t p` are exact.
pub fn weak_residual(problem: &Problem, traj: &Trajectory, theta: &TestFunction) -> Result<[f64; 2]> {
    let space = problem.space();
    if theta.mode >= space.n() {
        return Err(invalid(format!("mode {} outside V_n", theta.mode)));
    }
    TestFunction::new(theta.coeffs.clone(), theta.mode)?;
    let base = problem.regularized().base();
    let tau = problem.tau();
    let t_final = problem.config().t_final;
    let lam = space.eigenvalues()[theta.mode];
    let wts = space.weights();
    let vals = space.values();
    let chi = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..space.num_nodes()).map(|q| wts[q] * vals[(theta.mode, q)] * f(q)).sum()
    };
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let j = 1 - i;
        let u0 = traj.u(0);
        let mut acc = -theta.p(0.0) * chi(&|q| u0[i][q]);
        for k in 1..=traj.steps() {
            let u = traj.u(k);
            let (ta, tb) = ((k - 1) as f64 * tau, k as f64 * tau);
            let dp = theta.p(tb / t_final) - theta.p(ta / t_final);
            let pk = theta.integral(ta, tb, t_final);
            let m_u = chi(&|q| u[i][q]);
            let m_g = chi(&|q| {
                let (ui, uj) = (u[i][q], u[j][q]);
                ui * base.self_rate(i, ui) + ui * base.cross(i, uj)
            });
            let m_r = chi(&|q| {
                let (ui, uj) = (u[i][q], u[j][q]);
                ui * (base.r(i) - base.reaction(i, i, ui) - base.reaction(i, j, uj))
            });
            acc += -m_u * dp + lam * pk * m_g - pk * m_r;
        }
        *o = acc;
    }
    Ok(out)
}

/// `u_i' = u_i(r_i − s_ii(u_i) − s_ij(u_j))` by classical RK4 with `steps`
/// uniform steps of size `h`; returns the state after every step.
pub fn rk4_reaction(base: &CoefficientSet, u0: [f64; 2], h: f64, steps: usize) -> Vec<[f64; 2]> {
    let f = |u: [f64; 2]| {
        [0, 1].map(|i| {
            let j = 1 - i;
            u[i] * (base.r(i) - base.reaction(i, i, u[i]) - base.reaction(i, j, u[j]))
        })
    };
    let add = |u: [f64; 2], k: [f64; 2], s: f64| [u[0] + s * k[0], u[1] + s * k[1]];
    let mut u = u0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(add(u, k1, 0.5 * h));
        let k3 = f(add(u, k2, 0.5 * h));
        let k4 = f(add(u, k3, h));
        u = [0, 1].map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        out.push(u);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeComparison {
    /// `max_k max_nodes |u^k − u_ode(kτ)| / |u_ode(kτ)|`
    pub max_rel_dev: f64,
    pub final_scheme: [f64; 2],
    pub final_reference: [f64; 2],
    /// Largest nodal spread `max − min` of any state; zero up to rounding.
    pub spatial_spread: f64,
}

/// Runs `problem` from the constant state `u0` and compares with the RK4
/// reference at step `τ/100`.
pub fn ode_compare(problem: &Problem, u0: [f64; 2]) -> Result<OdeComparison> {
    if u0.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(invalid("ODE comparison needs positive constant initial data"));
    }
    let nq = problem.space().num_nodes();
    let traj = problem
        .run_trajectory([vec![u0[0]; nq], vec![u0[1]; nq]])
        .map_err(|f| f.error)?;
    let sub = 100;
    let h = problem.tau() / sub as f64;
    let reference = rk4_reaction(problem.regularized().base(), u0, h, sub * traj.steps());
    compare_with_reference(&traj, &reference, sub)
}

fn compare_with_reference(traj: &Trajectory, reference: &[[f64; 2]], sub: usize) -> Result<OdeComparison> {
    let mut dev = 0.0f64;
    let mut spread = 0.0f64;
    for k in 1..=traj.steps() {
        let r = reference[k * sub - 1];
        let u = traj.u(k);
        for i in 0..2 {
            let (lo, hi) = u[i]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            spread = spread.max(hi - lo);
            for &x in &u[i] {
                dev = dev.max((x - r[i]).abs() / r[i].abs());
            }
        }
    }
    let last = traj.u(traj.steps());
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Ok(OdeComparison {
        max_rel_dev: dev,
        final_scheme: [mean(&last[0]), mean(&last[1])],
        final_reference: reference.last().copied().unwrap_or([f64::NAN; 2]),
        spatial_spread: spread,
    })
}
