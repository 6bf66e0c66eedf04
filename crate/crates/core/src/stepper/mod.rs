//! Implicit time steps in entropy variables.
//!
//! Step `k` finds `w ∈ V_n²` with, for every basis function `χ` and species `i`,
//!
//! ```text
//! σ[⟨χ,(u_i − u_i^{k−1})/τ⟩ + ⟨∇χ,(A^ε(u)∇w)_i⟩ − ⟨χ,R_i^ε(u)⟩] + ε⟨χ,w_i⟩_{H¹} = 0,
//! u = (φ^ε)^{-1}(w),
//! ```
//!
//! at `σ = 1`, continuing in `σ` from the trivial root `w = 0` at `σ = 0`.

pub mod gronwall;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, RegularizedCoefficients};
use crate::diagnostics::{step_record, StepRecord};
use crate::entropy::{entropy_functional, matrix_a_with_derivatives, EntropyMap};
use crate::error::{invalid, Error, Result};
use crate::spatial::SpatialSpace;

pub use gronwall::{
    discrete_gronwall_bound, gronwall_constant_closed, gronwall_constant_shortcut,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub t_final: f64,
    pub n_steps: usize,
    pub eps: f64,
    pub sigma_schedule: Vec<f64>,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    pub damping: Vec<f64>,
    pub bisection_depth: u32,
    pub u_floor: f64,
}

pub fn uniform_schedule(points: usize) -> Vec<f64> {
    let m = points.max(2) - 1;
    (0..=m).map(|k| k as f64 / m as f64).collect()
}

impl SolveConfig {
    pub fn new(t_final: f64, n_steps: usize, eps: f64) -> Self {
        Self {
            t_final,
            n_steps,
            eps,
            sigma_schedule: uniform_schedule(11),
            newton_max_iter: 50,
            newton_tol: 1e-11,
            damping: (0..10).map(|k| 0.5f64.powi(k)).collect(),
            bisection_depth: 6,
            u_floor: 1e-8,
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) || self.n_steps == 0 {
            return Err(invalid("need T > 0 and N >= 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        let s = &self.sigma_schedule;
        if s.len() < 2 || s[0] != 0.0 || *s.last().unwrap() != 1.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sigma schedule must increase from 0 to 1"));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 || self.damping.is_empty() {
            return Err(invalid("bad Newton settings"));
        }
        if !(self.u_floor > 0.0) {
            return Err(invalid("u_floor must be positive"));
        }
        Ok(())
    }
}

/// Constant `K` with `∫ w·R^ε(u) ≤ K(1 + E_ε(u))`, assembled term by term.
///
/// For species `i` (other species `j`), with `D`, `B` from the entropy maps:
/// * growth: `r_i ∫u_iφ_i^ε(u_i) ≤ r_i D_i(1+ε)(μ + E_i)`, since
///   `xψ^ε' ≤ D(1+ε)(1+ψ^ε)`;
/// * decay: `−∫u_iφ_i^ε γ_ε(s) ≤ (−B_i + ε/e) ∫_{u_i≤1} γ_ε(s_ii(u_i) + s_ij(u_j))`
///   because `xφ^ε ≥ B − ε/e` on `(0,1]` and `xφ^ε ≥ 0` beyond;
///   then `γ_ε(s) ≤ s`, `s_ii(u_i) ≤ s_ii(1)` and, when `σ_ij ≤ 1`,
///   `s_ij(u_j) ≤ S_ij(1 + u_j)` with `u_j ≤ D_j(1+ε)(1 + ψ_j^ε(u_j))`.
///   Otherwise (superlinear or general `s_ij`) the saturation `γ_ε ≤ 1 + 1/ε` is used.
///
/// Collecting the constant and the `E_1`, `E_2` coefficients gives
/// `c_0 μ + c_1 E_1 + c_2 E_2 ≤ max(c_0 μ, c_1, c_2)(1 + E)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionConstant {
    pub k: f64,
    pub constant_part: f64,
    pub entropy_parts: [f64; 2],
    pub saturated: [bool; 2],
}

pub fn reaction_constant(
    reg: &RegularizedCoefficients,
    maps: &[EntropyMap; 2],
    measure: f64,
) -> ReactionConstant {
    let eps = reg.eps();
    let mut c0 = 0.0;
    let mut ce = [0.0; 2];
    let mut saturated = [false; 2];
    for i in 0..2 {
        let j = 1 - i;
        let di = maps[i].d_const() * (1.0 + eps);
        let dj = maps[j].d_const() * (1.0 + eps);
        c0 += reg.r(i) * di * measure;
        ce[i] += reg.r(i) * di;
        let nb = -maps[i].b_const() + eps / std::f64::consts::E;
        let linear_bound = match reg.base() {
            CoefficientSet::PowerLaw(p) => {
                (p.s[i][j] == 0.0 || p.sigma[i][j] <= 1.0).then_some((p.s[i][i], p.s[i][j]))
            }
            CoefficientSet::General(_) => None,
        };
        match linear_bound {
            Some((sii_at_1, sij)) => {
                c0 += nb * (sii_at_1 + sij) * measure + nb * sij * dj * measure;
                ce[j] += nb * sij * dj;
            }
            None => {
                saturated[i] = true;
                let cap = if eps > 0.0 { 1.0 + 1.0 / eps } else { f64::INFINITY };
                c0 += nb * cap * measure;
            }
        }
    }
    ReactionConstant {
        k: c0.max(ce[0]).max(ce[1]),
        constant_part: c0,
        entropy_parts: ce,
        saturated,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Full,
    Picard,
    FiniteDifference,
}

/// Nodal quantities derived from a coefficient vector.
#[derive(Clone, Debug)]
pub struct NodalState {
    pub w: [Vec<f64>; 2],
    /// `gw[i][d][q]`
    pub gw: [Vec<Vec<f64>>; 2],
    pub u: [Vec<f64>; 2],
    /// `du_i/dw_i = u_i / (a_ji^ε)'(u_i)`
    pub dudw: [Vec<f64>; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub sigma_path: Vec<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub fallbacks: usize,
    pub bisections: usize,
}

#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub k: usize,
    /// Galerkin coefficients of `w`, species blocks of length `n`.
    pub c: Vec<f64>,
    pub u: [Vec<f64>; 2],
    pub report: StepReport,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub u0: [Vec<f64>; 2],
    pub states: Vec<TrajectoryState>,
    /// One record per step, `records[0]` describing the initial data.
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// Nodal `u^k` for `k = 0..=N`.
    pub fn u(&self, k: usize) -> &[Vec<f64>; 2] {
        if k == 0 {
            &self.u0
        } else {
            &self.states[k - 1].u
        }
    }

    pub fn steps(&self) -> usize {
        self.states.len()
    }
}

#[derive(Debug)]
pub struct TrajectoryFailure {
    pub partial: Trajectory,
    pub error: Error,
}

pub struct StepSolution {
    pub c: Vec<f64>,
    pub state: NodalState,
    pub report: StepReport,
}

#[derive(Clone, Debug)]
pub struct Problem {
    cfg: SolveConfig,
    space: Arc<SpatialSpace>,
    reg: Arc<RegularizedCoefficients>,
    maps: Arc<[EntropyMap; 2]>,
    reaction: ReactionConstant,
}

struct NewtonOk {
    c: Vec<f64>,
    state: NodalState,
    iters: usize,
    res: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `left · diag(v) · rightᵀ`
fn gram(left: &DMatrix<f64>, v: &[f64], right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = right.clone();
    for (q, &vq) in v.iter().enumerate() {
        scaled.column_mut(q).scale_mut(vq);
    }
    left * scaled.transpose()
}

impl Problem {
    pub fn new(
        cfg: SolveConfig,
        space: Arc<SpatialSpace>,
        reg: Arc<RegularizedCoefficients>,
    ) -> Result<Self> {
        cfg.validate()?;
        if reg.eps() != cfg.eps {
            return Err(invalid(format!(
                "regularization level {} differs from solver eps {}",
                reg.eps(),
                cfg.eps
            )));
        }
        let maps = Arc::new(EntropyMap::pair(&reg)?);
        let reaction = reaction_constant(&reg, &maps, space.measure());
        let tau = cfg.tau();
        if 1.0 - tau * reaction.k < 0.5 {
            return Err(invalid(format!(
                "time step {tau} too large: need 1 - tau*K >= 1/2 with K = {}",
                reaction.k
            )));
        }
        Ok(Self {
            cfg,
            space,
            reg,
            maps,
            reaction,
        })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    pub fn space(&self) -> &SpatialSpace {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<SpatialSpace> {
        &self.space
    }

    pub fn regularized(&self) -> &RegularizedCoefficients {
        &self.reg
    }

    pub fn maps(&self) -> &[EntropyMap; 2] {
        &self.maps
    }

    pub fn tau(&self) -> f64 {
        self.cfg.tau()
    }

    pub fn reaction_constant(&self) -> &ReactionConstant {
        &self.reaction
    }

    /// `K` of the per-step entropy inequality.
    pub fn k_const(&self) -> f64 {
        self.reaction.k
    }

    /// Cumulative constant: summing the per-step inequality with
    /// `E^j ≤ e^{2KT}(E^0 + 1)` (discrete Grönwall with `τK ≤ 1/2`) gives
    /// `E^k + τΣ∫Q + ετΣ‖w‖² ≤ (E^0 + 1)(1 + TK(1 + e^{2KT}))`.
    pub fn k_t(&self) -> f64 {
        let k = self.reaction.k;
        let t = self.cfg.t_final;
        1.0 + t * k * (1.0 + (2.0 * k * t).exp())
    }

    pub fn nodal_state(&self, c: &[f64], guess: Option<&[Vec<f64>; 2]>) -> Result<NodalState> {
        let n = self.space.n();
        let mut st = NodalState {
            w: [Vec::new(), Vec::new()],
            gw: [Vec::new(), Vec::new()],
            u: [Vec::new(), Vec::new()],
            dudw: [Vec::new(), Vec::new()],
        };
        for i in 0..2 {
            let ci = &c[i * n..(i + 1) * n];
            let w = self.space.eval(ci);
            let mut u = Vec::with_capacity(w.len());
            let mut g = Vec::with_capacity(w.len());
            for (q, &wq) in w.iter().enumerate() {
                let hint = guess.map(|gu| gu[i][q]);
                let x = self.maps[i]
                    .phi_inverse_from(wq, hint)
                    .map_err(|_| Error::InverseOverflow {
                        species: i + 1,
                        node: q,
                        w: wq,
                    })?;
                u.push(x);
                g.push(x / self.maps[i].cross_d1(x));
            }
            st.gw[i] = self.space.eval_grad(ci);
            st.w[i] = w;
            st.u[i] = u;
            st.dudw[i] = g;
        }
        Ok(st)
    }

    pub fn residual(&self, u_prev: &[Vec<f64>; 2], sigma: f64, c: &[f64]) -> Result<(Vec<f64>, NodalState)> {
        let st = self.nodal_state(c, None)?;
        let r = self.residual_at(&st, u_prev, sigma, c);
        Ok((r, st))
    }

    fn residual_at(&self, st: &NodalState, u_prev: &[Vec<f64>; 2], sigma: f64, c: &[f64]) -> Vec<f64> {
        let n = self.space.n();
        let nq = self.space.num_nodes();
        let tau = self.tau();
        let wts = self.space.weights();
        let vals = self.space.values();
        let lam = self.space.eigenvalues();
        let a_eval: Vec<[[f64; 2]; 2]> = (0..nq)
            .map(|q| {
                let m = crate::entropy::matrix_a(&self.reg, st.u[0][q], st.u[1][q]);
                [[m.a11, m.a12], [m.a21, m.a22]]
            })
            .collect();
        let diff = self.space.assemble_diffusion(&a_eval, [&st.gw[0], &st.gw[1]]);
        let mut out = vec![0.0; 2 * n];
        for i in 0..2 {
            let t: Vec<f64> = (0..nq)
                .map(|q| {
                    let uq = [st.u[0][q], st.u[1][q]];
                    let r = self.reg.reaction_pos(i, uq) - self.reg.reaction_neg(i, uq);
                    wts[q] * ((st.u[i][q] - u_prev[i][q]) / tau - r)
                })
                .collect();
            for m in 0..n {
                let mut s = diff[i][m];
                for (q, tq) in t.iter().enumerate() {
                    s += vals[(m, q)] * tq;
                }
                out[i * n + m] = sigma * s + self.cfg.eps * (1.0 + lam[m]) * c[i * n + m];
            }
        }
        out
    }

    fn jacobian(
        &self,
        st: &NodalState,
        u_prev: &[Vec<f64>; 2],
        sigma: f64,
        c: &[f64],
        mode: JacobianMode,
    ) -> Result<DMatrix<f64>> {
        let n = self.space.n();
        if mode == JacobianMode::FiniteDifference {
            let f0 = self.residual_at(st, u_prev, sigma, c);
            let mut jac = DMatrix::zeros(2 * n, 2 * n);
            let mut cp = c.to_vec();
            for l in 0..2 * n {
                let h = 1e-7 * c[l].abs().max(1.0);
                cp[l] = c[l] + h;
                let stp = self.nodal_state(&cp, Some(&st.u))?;
                let f1 = self.residual_at(&stp, u_prev, sigma, &cp);
                for r in 0..2 * n {
                    jac[(r, l)] = (f1[r] - f0[r]) / h;
                }
                cp[l] = c[l];
            }
            return Ok(jac);
        }
        let nq = self.space.num_nodes();
        let tau = self.tau();
        let wts = self.space.weights();
        let vals = self.space.values();
        let grads = self.space.grads();
        let lam = self.space.eigenvalues();
        let dim = self.space.dim();

        let mut a = Vec::with_capacity(nq);
        let mut da = Vec::with_capacity(nq);
        let mut dr = Vec::with_capacity(nq);
        for q in 0..nq {
            let (aq, daq) = matrix_a_with_derivatives(&self.reg, st.u[0][q], st.u[1][q]);
            a.push(aq);
            da.push(daq);
            let uq = [st.u[0][q], st.u[1][q]];
            dr.push([
                self.reg.reaction_with_grad(0, uq).1,
                self.reg.reaction_with_grad(1, uq).1,
            ]);
        }

        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..2 {
            for j in 0..2 {
                let vmass: Vec<f64> = (0..nq)
                    .map(|q| {
                        let mut v = -dr[q][i][j] * st.dudw[j][q];
                        if i == j {
                            v += st.dudw[i][q] / tau;
                        }
                        wts[q] * v
                    })
                    .collect();
                let mut block = gram(vals, &vmass, vals);
                for d in 0..dim {
                    let vstiff: Vec<f64> = (0..nq).map(|q| wts[q] * a[q][i][j]).collect();
                    block += gram(&grads[d], &vstiff, &grads[d]);
                    if mode == JacobianMode::Full {
                        let vcoup: Vec<f64> = (0..nq)
                            .map(|q| {
                                let s = da[q][j][i][0] * st.gw[0][d][q] + da[q][j][i][1] * st.gw[1][d][q];
                                wts[q] * st.dudw[j][q] * s
                            })
                            .collect();
                        block += gram(&grads[d], &vcoup, vals);
                    }
                }
                block *= sigma;
                if i == j {
                    for m in 0..n {
                        block[(m, m)] += self.cfg.eps * (1.0 + lam[m]);
                    }
                }
                jac.view_mut((i * n, j * n), (n, n)).copy_from(&block);
            }
        }
        Ok(jac)
    }

    fn newton(
        &self,
        u_prev: &[Vec<f64>; 2],
        sigma: f64,
        c0: &[f64],
        st0: &NodalState,
        mode: JacobianMode,
    ) -> std::result::Result<NewtonOk, f64> {
        let tol = self.cfg.newton_tol;
        let mut c = c0.to_vec();
        let mut st = st0.clone();
        let mut f = self.residual_at(&st, u_prev, sigma, &c);
        let mut norm = inf_norm(&f);
        let mut iters = 0;
        while norm > tol {
            if iters >= self.cfg.newton_max_iter {
                return Err(norm);
            }
            iters += 1;
            let jac = match self.jacobian(&st, u_prev, sigma, &c, mode) {
                Ok(j) => j,
                Err(_) => return Err(norm),
            };
            let rhs = -DVector::from_column_slice(&f);
            let delta = match jac.lu().solve(&rhs) {
                Some(d) if d.iter().all(|x| x.is_finite()) => d,
                _ => return Err(norm),
            };
            let mut accepted = false;
            for &alpha in &self.cfg.damping {
                let ct: Vec<f64> = c.iter().zip(delta.iter()).map(|(a, d)| a + alpha * d).collect();
                let stt = match self.nodal_state(&ct, Some(&st.u)) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                let ft = self.residual_at(&stt, u_prev, sigma, &ct);
                let nt = inf_norm(&ft);
                if nt.is_finite() && nt < (1.0 - 1e-4 * alpha) * norm {
                    c = ct;
                    st = stt;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(norm);
            }
        }
        Ok(NewtonOk {
            c,
            state: st,
            iters,
            res: norm,
        })
    }

    fn solve_sigma(
        &self,
        u_prev: &[Vec<f64>; 2],
        sigma: f64,
        c0: &[f64],
        st0: &NodalState,
        report: &mut StepReport,
    ) -> std::result::Result<NewtonOk, f64> {
        let mut worst = f64::NAN;
        for (attempt, mode) in [JacobianMode::Full, JacobianMode::Picard, JacobianMode::FiniteDifference]
            .into_iter()
            .enumerate()
        {
            match self.newton(u_prev, sigma, c0, st0, mode) {
                Ok(ok) => {
                    report.fallbacks += attempt;
                    return Ok(ok);
                }
                Err(r) => worst = r,
            }
        }
        Err(worst)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        k: usize,
        u_prev: &[Vec<f64>; 2],
        from: f64,
        to: f64,
        depth: u32,
        cur: &mut (Vec<f64>, NodalState),
        report: &mut StepReport,
    ) -> Result<()> {
        match self.solve_sigma(u_prev, to, &cur.0, &cur.1, report) {
            Ok(ok) => {
                report.newton_iters += ok.iters;
                report.residual_norm = ok.res;
                report.sigma_path.push(to);
                *cur = (ok.c, ok.state);
                Ok(())
            }
            Err(res) => {
                if depth >= self.cfg.bisection_depth {
                    return Err(Error::Continuation {
                        step: k,
                        sigma: to,
                        residual: res,
                        detail: format!(
                            "from sigma = {from}, path so far {:?}, |w|_inf = {:e}",
                            report.sigma_path,
                            inf_norm(&cur.0)
                        ),
                    });
                }
                report.bisections += 1;
                let mid = 0.5 * (from + to);
                self.advance(k, u_prev, from, mid, depth + 1, cur, report)?;
                self.advance(k, u_prev, mid, to, depth + 1, cur, report)
            }
        }
    }

    /// Solves step `k` along the configured σ-schedule.
    pub fn solve_step(&self, k: usize, u_prev: &[Vec<f64>; 2]) -> Result<StepSolution> {
        self.solve_step_with_schedule(k, u_prev, &self.cfg.sigma_schedule)
    }

    pub fn solve_step_with_schedule(
        &self,
        k: usize,
        u_prev: &[Vec<f64>; 2],
        schedule: &[f64],
    ) -> Result<StepSolution> {
        let nq = self.space.num_nodes();
        for (i, up) in u_prev.iter().enumerate() {
            if up.len() != nq || up.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(invalid(format!("previous state of species {} not positive", i + 1)));
            }
        }
        let c0 = vec![0.0; 2 * self.space.n()];
        let st0 = self.nodal_state(&c0, None)?;
        let mut cur = (c0, st0);
        let mut report = StepReport {
            sigma_path: vec![schedule[0]],
            ..Default::default()
        };
        if schedule[0] != 0.0 {
            return Err(invalid("sigma schedule must start at 0"));
        }
        for w in schedule.windows(2) {
            self.advance(k, u_prev, w[0], w[1], 0, &mut cur, &mut report)?;
        }
        Ok(StepSolution {
            c: cur.0,
            state: cur.1,
            report,
        })
    }

    /// Largest coefficient difference between the solutions along `{0, 1}` and the
    /// configured schedule, or `None` when the direct path does not converge.
    pub fn homotopy_disagreement(&self, k: usize, u_prev: &[Vec<f64>; 2]) -> Result<Option<f64>> {
        let a = self.solve_step(k, u_prev)?;
        let b = match self.solve_step_with_schedule(k, u_prev, &[0.0, 1.0]) {
            Ok(b) => b,
            Err(Error::Continuation { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(Some(
            a.c.iter().zip(&b.c).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
        ))
    }

    /// Lifts nodes below the floor and checks the initial entropy.
    pub fn prepare_initial(&self, u0: [Vec<f64>; 2]) -> Result<[Vec<f64>; 2]> {
        let nq = self.space.num_nodes();
        let mut out = u0;
        for (i, ui) in out.iter_mut().enumerate() {
            if ui.len() != nq {
                return Err(invalid("initial data length does not match quadrature"));
            }
            for x in ui.iter_mut() {
                if !(*x >= 0.0) || !x.is_finite() {
                    return Err(invalid(format!("initial data of species {} not nonnegative", i + 1)));
                }
                if *x < self.cfg.u_floor {
                    *x = self.cfg.u_floor;
                }
            }
        }
        let e = entropy_functional(&self.maps, [&out[0], &out[1]], &self.space)?;
        if !e.is_finite() {
            return Err(invalid("initial entropy is not finite"));
        }
        Ok(out)
    }

    pub fn run_trajectory(&self, u0: [Vec<f64>; 2]) -> std::result::Result<Trajectory, Box<TrajectoryFailure>> {
        let empty = |error| {
            Box::new(TrajectoryFailure {
                partial: Trajectory {
                    u0: [Vec::new(), Vec::new()],
                    states: Vec::new(),
                    records: Vec::new(),
                },
                error,
            })
        };
        let u0 = self.prepare_initial(u0).map_err(empty)?;
        let first = match step_record(self, 0, &u0, None) {
            Ok(r) => r,
            Err(e) => return Err(empty(e)),
        };
        let mut traj = Trajectory {
            u0,
            states: Vec::with_capacity(self.cfg.n_steps),
            records: vec![first],
        };
        for k in 1..=self.cfg.n_steps {
            let prev = traj.u(k - 1).clone();
            let sol = match self.solve_step(k, &prev) {
                Ok(s) => s,
                Err(error) => return Err(Box::new(TrajectoryFailure { partial: traj, error })),
            };
            let rec = match step_record(self, k, &prev, Some(&sol)) {
                Ok(r) => r,
                Err(error) => return Err(Box::new(TrajectoryFailure { partial: traj, error })),
            };
            traj.records.push(rec);
            traj.states.push(TrajectoryState {
                k,
                c: sol.c,
                u: sol.state.u,
                report: sol.report,
            });
        }
        Ok(traj)
    }
}
