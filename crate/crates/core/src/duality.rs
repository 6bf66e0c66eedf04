//! Backward dual chain on the finite-difference grid and the duality estimate.
//!
//! The chain solves, for `k = N, …, 1` with `Φ^{N+1} = 0`,
//!
//! ```text
//! (Φ^{k+1} − Φ^k)/τ + b^k ΔΦ^k = √b^k F^k − rΦ^k
//! ⇔ (1/τ − r)Φ^k − b^k Δ_hΦ^k = Φ^{k+1}/τ − √b^k F^k.
//! ```

use std::sync::Arc;

use crate::entropy::EntropyMap;
use crate::error::{invalid, Result};
use crate::spatial::{FdGrid, SpatialSpace};
use crate::stepper::{Problem, Trajectory};

/// Piecewise-constant-in-time family `h^k` on `(0, T]`, `h(t) = h^k` on `((k−1)τ, kτ]`.
#[derive(Clone, Debug)]
pub struct StepEmbedding<'a> {
    pub tau: f64,
    pub steps: &'a [Vec<f64>],
    /// Spatial quadrature weights.
    pub weights: &'a [f64],
}

impl StepEmbedding<'_> {
    /// `‖h‖_{L^q(0,T; L^p(Ω))}` for finite `p, q ≥ 1`.
    pub fn lq_lp(&self, q: f64, p: f64) -> f64 {
        let s: f64 = self
            .steps
            .iter()
            .map(|h| {
                let lp: f64 = h
                    .iter()
                    .zip(self.weights)
                    .map(|(v, w)| w * v.abs().powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p);
                self.tau * lp.powf(q)
            })
            .sum();
        s.powf(1.0 / q)
    }

    /// `‖h‖_{L²(Q_T)} = (Σ_k τ‖h^k‖²_{L²})^{1/2}`
    pub fn l2(&self) -> f64 {
        self.steps
            .iter()
            .map(|h| {
                self.tau
                    * h.iter()
                        .zip(self.weights)
                        .map(|(v, w)| w * v * v)
                        .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.steps
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct DualChain {
    pub grid: Arc<FdGrid>,
    pub b: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub r: f64,
    pub tau: f64,
    /// `phi[k-1] = Φ^k`, `k = 1..=N`
    pub phi: Vec<Vec<f64>>,
}

pub fn solve_dual_chain(
    grid: Arc<FdGrid>,
    b: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    r: f64,
    tau: f64,
) -> Result<DualChain> {
    let n = b.len();
    if n == 0 || f.len() != n {
        return Err(invalid("b and F must hold the same positive number of steps"));
    }
    if !(tau > 0.0) || !(r >= 0.0) || !(1.0 - 2.0 * r * tau > 0.0) {
        return Err(invalid(format!("need r >= 0, tau > 0 and 1 - 2 r tau > 0 (r = {r}, tau = {tau})")));
    }
    let m = grid.len();
    for k in 0..n {
        if b[k].len() != m || f[k].len() != m {
            return Err(invalid(format!("step {}: field length does not match grid", k + 1)));
        }
        if b[k].iter().any(|&v| !(v >= 1.0) || !v.is_finite()) {
            return Err(invalid(format!("step {}: b must be >= 1", k + 1)));
        }
        if f[k].iter().any(|&v| !(v <= 0.0) || !v.is_finite()) {
            return Err(invalid(format!("step {}: F must be <= 0", k + 1)));
        }
    }
    let coef = 1.0 / tau - r;
    let mut phi = vec![Vec::new(); n];
    let mut next = vec![0.0; m];
    for k in (0..n).rev() {
        let rhs: Vec<f64> = (0..m)
            .map(|q| next[q] / tau - b[k][q].sqrt() * f[k][q])
            .collect();
        let sol = if rhs.iter().all(|&v| v == 0.0) {
            vec![0.0; m]
        } else {
            grid.solve(coef, &b[k], &rhs)?
        };
        next = sol.clone();
        phi[k] = sol;
    }
    Ok(DualChain {
        grid,
        b,
        f,
        r,
        tau,
        phi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-12) + 1e-14,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DualBoundsReport {
    pub min_phi: f64,
    /// `e^{r(τ)T} = exp{(N+1)·2rτ/(1−2rτ)}^{1/2}`
    pub growth: f64,
    pub f_norm: f64,
    pub sqrt_b_norm: f64,
    pub c_omega: f64,
    /// `max_j ‖∇Φ^j‖ ≤ e^{r(τ)T}‖F‖`
    pub bound1: BoundCheck,
    /// `‖√b ΔΦ‖_{L²(Q_T)} ≤ e^{r(τ)T}‖F‖`
    pub bound2: BoundCheck,
    /// `max_j ‖Φ^j‖_{H¹} ≤ C_Ω e^{r(τ)T}[e^{r(τ)T} + ‖√b‖]‖F‖`
    pub bound3: BoundCheck,
}

impl DualBoundsReport {
    pub fn all_hold(&self) -> bool {
        self.bound1.holds && self.bound2.holds && self.bound3.holds
    }
}

impl DualChain {
    pub fn steps(&self) -> usize {
        self.phi.len()
    }

    fn embed<'a>(&self, v: &'a [Vec<f64>], w: &'a [f64]) -> StepEmbedding<'a> {
        StepEmbedding {
            tau: self.tau,
            steps: v,
            weights: w,
        }
    }

    pub fn growth_factor(&self) -> f64 {
        let n = self.steps() as f64;
        let x = self.r * self.tau;
        ((n + 1.0) * 2.0 * x / (1.0 - 2.0 * x)).exp().sqrt()
    }

    pub fn check_dual_bounds(&self) -> DualBoundsReport {
        let g = &self.grid;
        let w = vec![g.cell_volume(); g.len()];
        let f_norm = self.embed(&self.f, &w).l2();
        let sqrt_b: Vec<Vec<f64>> = self.b.iter().map(|b| b.iter().map(|v| v.sqrt()).collect()).collect();
        let sqrt_b_norm = self.embed(&sqrt_b, &w).l2();
        let e = self.growth_factor();

        let grad_max = self
            .phi
            .iter()
            .map(|p| g.grad_norm_sq(p).sqrt())
            .fold(0.0f64, f64::max);
        let b_lap: Vec<Vec<f64>> = self
            .phi
            .iter()
            .zip(&sqrt_b)
            .map(|(p, sb)| g.laplacian(p).iter().zip(sb).map(|(l, s)| l * s).collect())
            .collect();
        let b_lap_norm = self.embed(&b_lap, &w).l2();
        let h1_max = self
            .phi
            .iter()
            .map(|p| (g.l2_norm_sq(p) + g.grad_norm_sq(p)).sqrt())
            .fold(0.0f64, f64::max);

        // ‖Φ‖_{H¹} ≤ (1 + C_PW)‖∇Φ‖ + |∫Φ|/√μ, and integrating the chain gives
        // |∫Φ^j| ≤ e(1 + e)‖√b‖‖F‖, hence this constant.
        let c_omega = (1.0 + g.poincare_constant()).max((1.0 + e) / g.measure().sqrt());
        let min_phi = self.phi.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v));

        DualBoundsReport {
            min_phi,
            growth: e,
            f_norm,
            sqrt_b_norm,
            c_omega,
            bound1: BoundCheck::new(grad_max, e * f_norm),
            bound2: BoundCheck::new(b_lap_norm, e * f_norm),
            bound3: BoundCheck::new(h1_max, c_omega * e * (e + sqrt_b_norm) * f_norm),
        }
    }

    pub fn check_dual_linf(&self) -> DualLinfReport {
        let g = &self.grid;
        let w = vec![g.cell_volume(); g.len()];
        let phi_inf = self.phi.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let lap_inf = self
            .phi
            .iter()
            .map(|p| g.laplacian(p).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0f64, f64::max);
        let sqrt_b: Vec<Vec<f64>> = self.b.iter().map(|b| b.iter().map(|v| v.sqrt()).collect()).collect();
        let shape = (1.0 + self.embed(&sqrt_b, &w).l2()) * self.embed(&self.f, &w).linf();
        let ratio = |x: f64| if shape > 0.0 { x / shape } else { 0.0 };
        DualLinfReport {
            phi_inf,
            lap_inf,
            shape,
            phi_ratio: ratio(phi_inf),
            lap_ratio: ratio(lap_inf),
        }
    }
}

/// Max-norm monitor; the ratios are the empirical constants against
/// `[1 + ‖√b‖_{L²(Q_T)}]‖F‖_∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualLinfReport {
    pub phi_inf: f64,
    pub lap_inf: f64,
    pub shape: f64,
    pub phi_ratio: f64,
    pub lap_ratio: f64,
}

/// `‖u_i √(d_ii^ε(u_i) + a_ij^ε(u_j))‖_{L²(Q_T)}` over steps `1..=N`.
pub fn duality_norm(problem: &Problem, traj: &Trajectory) -> [f64; 2] {
    duality_norm_of(
        problem.regularized(),
        problem.space(),
        problem.tau(),
        (1..=traj.steps()).map(|k| traj.u(k)),
    )
}

pub fn duality_norm_of<'a>(
    reg: &crate::coefficients::RegularizedCoefficients,
    space: &SpatialSpace,
    tau: f64,
    states: impl Iterator<Item = &'a [Vec<f64>; 2]>,
) -> [f64; 2] {
    let mut h: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for u in states {
        for i in 0..2 {
            let j = 1 - i;
            h[i].push(
                (0..u[i].len())
                    .map(|q| {
                        let (ui, uj) = (u[i][q], u[j][q]);
                        ui * (reg.d_eps(i, ui) + reg.a(i, j, uj)).sqrt()
                    })
                    .collect(),
            );
        }
    }
    let norm = |steps: &Vec<Vec<f64>>| {
        StepEmbedding {
            tau,
            steps,
            weights: space.weights(),
        }
        .l2()
    };
    [norm(&h[0]), norm(&h[1])]
}

/// Transfers step `k` of a trajectory to grid nodes: `u = (φ^ε)^{-1}(w)` at the
/// grid points.
pub fn transfer_to_grid(problem: &Problem, traj: &Trajectory, k: usize, grid: &FdGrid) -> Result<[Vec<f64>; 2]> {
    let n = problem.space().n();
    let maps: &[EntropyMap; 2] = problem.maps();
    let mut out = [Vec::new(), Vec::new()];
    for i in 0..2 {
        if k == 0 {
            return Err(invalid("initial data has no entropy coefficients"));
        }
        let c = &traj.states[k - 1].c[i * n..(i + 1) * n];
        let w = problem.space().eval_at_points(c, grid.points());
        out[i] = w
            .iter()
            .map(|&y| maps[i].phi_inverse(y))
            .collect::<Result<Vec<f64>>>()?;
    }
    Ok(out)
}

/// Dual chains built from a trajectory: `b_i^k = max(1, d_ii^ε(u_i) + a_ij^ε(u_j))`
/// on the grid, `F_i^k = −u_i^k`, `r = max r_i`.
pub fn trajectory_chains(problem: &Problem, traj: &Trajectory, grid: Arc<FdGrid>) -> Result<[DualChain; 2]> {
    let reg = problem.regularized();
    let mut bs: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    let mut fs: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for k in 1..=traj.steps() {
        let u = transfer_to_grid(problem, traj, k, &grid)?;
        for i in 0..2 {
            let j = 1 - i;
            bs[i].push(
                (0..grid.len())
                    .map(|q| (reg.d_eps(i, u[i][q]) + reg.a(i, j, u[j][q])).max(1.0))
                    .collect(),
            );
            fs[i].push(u[i].iter().map(|v| -v).collect());
        }
    }
    let r = reg.r(0).max(reg.r(1));
    let tau = problem.tau();
    let [b0, b1] = bs;
    let [f0, f1] = fs;
    Ok([
        solve_dual_chain(grid.clone(), b0, f0, r, tau)?,
        solve_dual_chain(grid, b1, f1, r, tau)?,
    ])
}
