//! Galerkin spaces of Neumann cosines on an interval or a rectangle, with
//! quadrature and the weak forms used by the stepper.
//!
//! Quadrature is the cell-midpoint rule with `4n` cells per dimension. On that
//! grid the discrete sums of `cos(kπx/L)` vanish for `0 < k < 8n`, so every
//! product of two basis functions integrates exactly; smooth nonlinear integrands
//! of cosine series are even-periodic and converge spectrally.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

#[derive(Clone, Debug)]
pub struct SpatialSpace {
    extents: Vec<f64>,
    n: usize,
    modes: Vec<Vec<usize>>,
    eigen: Vec<f64>,
    nodes_per_dim: Vec<usize>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `values[(m, q)] = χ_m(x_q)`
    values: DMatrix<f64>,
    /// `grads[d][(m, q)] = ∂_d χ_m(x_q)`
    grads: Vec<DMatrix<f64>>,
    measure: f64,
}

fn cos_factor(m: usize, l: f64, x: f64) -> f64 {
    if m == 0 {
        1.0 / l.sqrt()
    } else {
        (2.0 / l).sqrt() * (m as f64 * PI * x / l).cos()
    }
}

fn cos_factor_d(m: usize, l: f64, x: f64) -> f64 {
    if m == 0 {
        0.0
    } else {
        let k = m as f64 * PI / l;
        -(2.0 / l).sqrt() * k * (k * x).sin()
    }
}

impl SpatialSpace {
    pub fn new_1d(l: f64, n: usize) -> Result<Self> {
        Self::new(&[l], n)
    }

    pub fn new_2d(l1: f64, l2: f64, n: usize) -> Result<Self> {
        Self::new(&[l1, l2], n)
    }

    /// `n` basis functions on `[0, L_1] × … `, ordered by eigenvalue with ties
    /// broken lexicographically on the mode index.
    pub fn new(extents: &[f64], n: usize) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 {
            return Err(invalid("dimension must be 1 or 2"));
        }
        if extents.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("domain extents must be positive: {extents:?}")));
        }
        if n == 0 {
            return Err(invalid("Galerkin dimension n must be positive"));
        }
        let dim = extents.len();
        let lambda = |mode: &[usize]| -> f64 {
            mode.iter()
                .zip(extents)
                .map(|(&m, &l)| (m as f64 * PI / l).powi(2))
                .sum()
        };
        let mut cand: Vec<Vec<usize>> = if dim == 1 {
            (0..n).map(|m| vec![m]).collect()
        } else {
            (0..n).flat_map(|p| (0..n).map(move |q| vec![p, q])).collect()
        };
        cand.sort_by(|a, b| lambda(a).total_cmp(&lambda(b)).then_with(|| a.cmp(b)));
        cand.truncate(n);
        let eigen: Vec<f64> = cand.iter().map(|m| lambda(m)).collect();

        let nodes_per_dim = vec![4 * n; dim];
        let axes: Vec<Vec<f64>> = extents
            .iter()
            .zip(&nodes_per_dim)
            .map(|(&l, &k)| (0..k).map(|j| (j as f64 + 0.5) * l / k as f64).collect())
            .collect();
        let cell: f64 = extents
            .iter()
            .zip(&nodes_per_dim)
            .map(|(&l, &k)| l / k as f64)
            .product();
        let points: Vec<Vec<f64>> = if dim == 1 {
            axes[0].iter().map(|&x| vec![x]).collect()
        } else {
            let mut p = Vec::with_capacity(axes[0].len() * axes[1].len());
            for &y in &axes[1] {
                for &x in &axes[0] {
                    p.push(vec![x, y]);
                }
            }
            p
        };
        let nq = points.len();
        let weights = vec![cell; nq];
        let measure = extents.iter().product();

        let mut s = Self {
            extents: extents.to_vec(),
            n,
            modes: cand,
            eigen,
            nodes_per_dim,
            points,
            weights,
            values: DMatrix::zeros(n, nq),
            grads: vec![DMatrix::zeros(n, nq); dim],
            measure,
        };
        for m in 0..n {
            for q in 0..nq {
                let x = s.points[q].clone();
                s.values[(m, q)] = s.basis_at(m, &x);
                let g = s.basis_grad_at(m, &x);
                for d in 0..dim {
                    s.grads[d][(m, q)] = g[d];
                }
            }
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn nodes_per_dim(&self) -> &[usize] {
        &self.nodes_per_dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Eigenvalues `λ_m ≥ 0` of `−Δ` with Neumann conditions.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen
    }

    pub fn modes(&self) -> &[Vec<usize>] {
        &self.modes
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grads(&self) -> &[DMatrix<f64>] {
        &self.grads
    }

    pub fn basis_at(&self, m: usize, x: &[f64]) -> f64 {
        self.modes[m]
            .iter()
            .zip(&self.extents)
            .zip(x)
            .map(|((&k, &l), &xi)| cos_factor(k, l, xi))
            .product()
    }

    pub fn basis_grad_at(&self, m: usize, x: &[f64]) -> Vec<f64> {
        let mode = &self.modes[m];
        (0..self.dim())
            .map(|d| {
                (0..self.dim())
                    .map(|e| {
                        if e == d {
                            cos_factor_d(mode[e], self.extents[e], x[e])
                        } else {
                            cos_factor(mode[e], self.extents[e], x[e])
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// Nodal values of `Σ c_m χ_m`.
    pub fn eval(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (m, &cm) in c.iter().enumerate() {
            if cm != 0.0 {
                for (q, o) in out.iter_mut().enumerate() {
                    *o += cm * self.values[(m, q)];
                }
            }
        }
        out
    }

    /// Nodal gradient of `Σ c_m χ_m`, indexed `[d][q]`.
    pub fn eval_grad(&self, c: &[f64]) -> Vec<Vec<f64>> {
        self.grads
            .iter()
            .map(|g| {
                let mut out = vec![0.0; self.num_nodes()];
                for (m, &cm) in c.iter().enumerate() {
                    if cm != 0.0 {
                        for (q, o) in out.iter_mut().enumerate() {
                            *o += cm * g[(m, q)];
                        }
                    }
                }
                out
            })
            .collect()
    }

    pub fn eval_at_points(&self, c: &[f64], pts: &[Vec<f64>]) -> Vec<f64> {
        pts.iter()
            .map(|x| c.iter().enumerate().map(|(m, &cm)| cm * self.basis_at(m, x)).sum())
            .collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// L²-orthonormal projection `P_n f` of a nodal field.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|m| {
                (0..self.num_nodes())
                    .map(|q| self.weights[q] * f[q] * self.values[(m, q)])
                    .sum()
            })
            .collect()
    }

    /// `⟨f, g⟩_{L²}` of nodal fields.
    pub fn l2_nodal(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// `(⟨f, g⟩_{L²}, ⟨f, g⟩_{H¹})` for members of `V_n`, by quadrature of the
    /// reconstructed values and spectral gradients.
    pub fn inner_products(&self, f: &[f64], g: &[f64]) -> (f64, f64) {
        let l2 = self.l2_nodal(&self.eval(f), &self.eval(g));
        let gf = self.eval_grad(f);
        let gg = self.eval_grad(g);
        let grad: f64 = gf.iter().zip(&gg).map(|(a, b)| self.l2_nodal(a, b)).sum();
        (l2, l2 + grad)
    }

    /// `‖c‖²_{H¹} = Σ (1 + λ_m) c_m²`
    pub fn h1_norm_sq(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.eigen).map(|(x, l)| (1.0 + l) * x * x).sum()
    }

    /// Weak diffusion terms `⟨∇χ_m, (A ∇w)_i⟩` for both species rows.
    ///
    /// `a_eval[q]` is the 2×2 matrix at node `q`; `gw[i][d][q]` the gradient of `w_i`.
    pub fn assemble_diffusion(&self, a_eval: &[[[f64; 2]; 2]], gw: [&[Vec<f64>]; 2]) -> [Vec<f64>; 2] {
        let nq = self.num_nodes();
        let mut out = [vec![0.0; self.n], vec![0.0; self.n]];
        for (i, row) in out.iter_mut().enumerate() {
            for d in 0..self.dim() {
                let flux: Vec<f64> = (0..nq)
                    .map(|q| {
                        self.weights[q]
                            * (a_eval[q][i][0] * gw[0][d][q] + a_eval[q][i][1] * gw[1][d][q])
                    })
                    .collect();
                let g = &self.grads[d];
                for (m, r) in row.iter_mut().enumerate() {
                    *r += (0..nq).map(|q| g[(m, q)] * flux[q]).sum::<f64>();
                }
            }
        }
        out
    }
}

/// Uniform cell-centred grid with mirrored ghost cells (homogeneous Neumann) and
/// the standard 3- or 5-point Laplacian.
#[derive(Clone, Debug)]
pub struct FdGrid {
    extents: Vec<f64>,
    dims: Vec<usize>,
    h: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl FdGrid {
    pub fn new(extents: &[f64], dims: &[usize]) -> Result<Self> {
        if extents.len() != dims.len() || extents.is_empty() || extents.len() > 2 {
            return Err(invalid("grid dimension must be 1 or 2"));
        }
        if dims.iter().any(|&m| m < 2) {
            return Err(invalid("grid needs at least 2 points per dimension"));
        }
        let h: Vec<f64> = extents.iter().zip(dims).map(|(l, &m)| l / m as f64).collect();
        let points = if dims.len() == 1 {
            (0..dims[0]).map(|j| vec![(j as f64 + 0.5) * h[0]]).collect()
        } else {
            let mut p = Vec::with_capacity(dims[0] * dims[1]);
            for jy in 0..dims[1] {
                for jx in 0..dims[0] {
                    p.push(vec![(jx as f64 + 0.5) * h[0], (jy as f64 + 0.5) * h[1]]);
                }
            }
            p
        };
        Ok(Self {
            extents: extents.to_vec(),
            dims: dims.to_vec(),
            h,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    fn neighbours(&self, q: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let mx = self.dims[0];
        let (jx, jy) = (q % mx, q / mx);
        let ih2x = 1.0 / (self.h[0] * self.h[0]);
        let mut v: Vec<(usize, f64)> = Vec::with_capacity(4);
        if jx > 0 {
            v.push((q - 1, ih2x));
        }
        if jx + 1 < mx {
            v.push((q + 1, ih2x));
        }
        if self.dims.len() == 2 {
            let ih2y = 1.0 / (self.h[1] * self.h[1]);
            if jy > 0 {
                v.push((q - mx, ih2y));
            }
            if jy + 1 < self.dims[1] {
                v.push((q + mx, ih2y));
            }
        }
        v.into_iter()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|q| self.neighbours(q).map(|(p, c)| c * (f[p] - f[q])).sum())
            .collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.cell_volume() * f.iter().sum::<f64>()
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        self.cell_volume() * f.iter().map(|x| x * x).sum::<f64>()
    }

    /// `‖∇_h f‖² = −⟨f, Δ_h f⟩_h` (face differences).
    pub fn grad_norm_sq(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for q in 0..self.len() {
            for (p, c) in self.neighbours(q) {
                if p > q {
                    s += c * (f[p] - f[q]).powi(2);
                }
            }
        }
        s * self.cell_volume()
    }

    /// Inverse square root of the smallest nonzero eigenvalue of `−Δ_h`.
    pub fn poincare_constant(&self) -> f64 {
        let lam = self
            .dims
            .iter()
            .zip(&self.h)
            .map(|(&m, &h)| 4.0 / (h * h) * (PI / (2.0 * m as f64)).sin().powi(2))
            .fold(f64::INFINITY, f64::min);
        1.0 / lam.sqrt()
    }

    /// Solves `coef·Φ − b ⊙ Δ_h Φ = rhs`.
    pub fn solve(&self, coef: f64, b: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if b.len() != n || rhs.len() != n {
            return Err(invalid("field length does not match grid"));
        }
        if !(coef > 0.0) || b.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(crate::error::Error::Singular(format!(
                "coefficient {coef} or b not strictly positive"
            )));
        }
        let mut x = if self.dims.len() == 1 {
            self.solve_tridiagonal(coef, b, rhs)
        } else {
            self.solve_banded(coef, b, rhs)
        };
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = |x: &[f64]| 1e-11 * scale.max(f64::MIN_POSITIVE) + self.rounding_floor(coef, b, x);
        for _ in 0..3 {
            let r = self.residual(coef, b, rhs, &x);
            let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rn <= tol(&x) || rn == 0.0 {
                return Ok(x);
            }
            let dx = if self.dims.len() == 1 {
                self.solve_tridiagonal(coef, b, &r)
            } else {
                self.solve_banded(coef, b, &r)
            };
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        let r = self.residual(coef, b, rhs, &x);
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rn <= tol(&x) {
            Ok(x)
        } else {
            Err(crate::error::Error::Singular(format!(
                "grid solve residual {rn:e} above tolerance"
            )))
        }
    }

    /// Rounding level of the residual evaluation: `‖coef·I − bΔ_h‖_∞ ‖x‖_∞` times a
    /// few ulps. Only binds when `coef` is small against `b/h²`.
    pub fn rounding_floor(&self, coef: f64, b: &[f64], x: &[f64]) -> f64 {
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let stencil: f64 = self.h.iter().map(|h| 4.0 / (h * h)).sum();
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        16.0 * f64::EPSILON * (coef + bmax * stencil) * xmax
    }

    fn residual(&self, coef: f64, b: &[f64], rhs: &[f64], x: &[f64]) -> Vec<f64> {
        let lap = self.laplacian(x);
        (0..self.len())
            .map(|q| rhs[q] - (coef * x[q] - b[q] * lap[q]))
            .collect()
    }

    fn solve_tridiagonal(&self, coef: f64, b: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let c = 1.0 / (self.h[0] * self.h[0]);
        let mut diag = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for q in 0..n {
            let mut d = coef;
            if q > 0 {
                lower[q] = -b[q] * c;
                d += b[q] * c;
            }
            if q + 1 < n {
                upper[q] = -b[q] * c;
                d += b[q] * c;
            }
            diag[q] = d;
        }
        // Thomas algorithm; stable for this strictly diagonally dominant system
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = upper[0] / diag[0];
        dp[0] = rhs[0] / diag[0];
        for q in 1..n {
            let m = diag[q] - lower[q] * cp[q - 1];
            cp[q] = upper[q] / m;
            dp[q] = (rhs[q] - lower[q] * dp[q - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for q in (0..n - 1).rev() {
            x[q] = dp[q] - cp[q] * x[q + 1];
        }
        x
    }

    fn solve_banded(&self, coef: f64, b: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let p = self.dims[0];
        let w = 2 * p + 1;
        let mut band = vec![0.0; n * w];
        let idx = |i: usize, j: usize| i * w + (j + p - i);
        for q in 0..n {
            let mut d = coef;
            for (nb, c) in self.neighbours(q) {
                band[idx(q, nb)] = -b[q] * c;
                d += b[q] * c;
            }
            band[idx(q, q)] = d;
        }
        let mut y = rhs.to_vec();
        // elimination without pivoting: the matrix is an M-matrix
        for k in 0..n {
            let pivot = band[idx(k, k)];
            let jmax = (k + p + 1).min(n);
            for i in k + 1..jmax {
                let l = band[idx(i, k)] / pivot;
                if l == 0.0 {
                    continue;
                }
                for j in k..jmax {
                    band[idx(i, j)] -= l * band[idx(k, j)];
                }
                y[i] -= l * y[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let jmax = (k + p + 1).min(n);
            let mut s = y[k];
            for j in k + 1..jmax {
                s -= band[idx(k, j)] * x[j];
            }
            x[k] = s / band[idx(k, k)];
        }
        x
    }
}
