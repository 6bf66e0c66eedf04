//! Entropy variables `w_i = φ_i^ε(u_i)`, the entropy densities `ψ_i^ε`, the
//! symmetrized diffusion matrix `A^ε(u)` and its quadratic form.
//!
//! Species `i` uses the cross coefficient of the *other* equation:
//! `φ_i(x) = ∫_1^x a_ji'(t)/t dt`, `ψ_i(x) = ∫_1^x φ_i(t) dt`.

use std::sync::Arc;

use crate::coefficients::{other, CoefficientSet, RegularizedCoefficients};
use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::spatial::SpatialSpace;

const INVERSE_REL_TOL: f64 = 1e-12;
const MAX_LOG_ARG: f64 = 709.0;

#[derive(Clone, Debug)]
pub struct EntropyMap {
    reg: Arc<RegularizedCoefficients>,
    species: usize,
    /// `(A_ji, α_ji)` when the cross coefficient is a pure power.
    closed: Option<(f64, f64)>,
    eps: f64,
    b_const: f64,
    d_const: f64,
}

impl EntropyMap {
    pub fn new(reg: Arc<RegularizedCoefficients>, species: usize) -> Result<Self> {
        if species > 1 {
            return Err(invalid(format!("species index {species}")));
        }
        let j = other(species);
        let closed = match reg.base() {
            CoefficientSet::PowerLaw(p) => {
                let (amp, e) = (p.a[j][species], p.alpha[j][species]);
                if !(amp > 0.0 && e > 0.0 && e < 1.0) {
                    return Err(Error::Assumption(format!(
                        "entropy map of species {} needs A_ji > 0 and 0 < alpha_ji < 1",
                        species + 1
                    )));
                }
                Some((amp, e))
            }
            CoefficientSet::General(_) => None,
        };
        let eps = reg.eps();
        let mut m = Self {
            reg,
            species,
            closed,
            eps,
            b_const: 0.0,
            d_const: 0.0,
        };
        m.b_const = m.compute_b();
        m.d_const = m.compute_d();
        Ok(m)
    }

    pub fn pair(reg: &Arc<RegularizedCoefficients>) -> Result<[EntropyMap; 2]> {
        Ok([Self::new(reg.clone(), 0)?, Self::new(reg.clone(), 1)?])
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    pub fn regularized(&self) -> &RegularizedCoefficients {
        &self.reg
    }

    /// Minimum of `x φ_i(x)` over `(0, 1]` for the unregularized map.
    pub fn b_const(&self) -> f64 {
        self.b_const
    }

    /// Constant with `x^α + a_ji(x) ≤ D(1 + ψ_i(x))` for all `α ∈ [0,1]` and
    /// `x ψ_i'(x) ≤ D(1 + ψ_i(x))`, unregularized.
    pub fn d_const(&self) -> f64 {
        self.d_const
    }

    /// `a_ji(x) + e x` with the regularization level `e` passed explicitly.
    fn cross_at(&self, e: f64, x: f64) -> f64 {
        self.reg.base().cross(other(self.species), x) + e * x
    }

    fn cross_d1_at(&self, e: f64, x: f64) -> f64 {
        self.reg.base().cross_d1(other(self.species), x) + e
    }

    /// `a_ji^ε(x)`
    pub fn cross(&self, x: f64) -> f64 {
        self.cross_at(self.eps, x)
    }

    /// `(a_ji^ε)'(x)`
    pub fn cross_d1(&self, x: f64) -> f64 {
        self.cross_d1_at(self.eps, x)
    }

    fn phi_at(&self, e: f64, x: f64) -> f64 {
        if let Some((amp, al)) = self.closed {
            let l = x.ln();
            amp * al * (-((al - 1.0) * l).exp_m1()) / (1.0 - al) + e * l
        } else {
            // substitute t = e^s: ∫ a'(e^s) ds over [0, ln x]
            let l = x.ln();
            let base = quadrature::integrate(
                |s| self.reg.base().cross_d1(other(self.species), s.exp()),
                0.0,
                l,
                1e-13,
            );
            base + e * l
        }
    }

    fn psi_at(&self, e: f64, x: f64) -> f64 {
        if x == 0.0 {
            return self.cross_at(e, 1.0);
        }
        if let Some((amp, al)) = self.closed {
            let l = x.ln();
            let xa_m1 = (al * l).exp_m1();
            let ent = if e == 0.0 { 0.0 } else { e * (x * l - x + 1.0) };
            amp * al / (1.0 - al) * ((x - 1.0) - xa_m1 / al) + ent
        } else {
            // ψ(x) = x φ(x) + a(1) − a(x), valid for any ε level.
            x * self.phi_at(e, x) + self.cross_at(e, 1.0) - self.cross_at(e, x)
        }
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(invalid(format!("phi evaluated at non-positive x = {x}")));
        }
        Ok(self.phi_at(self.eps, x))
    }

    /// `(φ^ε)'(x) = (a_ji^ε)'(x)/x`
    pub fn phi_prime(&self, x: f64) -> f64 {
        self.cross_d1(x) / x
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(invalid(format!("psi evaluated at negative x = {x}")));
        }
        Ok(self.psi_at(self.eps, x))
    }

    /// `φ^ε(e^s)`, free of overflow for closed-form maps.
    pub fn phi_log(&self, s: f64) -> f64 {
        if let Some((amp, al)) = self.closed {
            amp * al * (-((al - 1.0) * s).exp_m1()) / (1.0 - al) + self.eps * s
        } else {
            self.phi_at(self.eps, s.exp())
        }
    }

    /// `d/ds φ^ε(e^s) = (a_ji^ε)'(e^s)`
    fn phi_log_slope(&self, s: f64) -> f64 {
        if let Some((amp, al)) = self.closed {
            amp * al * ((al - 1.0) * s).exp() + self.eps
        } else {
            self.cross_d1(s.exp())
        }
    }

    /// Returns `s = ln x` with `φ^ε(x) = y`. `guess` is a starting value for `s`.
    pub fn phi_inverse_log(&self, y: f64, guess: Option<f64>) -> Result<f64> {
        let s = self.phi_inverse_log_coarse(y, guess)?;
        Ok(self.polish(y, s))
    }

    /// Newton steps past the acceptance tolerance, down to rounding level, so that
    /// nodal `u` does not carry the inversion tolerance into residuals.
    fn polish(&self, y: f64, mut s: f64) -> f64 {
        let mut fs = self.phi_log(s) - y;
        for _ in 0..4 {
            let d = self.phi_log_slope(s);
            if !(d > 0.0 && d.is_finite()) || fs == 0.0 {
                break;
            }
            let t = s - fs / d;
            let ft = self.phi_log(t) - y;
            if !(ft.abs() < fs.abs()) {
                break;
            }
            s = t;
            fs = ft;
        }
        s
    }

    fn phi_inverse_log_coarse(&self, y: f64, guess: Option<f64>) -> Result<f64> {
        if !y.is_finite() {
            return Err(invalid(format!("phi_inverse of non-finite value {y}")));
        }
        let tol = INVERSE_REL_TOL * (1.0 + y.abs());
        let limit = if self.closed.is_some() { 1e15 } else { MAX_LOG_ARG };
        let g = |s: f64| self.phi_log(s) - y;

        let s0 = guess.filter(|s| s.is_finite()).unwrap_or(0.0);
        let f0 = g(s0);
        if f0.abs() <= tol {
            return Ok(s0);
        }
        // bracket by geometric expansion
        let slope = self.phi_log_slope(s0);
        let mut step = if slope > 0.0 && slope.is_finite() {
            (1.5 * f0.abs() / slope).clamp(1e-10, 1.0)
        } else {
            1.0
        };
        let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
        let (mut lo, mut hi);
        let mut prev = s0;
        loop {
            let s = prev + dir * step;
            if s.abs() > limit {
                return Err(Error::InverseFailed(y));
            }
            let fs = g(s);
            if fs.abs() <= tol {
                return Ok(s);
            }
            if (fs > 0.0) == (dir > 0.0) {
                if dir > 0.0 {
                    lo = prev;
                    hi = s;
                } else {
                    lo = s;
                    hi = prev;
                }
                break;
            }
            prev = s;
            step *= 2.0;
        }
        // safeguarded Newton inside the bracket
        let mut s = 0.5 * (lo + hi);
        for it in 0..400 {
            let fs = g(s);
            if fs.abs() <= tol {
                return Ok(s);
            }
            if fs < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let d = self.phi_log_slope(s);
            let newton = s - fs / d;
            // every fourth iterate bisects, so the bracket shrinks geometrically
            s = if it % 4 != 3 && d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
                let fs = g(s);
                if fs.abs() <= tol {
                    return Ok(s);
                }
                return Err(Error::InverseFailed(y));
            }
        }
        Err(Error::InverseFailed(y))
    }

    /// Unique `x > 0` with `φ^ε(x) = y`.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        self.phi_inverse_from(y, None)
    }

    pub fn phi_inverse_from(&self, y: f64, guess: Option<f64>) -> Result<f64> {
        let s = self.phi_inverse_log(y, guess.filter(|g| *g > 0.0).map(f64::ln))?;
        if s > MAX_LOG_ARG {
            return Err(Error::InverseFailed(y));
        }
        Ok(s.exp())
    }

    fn compute_b(&self) -> f64 {
        // x φ(x) on (0,1]: scan in ln x, then golden-section refinement
        let f = |s: f64| s.exp() * self.phi_at(0.0, s.exp());
        let (a, b) = (-60.0, 0.0);
        let m = 600;
        let h = (b - a) / m as f64;
        let mut best = 0;
        let mut best_v = f(a);
        for k in 1..=m {
            let v = f(a + h * k as f64);
            if v < best_v {
                best_v = v;
                best = k;
            }
        }
        let mut lo = a + h * (best.max(1) - 1) as f64;
        let mut hi = (a + h * (best + 1) as f64).min(b);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if f(x1) < f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        best_v.min(f(0.5 * (lo + hi))).min(0.0)
    }

    fn compute_d(&self) -> f64 {
        // Concave h lies below its tangent at M and the convex ℓ = ψ above its
        // tangent, so h(x) ≤ h(M) + h'(M)/ℓ'(M)·(ℓ(x) − ℓ(M)) whenever ℓ'(M) > 0;
        // any M > 1 yields a valid constant, the grid picks the smallest.
        //   first inequality:  h = x + a_ji, giving x^α + a_ji ≤ (1 + A)(1 + ψ)
        //   second inequality: h = xψ' − 2ψ (h' = a_ji' − φ, h'' ≤ 0),
        //                      giving xψ' ≤ (2 + A)(1 + ψ)
        let constant = |h: f64, hd: f64, ld: f64, m: f64| -> f64 {
            let a = if hd >= 0.0 {
                h.max(hd / ld)
            } else {
                h + hd.abs() * m
            };
            a.max(0.0)
        };
        let mut a1 = f64::INFINITY;
        let mut a2 = f64::INFINITY;
        let pts = 240;
        for k in 0..pts {
            let m = 1.0 + 10f64.powf(-3.0 + 9.0 * k as f64 / (pts - 1) as f64);
            let phi = self.phi_at(0.0, m);
            if !(phi > 0.0) {
                continue;
            }
            let psi = self.psi_at(0.0, m);
            let a = self.cross_at(0.0, m);
            let ad = self.cross_d1_at(0.0, m);
            a1 = a1.min(constant(m + a, 1.0 + ad, phi, m));
            a2 = a2.min(constant(m * phi - 2.0 * psi, ad - phi, phi, m));
        }
        (1.0 + a1).max(2.0 + a2)
    }
}

/// `E_ε(u) = ∫ ψ_1^ε(u_1) + ψ_2^ε(u_2)` by the space's quadrature.
pub fn entropy_functional(
    maps: &[EntropyMap; 2],
    u: [&[f64]; 2],
    space: &SpatialSpace,
) -> Result<f64> {
    let w = space.weights();
    let mut e = 0.0;
    for (i, map) in maps.iter().enumerate() {
        if u[i].len() != w.len() {
            return Err(invalid("field length does not match quadrature"));
        }
        for (q, &x) in u[i].iter().enumerate() {
            if !(x > 0.0) {
                return Err(invalid(format!(
                    "non-positive value {x} of species {} at node {q}",
                    i + 1
                )));
            }
            e += w[q] * map.psi_at(map.eps, x);
        }
    }
    Ok(e)
}

/// Entries of `A^ε(u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionMatrixEval {
    pub u: [f64; 2],
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub det: f64,
}

impl DiffusionMatrixEval {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (0, 1) => self.a12,
            (1, 0) => self.a21,
            _ => self.a22,
        }
    }
}

pub fn matrix_a(reg: &RegularizedCoefficients, u1: f64, u2: f64) -> DiffusionMatrixEval {
    let a11 = (reg.a_d1(0, 0, u1) + reg.a(0, 1, u2)) * u1 / reg.a_d1(1, 0, u1);
    let a22 = (reg.a_d1(1, 1, u2) + reg.a(1, 0, u1)) * u2 / reg.a_d1(0, 1, u2);
    let off = u1 * u2;
    DiffusionMatrixEval {
        u: [u1, u2],
        a11,
        a12: off,
        a21: off,
        a22,
        det: a11 * a22 - off * off,
    }
}

/// `A^ε(u)` together with `∂A/∂u_1` and `∂A/∂u_2`, each as `[[f64; 2]; 2]`.
pub fn matrix_a_with_derivatives(
    reg: &RegularizedCoefficients,
    u1: f64,
    u2: f64,
) -> ([[f64; 2]; 2], [[[f64; 2]; 2]; 2]) {
    let n1 = reg.a_d1(0, 0, u1) + reg.a(0, 1, u2);
    let p1 = reg.a_d1(1, 0, u1);
    let n2 = reg.a_d1(1, 1, u2) + reg.a(1, 0, u1);
    let p2 = reg.a_d1(0, 1, u2);
    let a11 = n1 * u1 / p1;
    let a22 = n2 * u2 / p2;
    let a = [[a11, u1 * u2], [u1 * u2, a22]];

    let d11_du1 = (reg.a_d2(0, 0, u1) * u1 + n1) / p1 - n1 * u1 * reg.a_d2(1, 0, u1) / (p1 * p1);
    let d11_du2 = reg.a_d1(0, 1, u2) * u1 / p1;
    let d22_du2 = (reg.a_d2(1, 1, u2) * u2 + n2) / p2 - n2 * u2 * reg.a_d2(0, 1, u2) / (p2 * p2);
    let d22_du1 = reg.a_d1(1, 0, u1) * u2 / p2;
    let da_du1 = [[d11_du1, u2], [u2, d22_du1]];
    let da_du2 = [[d11_du2, u1], [u1, d22_du2]];
    (a, [da_du1, da_du2])
}

/// `Q = ∇wᵀ A ∇w` and its two lower bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticForm {
    pub q: f64,
    pub bound1: f64,
    pub bound2: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `gw[i]` holds the gradient of `w_i` (one entry per space dimension).
pub fn quadratic_form(reg: &RegularizedCoefficients, u: [f64; 2], gw: [&[f64]; 2]) -> QuadraticForm {
    let m = matrix_a(reg, u[0], u[1]);
    let q = m.a11 * dot(gw[0], gw[0]) + 2.0 * m.a12 * dot(gw[0], gw[1]) + m.a22 * dot(gw[1], gw[1]);

    let a21 = reg.a(1, 0, u[0]);
    let a12 = reg.a(0, 1, u[1]);
    let a21d = reg.a_d1(1, 0, u[0]);
    let a12d = reg.a_d1(0, 1, u[1]);
    let gu1: Vec<f64> = gw[0].iter().map(|g| g * u[0] / a21d).collect();
    let gu2: Vec<f64> = gw[1].iter().map(|g| g * u[1] / a12d).collect();
    let n1 = dot(&gu1, &gu1);
    let n2 = dot(&gu2, &gu2);

    let bound1 = a21d / u[0] * n1 + a12d / u[1] * n2;

    let mixed: f64 = gu1
        .iter()
        .zip(&gu2)
        .map(|(g1, g2)| {
            let v = a21d * a12 * g1 + a21 * a12d * g2;
            v * v
        })
        .sum();
    let bound2 = a21d * a21d / a21 * n1 + a12d * a12d / a12 * n2 + mixed / (a21 * a12);
    QuadraticForm { q, bound1, bound2 }
}

/// The same `Q` written in the `u`-gradients:
/// `[a11'+a12]a21'/u1 |∇u1|² + [a22'+a21]a12'/u2 |∇u2|² + 2 a21' a12' ∇u1·∇u2`.
pub fn quadratic_form_expanded(reg: &RegularizedCoefficients, u: [f64; 2], gw: [&[f64]; 2]) -> f64 {
    let a21d = reg.a_d1(1, 0, u[0]);
    let a12d = reg.a_d1(0, 1, u[1]);
    let gu1: Vec<f64> = gw[0].iter().map(|g| g * u[0] / a21d).collect();
    let gu2: Vec<f64> = gw[1].iter().map(|g| g * u[1] / a12d).collect();
    (reg.a_d1(0, 0, u[0]) + reg.a(0, 1, u[1])) * a21d / u[0] * dot(&gu1, &gu1)
        + (reg.a_d1(1, 1, u[1]) + reg.a(1, 0, u[0])) * a12d / u[1] * dot(&gu2, &gu2)
        + 2.0 * a21d * a12d * dot(&gu1, &gu2)
}

/// `β_α(x) = x^{(1−α)/2}`
pub fn beta_alpha(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.powf(0.5 * (1.0 - alpha))
}
