//! Discrete Grönwall bound for `v_n ≤ v_{n−1} + θ v_n + w_n`.

use crate::error::{invalid, Result};

fn lambda(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0,1), got {theta}")));
    }
    Ok(theta / (1.0 - theta))
}

/// `bound[n] = e^{nλ}[v0 + Σ_{k=1}^n e^{(1−k)λ} w_k]` for `n = 0..=w.len()`, with
/// `λ = θ/(1−θ)`. `w[0]` is `w_1`.
pub fn discrete_gronwall_bound(v0: f64, theta: f64, w: &[f64]) -> Result<Vec<f64>> {
    let lam = lambda(theta)?;
    if v0 < 0.0 || w.iter().any(|&x| x < 0.0) {
        return Err(invalid("Gronwall inputs must be nonnegative"));
    }
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push(v0);
    let mut acc = v0;
    for (k, &wk) in w.iter().enumerate() {
        acc += (-(k as f64) * lam).exp() * wk;
        out.push(((k + 1) as f64 * lam).exp() * acc);
    }
    Ok(out)
}

/// Geometric closed form of [`discrete_gronwall_bound`] for constant `w_k = c`.
pub fn gronwall_constant_closed(v0: f64, theta: f64, c: f64, n: usize) -> Result<f64> {
    let lam = lambda(theta)?;
    let nl = n as f64 * lam;
    // Σ_{k=1}^n e^{(1−k)λ} = (1 − e^{−nλ}) / (1 − e^{−λ})
    let geom = if n == 0 {
        0.0
    } else {
        (-nl).exp_m1() / (-lam).exp_m1()
    };
    Ok(nl.exp() * (v0 + c * geom))
}

/// The coarser estimate `e^{nλ}[v0 + c/θ]`, which dominates the closed form
/// since `1 − e^{−λ} ≥ θ`.
pub fn gronwall_constant_shortcut(v0: f64, theta: f64, c: f64, n: usize) -> Result<f64> {
    let lam = lambda(theta)?;
    Ok((n as f64 * lam).exp() * (v0 + c / theta))
}
