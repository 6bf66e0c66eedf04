//! Reaction and diffusion coefficients of the two-species system
//!
//! ```text
//! ∂t u_i − Δ[a_ii(u_i) + u_i a_ij(u_j)] = u_i (r_i − s_ii(u_i) − s_ij(u_j))
//! ```
//!
//! with `a_ii(x) = x d_ii(x)`, plus the ε-regularized family used by the scheme.
//! Species indices are zero-based throughout the crate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub(crate) fn other(i: usize) -> usize {
    1 - i
}

/// `amp · x^e` with the conventions `x^0 = 1` and `0^e = 0` for `e > 0`.
fn pow_term(amp: f64, e: f64, x: f64) -> f64 {
    if amp == 0.0 {
        return 0.0;
    }
    if e == 0.0 {
        return amp;
    }
    if x == 0.0 {
        return if e > 0.0 { 0.0 } else { f64::INFINITY };
    }
    amp * x.powf(e)
}

fn pow_term_d1(amp: f64, e: f64, x: f64) -> f64 {
    if amp == 0.0 || e == 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if e < 1.0 {
            f64::INFINITY * e.signum()
        } else if e == 1.0 {
            amp
        } else {
            0.0
        };
    }
    amp * e * x.powf(e - 1.0)
}

fn pow_term_d2(amp: f64, e: f64, x: f64) -> f64 {
    if amp == 0.0 || e == 0.0 || e == 1.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if e == 2.0 {
            2.0 * amp
        } else if e > 2.0 {
            0.0
        } else {
            f64::INFINITY * (e * (e - 1.0)).signum()
        };
    }
    amp * e * (e - 1.0) * x.powf(e - 2.0)
}

/// Power-law data: `a_ij(x) = D_i x δ_ij + A_ij x^{α_ij}`, `s_ij(x) = S_ij x^{σ_ij}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCoefficients {
    pub r: [f64; 2],
    pub s: [[f64; 2]; 2],
    pub sigma: [[f64; 2]; 2],
    pub d: [f64; 2],
    pub a: [[f64; 2]; 2],
    pub alpha: [[f64; 2]; 2],
}

impl PowerLawCoefficients {
    /// Pure cross-diffusion with `d_ii ≡ 1` and `a_ij(x) = √x`, no reactions.
    pub fn sqrt_cross() -> Self {
        Self {
            r: [0.0; 2],
            s: [[0.0; 2]; 2],
            sigma: [[1.0; 2]; 2],
            d: [1.0; 2],
            a: [[0.0, 1.0], [1.0, 0.0]],
            alpha: [[1.0, 0.5], [0.5, 1.0]],
        }
    }

    /// Growth exponent of `a_ii` at infinity.
    pub fn self_exponent(&self, i: usize) -> f64 {
        if self.a[i][i] > 0.0 {
            self.alpha[i][i].max(1.0)
        } else {
            1.0
        }
    }
}

type Fx = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied scalar function with its derivative. The second derivative,
/// when not given, is a central difference of the derivative.
#[derive(Clone)]
pub struct ScalarFn {
    f: Fx,
    df: Fx,
    d2f: Option<Fx>,
}

impl ScalarFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: None,
        }
    }

    pub fn with_second(mut self, d2f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2f = Some(Arc::new(d2f));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| 0.0).with_second(|_| 0.0)
    }

    pub fn power(amp: f64, e: f64) -> Self {
        Self::new(move |x| pow_term(amp, e, x), move |x| pow_term_d1(amp, e, x))
            .with_second(move |x| pow_term_d2(amp, e, x))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn second(&self, x: f64) -> f64 {
        if let Some(d2) = &self.d2f {
            return d2(x);
        }
        let h = 1e-5 * x.abs().max(1e-3);
        if x > h {
            ((self.df)(x + h) - (self.df)(x - h)) / (2.0 * h)
        } else {
            ((self.df)(x + 2.0 * h) - (self.df)(x + h)) / h
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// Coefficients given as arbitrary evaluators. `cross[i]` is `a_ij` (a function of
/// `u_j`), `self_rate[i]` is `d_ii`.
#[derive(Clone, Debug)]
pub struct GeneralCoefficients {
    pub r: [f64; 2],
    pub cross: [ScalarFn; 2],
    pub self_rate: [ScalarFn; 2],
    pub s: [[ScalarFn; 2]; 2],
}

#[derive(Clone, Debug)]
pub enum CoefficientSet {
    PowerLaw(PowerLawCoefficients),
    General(GeneralCoefficients),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientId {
    /// `a_ij`; for `i == j` the full self term `x d_ii(x)`.
    A(usize, usize),
    /// `d_ii`
    D(usize),
    /// `s_ij`
    S(usize, usize),
}

impl CoefficientSet {
    pub fn power_law(&self) -> Option<&PowerLawCoefficients> {
        match self {
            CoefficientSet::PowerLaw(p) => Some(p),
            CoefficientSet::General(_) => None,
        }
    }

    pub fn r(&self, i: usize) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => p.r[i],
            CoefficientSet::General(g) => g.r[i],
        }
    }

    /// `a_ij(x)` for `i != j`.
    pub fn cross(&self, i: usize, x: f64) -> f64 {
        let j = other(i);
        match self {
            CoefficientSet::PowerLaw(p) => pow_term(p.a[i][j], p.alpha[i][j], x),
            CoefficientSet::General(g) => g.cross[i].value(x),
        }
    }

    pub fn cross_d1(&self, i: usize, x: f64) -> f64 {
        let j = other(i);
        match self {
            CoefficientSet::PowerLaw(p) => pow_term_d1(p.a[i][j], p.alpha[i][j], x),
            CoefficientSet::General(g) => g.cross[i].derivative(x),
        }
    }

    pub fn cross_d2(&self, i: usize, x: f64) -> f64 {
        let j = other(i);
        match self {
            CoefficientSet::PowerLaw(p) => pow_term_d2(p.a[i][j], p.alpha[i][j], x),
            CoefficientSet::General(g) => g.cross[i].second(x),
        }
    }

    /// `d_ii(x)`
    pub fn self_rate(&self, i: usize, x: f64) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => p.d[i] + pow_term(p.a[i][i], p.alpha[i][i] - 1.0, x),
            CoefficientSet::General(g) => g.self_rate[i].value(x),
        }
    }

    pub fn self_rate_d1(&self, i: usize, x: f64) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => pow_term_d1(p.a[i][i], p.alpha[i][i] - 1.0, x),
            CoefficientSet::General(g) => g.self_rate[i].derivative(x),
        }
    }

    pub fn self_rate_d2(&self, i: usize, x: f64) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => pow_term_d2(p.a[i][i], p.alpha[i][i] - 1.0, x),
            CoefficientSet::General(g) => g.self_rate[i].second(x),
        }
    }

    /// `s_ij(x)`
    pub fn reaction(&self, i: usize, j: usize, x: f64) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => pow_term(p.s[i][j], p.sigma[i][j], x),
            CoefficientSet::General(g) => g.s[i][j].value(x),
        }
    }

    pub fn reaction_d1(&self, i: usize, j: usize, x: f64) -> f64 {
        match self {
            CoefficientSet::PowerLaw(p) => pow_term_d1(p.s[i][j], p.sigma[i][j], x),
            CoefficientSet::General(g) => g.s[i][j].derivative(x),
        }
    }

    pub fn eval_coefficient(&self, which: CoefficientId, x: f64) -> Result<f64> {
        check_argument(which, x)?;
        Ok(match which {
            CoefficientId::A(i, j) if i == j => x * self.self_rate(i, x),
            CoefficientId::A(i, _) => self.cross(i, x),
            CoefficientId::D(i) => self.self_rate(i, x),
            CoefficientId::S(i, j) => self.reaction(i, j, x),
        })
    }

    /// Derivative; at `x = 0` this is the one-sided derivative, `+∞` for `x^α` with `α < 1`.
    pub fn eval_derivative(&self, which: CoefficientId, x: f64) -> Result<f64> {
        check_argument(which, x)?;
        Ok(match which {
            CoefficientId::A(i, j) if i == j => match self {
                CoefficientSet::PowerLaw(p) => {
                    p.d[i] + pow_term_d1(p.a[i][i], p.alpha[i][i], x)
                }
                CoefficientSet::General(_) => {
                    self.self_rate(i, x) + x * self.self_rate_d1(i, x)
                }
            },
            CoefficientId::A(i, _) => self.cross_d1(i, x),
            CoefficientId::D(i) => self.self_rate_d1(i, x),
            CoefficientId::S(i, j) => self.reaction_d1(i, j, x),
        })
    }
}

fn check_argument(which: CoefficientId, x: f64) -> Result<()> {
    let idx_ok = match which {
        CoefficientId::A(i, j) | CoefficientId::S(i, j) => i < 2 && j < 2,
        CoefficientId::D(i) => i < 2,
    };
    if !idx_ok {
        return Err(invalid(format!("species index out of range in {which:?}")));
    }
    if !(x >= 0.0) {
        return Err(invalid(format!("coefficient evaluated at negative argument {x}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClauseStatus {
    Pass,
    Fail,
    HeuristicPass,
    HeuristicFail,
}

impl ClauseStatus {
    pub fn failed(self) -> bool {
        matches!(self, ClauseStatus::Fail | ClauseStatus::HeuristicFail)
    }
}

#[derive(Clone, Debug)]
pub struct Clause {
    pub name: String,
    pub status: ClauseStatus,
    pub witness: String,
    /// Structural clauses are required by the scheme itself (entropy structure,
    /// positivity of the diffusion matrix). The growth clauses only enter the
    /// global existence estimates.
    pub structural: bool,
    pub limiting_case: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AssumptionReport {
    pub clauses: Vec<Clause>,
}

pub const CLAUSE_SELF_REACTION: &str = "0 <= sigma_ii < max(1, alpha_ii)";
pub const CLAUSE_CROSS_REACTION: &str = "0 <= sigma_ij < max((alpha_jj+1)/2, 1+alpha_ij/2)";
pub const CLAUSE_CROSS_EXPONENT: &str = "0 < alpha_ij < 1";

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| !c.status.failed())
    }

    pub fn structural_ok(&self) -> bool {
        self.clauses.iter().all(|c| !(c.structural && c.status.failed()))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.status.failed())
    }

    pub fn clause(&self, name: &str) -> impl Iterator<Item = &Clause> {
        let name = name.to_owned();
        self.clauses.iter().filter(move |c| c.name == name)
    }

    fn push(&mut self, name: &str, ok: bool, witness: String, structural: bool) {
        self.clauses.push(Clause {
            name: name.to_owned(),
            status: if ok { ClauseStatus::Pass } else { ClauseStatus::Fail },
            witness,
            structural,
            limiting_case: false,
        });
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            let tag = match c.status {
                ClauseStatus::Pass => "PASS",
                ClauseStatus::Fail => "FAIL",
                ClauseStatus::HeuristicPass => "PASS (heuristic)",
                ClauseStatus::HeuristicFail => "FAIL (heuristic)",
            };
            write!(f, "{tag:<17} {}: {}", c.name, c.witness)?;
            if c.limiting_case {
                write!(f, " [linear cross-diffusion limiting case]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn check_assumptions_h(c: &CoefficientSet) -> AssumptionReport {
    match c {
        CoefficientSet::PowerLaw(p) => check_power_law(p),
        CoefficientSet::General(g) => check_general(c, g),
    }
}

fn check_power_law(p: &PowerLawCoefficients) -> AssumptionReport {
    let mut rep = AssumptionReport::default();
    let finite = p
        .r
        .iter()
        .chain(p.d.iter())
        .chain(p.s.iter().flatten())
        .chain(p.sigma.iter().flatten())
        .chain(p.a.iter().flatten())
        .chain(p.alpha.iter().flatten())
        .all(|v| v.is_finite());
    rep.push("parameters finite", finite, String::new(), true);

    let nonneg = p.r.iter().all(|&v| v >= 0.0)
        && p.s.iter().flatten().all(|&v| v >= 0.0)
        && p.a.iter().flatten().all(|&v| v >= 0.0);
    rep.push(
        "r_i, S_ij, A_ij >= 0",
        nonneg,
        format!("r = {:?}, S = {:?}, A = {:?}", p.r, p.s, p.a),
        true,
    );

    for i in 0..2 {
        let j = other(i);
        let (ii, ij) = (i + 1, j + 1);
        let d0 = p.d[i] + if p.alpha[i][i] == 1.0 { p.a[i][i] } else { 0.0 };
        rep.push(
            "d_ii(0) > 0",
            p.d[i] > 0.0 && d0 > 0.0,
            format!("i={ii}: D = {}, d(0) = {d0}", p.d[i]),
            true,
        );
        let mono = p.a[i][i] == 0.0 || p.alpha[i][i] >= 1.0;
        rep.push(
            "d_ii nondecreasing",
            mono,
            format!("i={ii}: A_ii = {}, alpha_ii = {}", p.a[i][i], p.alpha[i][i]),
            true,
        );

        let aij = p.alpha[i][j];
        let ok = aij > 0.0 && aij < 1.0;
        rep.clauses.push(Clause {
            name: CLAUSE_CROSS_EXPONENT.to_owned(),
            status: if ok { ClauseStatus::Pass } else { ClauseStatus::Fail },
            witness: format!("(i,j)=({ii},{ij}): alpha_ij = {aij}"),
            structural: true,
            limiting_case: aij == 1.0,
        });
        rep.push(
            "A_ij > 0 (i != j)",
            p.a[i][j] > 0.0,
            format!("(i,j)=({ii},{ij}): A_ij = {}", p.a[i][j]),
            true,
        );

        // Growth clauses. A vanishing amplitude makes the clause vacuous.
        let sii = p.sigma[i][i];
        let bound = 1.0f64.max(p.self_exponent(i));
        let ok = sii >= 0.0 && (p.s[i][i] == 0.0 || sii < bound);
        rep.push(
            CLAUSE_SELF_REACTION,
            ok,
            format!("i={ii}: sigma_ii = {sii}, bound = {bound}, S_ii = {}", p.s[i][i]),
            false,
        );

        // Compared in the scaled form 2σ < α_jj + 1 or 2σ < 2 + α_ij, which is
        // exact for dyadic exponents.
        let sij = p.sigma[i][j];
        let ajj = p.self_exponent(j);
        let ok_bound = 2.0 * sij < ajj + 1.0 || 2.0 * sij < 2.0 + aij;
        let ok = sij >= 0.0 && (p.s[i][j] == 0.0 || ok_bound);
        rep.push(
            CLAUSE_CROSS_REACTION,
            ok,
            format!(
                "(i,j)=({ii},{ij}): sigma_ij = {sij}, bound = {}, S_ij = {}",
                ((ajj + 1.0) / 2.0).max(1.0 + aij / 2.0),
                p.s[i][j]
            ),
            false,
        );
    }
    rep
}

fn sample_grid() -> Vec<f64> {
    let m = 200;
    (0..m)
        .map(|k| 10f64.powf(-6.0 + 9.0 * k as f64 / (m - 1) as f64))
        .collect()
}

fn check_general(c: &CoefficientSet, g: &GeneralCoefficients) -> AssumptionReport {
    let mut rep = AssumptionReport::default();
    let grid = sample_grid();
    rep.push(
        "r_i >= 0",
        g.r.iter().all(|&v| v >= 0.0),
        format!("r = {:?}", g.r),
        true,
    );
    for i in 0..2 {
        let j = other(i);
        let (ii, ij) = (i + 1, j + 1);
        let a = &g.cross[i];
        let a0 = a.value(0.0);
        rep.push(
            "a_ij(0) = 0",
            a0.abs() <= 1e-14,
            format!("(i,j)=({ii},{ij}): a(0) = {a0}"),
            true,
        );
        let vals: Vec<f64> = grid.iter().map(|&x| a.value(x)).collect();
        let mono = vals.windows(2).all(|w| w[1] >= w[0]) && vals[0] > 0.0;
        rep.push(
            "a_ij positive, nondecreasing",
            mono,
            format!("(i,j)=({ii},{ij}): sampled on [1e-6, 1e3]"),
            true,
        );
        let concave = grid.windows(2).all(|w| {
            let m = 0.5 * (w[0] + w[1]);
            a.value(m) >= 0.5 * (a.value(w[0]) + a.value(w[1])) - 1e-12 * a.value(w[1]).abs()
        });
        rep.push(
            "a_ij concave",
            concave,
            format!("(i,j)=({ii},{ij}): midpoint test on sampled grid"),
            true,
        );
        // x^α a'(x) ≥ C: estimate the decay exponent of a' at both ends.
        let slope_hi = (a.derivative(1e3).ln() - a.derivative(1e2).ln()) / 10f64.ln();
        let slope_lo = (a.derivative(1e-5).ln() - a.derivative(1e-6).ln()) / 10f64.ln();
        let ok = slope_hi > -1.0 && a.derivative(1e-6) > 0.0 && slope_lo.is_finite();
        rep.clauses.push(Clause {
            name: "x^alpha a_ij'(x) >= C".to_owned(),
            status: if ok {
                ClauseStatus::HeuristicPass
            } else {
                ClauseStatus::HeuristicFail
            },
            witness: format!("(i,j)=({ii},{ij}): log-slope of a' at infinity = {slope_hi:.4}"),
            structural: true,
            limiting_case: false,
        });

        let d0 = g.self_rate[i].value(0.0);
        let dmono = d0 > 0.0 && grid.iter().all(|&x| g.self_rate[i].value(x) >= d0 - 1e-14);
        let dnd = grid
            .windows(2)
            .all(|w| g.self_rate[i].value(w[1]) >= g.self_rate[i].value(w[0]));
        rep.push(
            "d_ii(x) >= d_ii(0) > 0",
            dmono,
            format!("i={ii}: d(0) = {d0}"),
            true,
        );
        rep.push("d_ii nondecreasing", dnd, format!("i={ii}: sampled"), true);

        for jj in 0..2 {
            let xs: Vec<f64> = (0..9).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect();
            let sub: Vec<f64> = xs.iter().map(|&x| g.s[i][jj].value(x) / x).collect();
            let dom: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let s = g.s[i][jj].value(x);
                    if jj == i {
                        s / (x * c.self_rate(i, x))
                    } else {
                        s / (x * (c.self_rate(jj, x) + c.cross(i, x)).sqrt())
                    }
                })
                .collect();
            let decays = |v: &[f64]| {
                let first = v[0].abs();
                let last = v[v.len() - 1].abs();
                v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) && (last <= 1e-3 || last <= 0.1 * first)
            };
            let ok = decays(&sub) || decays(&dom);
            let name = if jj == i {
                CLAUSE_SELF_REACTION
            } else {
                CLAUSE_CROSS_REACTION
            };
            rep.clauses.push(Clause {
                name: name.to_owned(),
                status: if ok {
                    ClauseStatus::HeuristicPass
                } else {
                    ClauseStatus::HeuristicFail
                },
                witness: format!(
                    "(i,j)=({ii},{}): s/x at 1e2..1e6 = {:.3e}..{:.3e}",
                    jj + 1,
                    sub[0],
                    sub[sub.len() - 1]
                ),
                structural: false,
                limiting_case: false,
            });
        }
    }
    rep
}

/// The saturation function γ_ε: identity on `[0, 1]`, `1 + (1 − e^{−ε(x−1)})/ε` beyond.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gamma {
    eps: f64,
}

pub fn make_gamma_eps(eps: f64) -> Result<Gamma> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(Gamma { eps })
}

impl Gamma {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 1.0 {
            x
        } else {
            1.0 - (-self.eps * (x - 1.0)).exp_m1() / self.eps
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else {
            (-self.eps * (x - 1.0)).exp()
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        if x <= 1.0 {
            0.0
        } else {
            -self.eps * (-self.eps * (x - 1.0)).exp()
        }
    }

    pub fn as_scalar_fn(&self) -> ScalarFn {
        let g = *self;
        ScalarFn::new(move |x| g.value(x), move |x| g.d1(x)).with_second(move |x| g.d2(x))
    }
}

/// Coefficients with `a_ij^ε = a_ij + εx` (i ≠ j) and `d_ii^ε = γ_ε ∘ d_ii`.
///
/// `eps = 0` is accepted and yields the unregularized coefficients.
#[derive(Clone, Debug)]
pub struct RegularizedCoefficients {
    base: CoefficientSet,
    eps: f64,
    gamma: Option<Gamma>,
}

pub fn regularize(c: &CoefficientSet, eps: f64) -> Result<RegularizedCoefficients> {
    let report = check_assumptions_h(c);
    if !report.structural_ok() {
        let msg: Vec<String> = report
            .failures()
            .filter(|cl| cl.structural)
            .map(|cl| format!("{} ({})", cl.name, cl.witness))
            .collect();
        return Err(Error::Assumption(msg.join("; ")));
    }
    RegularizedCoefficients::new_unchecked(c.clone(), eps)
}

impl RegularizedCoefficients {
    pub fn new_unchecked(base: CoefficientSet, eps: f64) -> Result<Self> {
        let gamma = if eps == 0.0 {
            None
        } else {
            Some(make_gamma_eps(eps)?)
        };
        Ok(Self { base, eps, gamma })
    }

    pub fn base(&self) -> &CoefficientSet {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn gamma(&self, x: f64) -> f64 {
        self.gamma.map_or(x, |g| g.value(x))
    }

    pub fn gamma_d1(&self, x: f64) -> f64 {
        self.gamma.map_or(1.0, |g| g.d1(x))
    }

    pub fn gamma_d2(&self, x: f64) -> f64 {
        self.gamma.map_or(0.0, |g| g.d2(x))
    }

    pub fn r(&self, i: usize) -> f64 {
        self.base.r(i)
    }

    pub fn d_eps(&self, i: usize, x: f64) -> f64 {
        self.gamma(self.base.self_rate(i, x))
    }

    pub fn d_eps_d1(&self, i: usize, x: f64) -> f64 {
        self.gamma_d1(self.base.self_rate(i, x)) * self.base.self_rate_d1(i, x)
    }

    pub fn d_eps_d2(&self, i: usize, x: f64) -> f64 {
        let d = self.base.self_rate(i, x);
        let d1 = self.base.self_rate_d1(i, x);
        self.gamma_d2(d) * d1 * d1 + self.gamma_d1(d) * self.base.self_rate_d2(i, x)
    }

    /// `a_ij^ε(x)`; for `i == j` this is `x d_ii^ε(x)`.
    pub fn a(&self, i: usize, j: usize, x: f64) -> f64 {
        if i == j {
            x * self.d_eps(i, x)
        } else {
            self.base.cross(i, x) + self.eps * x
        }
    }

    pub fn a_d1(&self, i: usize, j: usize, x: f64) -> f64 {
        if i == j {
            self.d_eps(i, x) + x * self.d_eps_d1(i, x)
        } else {
            self.base.cross_d1(i, x) + self.eps
        }
    }

    pub fn a_d2(&self, i: usize, j: usize, x: f64) -> f64 {
        if i == j {
            2.0 * self.d_eps_d1(i, x) + x * self.d_eps_d2(i, x)
        } else {
            self.base.cross_d2(i, x)
        }
    }

    pub fn s(&self, i: usize, j: usize, x: f64) -> f64 {
        self.base.reaction(i, j, x)
    }

    pub fn s_d1(&self, i: usize, j: usize, x: f64) -> f64 {
        self.base.reaction_d1(i, j, x)
    }

    /// `R_i^+ = r_i u_i`
    pub fn reaction_pos(&self, i: usize, u: [f64; 2]) -> f64 {
        self.r(i) * u[i]
    }

    /// `R_i^{−,ε} = u_i γ_ε(s_i1(u_1) + s_i2(u_2))`
    pub fn reaction_neg(&self, i: usize, u: [f64; 2]) -> f64 {
        u[i] * self.gamma(self.s(i, 0, u[0]) + self.s(i, 1, u[1]))
    }

    /// `R_i^ε` and its gradient with respect to `u`.
    pub fn reaction_with_grad(&self, i: usize, u: [f64; 2]) -> (f64, [f64; 2]) {
        let sum = self.s(i, 0, u[0]) + self.s(i, 1, u[1]);
        let g = self.gamma(sum);
        let gd = self.gamma_d1(sum);
        let val = self.r(i) * u[i] - u[i] * g;
        let mut grad = [0.0; 2];
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk = -u[i] * gd * self.s_d1(i, k, u[k]);
            if k == i {
                *gk += self.r(i) - g;
            }
        }
        (val, grad)
    }
}
